#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace divscope::util {

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view content);

}  // namespace divscope::util
