#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "divscope/diversity.hpp"
#include "divscope/embed.hpp"
#include "divscope/expand.hpp"

namespace divscope::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

struct CategoryConfig {
  std::string id;
  double factor = 1.0;
  std::string parent;
};

// Single JSON document driving every stage; the seed is mandatory. The
// thread count and output directory never enter config keys, so reruns at a
// different parallelism produce identical artifacts.
struct RunConfig {
  // inputs
  std::filesystem::path articles;
  std::filesystem::path overrides;  // optional
  std::filesystem::path stopwords;
  std::filesystem::path doc_topic;
  std::filesystem::path topic_words;
  std::filesystem::path vectors;  // external embedding mode

  std::vector<CategoryConfig> categories;

  // text
  std::uint64_t pmi_min_pair_count = 10;
  double pmi_threshold = 3.0;

  // expansion
  std::uint64_t salience_min_count = 1000;
  std::size_t salient_top = 20;
  std::size_t neighbor_top = 30;
  double min_similarity = 0.5;
  std::string aggregation = "max";  // max | mean

  // embedding
  std::string embedding_mode = "builtin";  // builtin | external
  int embed_window = 5;
  int embed_dims = 128;
  std::uint64_t embed_min_term_count = 5;

  // topics
  double presence_threshold = 0.1;  // 0.05 is the documented alternative
  double max_prevalence = 0.10;
  std::size_t min_topic_words = 3;
  bool renormalize = false;

  // diversity
  std::string linkage = "average";  // single | complete | average
  std::vector<double> fractions = {0.01, 0.05, 0.10, 0.25};
  std::optional<std::array<int, 2>> years;  // series span; default: data span

  // comparison
  bool comparison_enabled = true;
  std::vector<std::string> comparison_kinds = {"Company"};
  int comparison_min_year = 0;  // 0: no filter
  std::size_t sample_n = 1000;
  std::size_t sample_runs = 30;

  // network
  std::vector<std::array<int, 2>> network_windows;  // default: full span

  // panel
  std::size_t panel_min_papers = 75;
  std::optional<std::array<int, 2>> panel_years;  // default: last three years
  std::string panel_response = "z";               // z | raw
  std::string panel_report_family = "rao-stirling";
  std::string panel_report_paramset = "2";

  // report
  std::size_t smoothing_window = 1;

  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::filesystem::path out_dir;
  std::filesystem::path config_dir;  // directory of the config file, for relative paths
};

RunConfig load_config(const std::filesystem::path& path);
void validate_config(const RunConfig& config);

enum class Stage { Ingest, Expand, Topics, Diversity, Network, Panel, Report };
std::string_view stage_name(Stage stage);

// Runs one stage, reusing its cached artifacts when the stage's config key
// matches the manifest on disk. Returns true when work was done, false when
// the cache was reused.
bool run_stage(const RunConfig& config, Stage stage);

// ingest -> expand -> topics -> diversity -> network -> panel -> report.
void run_all(const RunConfig& config);

// Human-readable summary of a finished (or partial) run.
std::string report_text(const RunConfig& config);

}  // namespace divscope::pipeline
