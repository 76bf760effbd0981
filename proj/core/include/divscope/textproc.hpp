#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "divscope/corpus.hpp"

namespace divscope::text {

using StopwordSet = std::unordered_set<std::string>;

// One token per line, UTF-8.
StopwordSet load_stopwords(const std::filesystem::path& path);

// Lowercases, splits on anything that is not a letter (hyphens split words,
// digits and symbols vanish) and drops stop-word unigrams. Underscores are
// kept so already-merged phrases survive re-tokenization.
std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stopwords);

struct TokenStream {
  std::string article_id;
  std::vector<std::string> tokens;
};

struct CollocationConfig {
  std::uint64_t min_pair_count = 10;
  double pmi_threshold = 3.0;
};

// Frozen corpus-wide merge decisions: pass 1 joins token pairs into bigrams,
// pass 2 joins pairs whose combined word count stays within three. Applying
// the model to already-merged output is a no-op.
class CollocationModel {
 public:
  CollocationModel() = default;
  CollocationModel(std::unordered_set<std::string> pass1, std::unordered_set<std::string> pass2,
                   CollocationConfig config)
      : pass1_(std::move(pass1)), pass2_(std::move(pass2)), config_(config) {}

  std::vector<std::string> apply(std::vector<std::string> tokens) const;
  std::size_t pass1_size() const { return pass1_.size(); }
  std::size_t pass2_size() const { return pass2_.size(); }
  const CollocationConfig& config() const { return config_; }

  static std::string pair_key(std::string_view left, std::string_view right);

 private:
  std::unordered_set<std::string> pass1_;
  std::unordered_set<std::string> pass2_;
  CollocationConfig config_;
};

// Two-pass phrase detection over the whole corpus. PMI for an adjacent pair
// (a, b) is ln(count(ab) * N / (count(a) * count(b))) with N the token total;
// a pair merges when count(ab) >= min_pair_count and PMI > pmi_threshold.
CollocationModel detect_collocations(std::span<const std::vector<std::string>> docs,
                                     const CollocationConfig& config, unsigned threads = 1);

// Tokenizes every abstract and applies a corpus-wide collocation pass.
// Articles without an abstract get an empty stream.
std::vector<TokenStream> preprocess_corpus(const corpus::Corpus& corpus,
                                           const StopwordSet& stopwords,
                                           const CollocationConfig& config,
                                           unsigned threads = 1,
                                           CollocationModel* model_out = nullptr);

struct TermTable {
  std::string partition;
  std::unordered_map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;

  std::uint64_t count(std::string_view term) const {
    auto it = counts.find(std::string(term));
    return it == counts.end() ? 0 : it->second;
  }
  void add(const TermTable& other);
  // Terms in ascending lexicographic order, for deterministic exports.
  std::vector<std::string> sorted_terms() const;
};

TermTable build_term_table(std::span<const TokenStream> streams, std::string partition,
                           unsigned threads = 1);

// freq_in / freq_parent when freq_in exceeds min_count, nothing otherwise.
// A term counted in the partition but absent from its parent is an internal
// consistency error.
std::optional<double> salience(std::string_view term, const TermTable& category,
                               const TermTable& parent, std::uint64_t min_count);

void write_term_table_csv(const std::filesystem::path& path, const TermTable& table);

}  // namespace divscope::text
