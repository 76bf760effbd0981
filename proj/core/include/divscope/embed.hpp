#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divscope/textproc.hpp"

namespace divscope::embed {

struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::string> terms;  // sorted ascending
  Eigen::MatrixXd vectors;         // one row per term

  std::optional<std::size_t> find(std::string_view term) const;
  std::size_t size() const { return terms.size(); }
};

struct PpmiSvdConfig {
  int window = 5;
  int dims = 128;
  std::uint64_t seed = 0;
  // Terms below this corpus frequency stay out of the embedding vocabulary.
  std::uint64_t min_term_count = 5;
  int power_iterations = 2;
  int oversample = 10;
};

// Windowed co-occurrence counts -> positive PMI -> seeded randomized
// truncated SVD. Row vectors are U * sqrt(S). Bit-reproducible for a fixed
// seed at any thread count.
EmbeddingTable train_ppmi_svd(std::span<const text::TokenStream> streams,
                              const PpmiSvdConfig& config, unsigned threads = 1);

// Text format: one term per line, "term v1 v2 ... vd". The first line fixes
// the dimension; ragged lines are an error, repeated terms are skipped.
EmbeddingTable load_vectors(const std::filesystem::path& path,
                            std::vector<std::string>* warnings = nullptr);
void save_vectors(const std::filesystem::path& path, const EmbeddingTable& table);

enum class SeedAggregation { Max, Mean };

struct SimilarTerm {
  std::string term;
  double similarity = 0.0;
};

// Non-seed terms ranked by aggregated cosine similarity to the seed set;
// keeps those at or above min_sim, truncated to top_n, ties lexicographic.
std::vector<SimilarTerm> similar_terms(const EmbeddingTable& table,
                                       const std::vector<std::string>& seeds,
                                       std::size_t top_n, double min_sim,
                                       SeedAggregation aggregation = SeedAggregation::Max,
                                       std::vector<std::string>* warnings = nullptr);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace divscope::embed
