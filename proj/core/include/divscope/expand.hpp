#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "divscope/corpus.hpp"
#include "divscope/embed.hpp"
#include "divscope/textproc.hpp"

namespace divscope::expand {

struct CategorySpec {
  std::string id;       // e.g. "cs.AI"
  double factor = 1.0;  // scaling factor applied to the outside deviation
  std::string parent;   // enclosing archive, e.g. "cs"
  bool core = true;
};

struct ExpandedVocabulary {
  std::string category;
  std::vector<std::string> salient;    // ranked, at most the configured cap
  std::vector<std::string> neighbors;  // similarity expansion, ranked
  // salient + neighbors, deduplicated and sorted.
  std::vector<std::string> combined() const;
};

struct ThresholdStats {
  double mean_inside = 0.0;
  double mean_outside = 0.0;
  double sd_outside = 0.0;
  double factor = 1.0;
  double threshold = 0.0;
  bool clamped = false;  // outside band exceeded the inside mean
};

struct ExpansionParams {
  std::uint64_t salience_min_count = 1000;
  std::size_t salient_top = 20;
  std::size_t neighbor_top = 30;
  double min_similarity = 0.5;
  embed::SeedAggregation aggregation = embed::SeedAggregation::Max;
};

// Top salient terms of a partition against its parent archive, ranked by
// frequency ratio; ties prefer the higher in-partition count, then the
// lexicographically smaller term.
std::vector<std::string> salient_vocabulary(const text::TermTable& category,
                                            const text::TermTable& parent,
                                            std::uint64_t min_count, std::size_t top_k = 20);

ExpandedVocabulary expanded_vocabulary(const std::string& category_id,
                                       std::vector<std::string> salient,
                                       const embed::EmbeddingTable& table,
                                       std::size_t top_n = 30, double min_sim = 0.5,
                                       embed::SeedAggregation aggregation = embed::SeedAggregation::Max,
                                       std::vector<std::string>* warnings = nullptr);

// Occurrences (with multiplicity) of vocabulary terms in one token stream.
double vocabulary_occurrences(const text::TokenStream& stream,
                              const std::unordered_set<std::string>& vocabulary);

// K = min(mean_outside + factor * sd_outside, mean_inside). sd uses the n-1
// denominator, so the outside partition needs at least two articles.
ThresholdStats classification_threshold(std::span<const double> inside_counts,
                                        std::span<const double> outside_counts, double factor,
                                        std::vector<std::string>* warnings = nullptr);

// Article ids from the outside partition whose vocabulary occurrence count
// strictly exceeds the threshold; returned in ascending id order.
std::vector<std::string> expand_category(std::span<const text::TokenStream> outside_streams,
                                         const std::unordered_set<std::string>& vocabulary,
                                         double threshold, unsigned threads = 1);

struct CategoryExpansion {
  CategorySpec spec;
  ExpandedVocabulary vocabulary;
  ThresholdStats stats;
  std::vector<std::string> expanded_ids;
  std::size_t inside_n = 0;
  std::size_t outside_n = 0;
};

// Full per-category chain: salient vocabulary, similarity expansion,
// threshold, classification of outside articles. `streams` must be aligned
// with corpus order; empty-abstract articles are excluded from counting.
CategoryExpansion expand_one(const corpus::Corpus& corpus,
                             std::span<const text::TokenStream> streams,
                             const CategorySpec& spec, const text::TermTable& category_table,
                             const text::TermTable& parent_table,
                             const embed::EmbeddingTable& embeddings,
                             const ExpansionParams& params, unsigned threads = 1,
                             std::vector<std::string>* warnings = nullptr);

// Union of core-category members and every expansion, deduplicated, sorted.
std::vector<std::string> build_field_corpus(const corpus::Corpus& corpus,
                                            std::span<const CategorySpec> cores,
                                            std::span<const CategoryExpansion> expansions);

void write_audit_json(const std::filesystem::path& path, const CategoryExpansion& expansion);
void write_id_file(const std::filesystem::path& path, std::span<const std::string> ids);
std::vector<std::string> read_id_file(const std::filesystem::path& path);

}  // namespace divscope::expand
