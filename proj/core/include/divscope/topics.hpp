#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divscope/corpus.hpp"

namespace divscope::topics {

// Document-topic weights aligned with a corpus (rows in ascending article id
// order) plus per-topic word lists.
struct TopicModel {
  std::vector<std::string> topic_ids;
  std::vector<std::vector<std::string>> topic_words;  // aligned with topic_ids
  std::vector<std::string> article_ids;               // ascending
  std::vector<int> years;                             // aligned with article_ids
  Eigen::MatrixXd weights;                            // articles x topics

  std::size_t n_articles() const { return article_ids.size(); }
  std::size_t n_topics() const { return topic_ids.size(); }
};

struct ModelDiagnostics {
  std::vector<std::string> unknown_articles;  // rows dropped: id not in corpus
  std::vector<std::string> missing_articles;  // corpus ids without a row
  std::vector<std::string> warnings;
};

// Doc-topic CSV with header `article_id,<topic>,...`; topic words as JSON
// lines `{"topic_id": ..., "words": [...]}`. Probabilities outside [0,1] are
// an error reported with their coordinates. When `restrict_ids` is given the
// model keeps only those articles.
TopicModel load_topic_model(const std::filesystem::path& doc_topic_path,
                            const std::filesystem::path& topic_words_path,
                            const corpus::Corpus& corpus,
                            ModelDiagnostics* diagnostics = nullptr,
                            std::span<const std::string> restrict_ids = {},
                            unsigned threads = 1);

struct FilterOutcome {
  TopicModel model;
  std::vector<std::string> removed_prevalent;   // present in too many articles
  std::vector<std::string> removed_few_words;  // word list below the minimum
};

// Drops topics present (at presence_k) in more than max_prevalence of the
// articles and topics with fewer than min_words words. Surviving weights are
// left untouched unless renormalize is set.
FilterOutcome filter_topics(const TopicModel& model, double max_prevalence = 0.10,
                            std::size_t min_words = 3, double presence_k = 0.1,
                            bool renormalize = false);

struct PresenceMatrix {
  double threshold = 0.1;
  std::size_t n_topics = 0;
  std::vector<std::vector<std::uint32_t>> rows;  // per article, sorted topic indices
  std::vector<std::uint64_t> topic_counts;       // presence counts over all rows

  bool present(std::size_t article, std::uint32_t topic) const;
  std::uint64_t total_presences() const;
};

// Strict comparison: a topic is present when its weight exceeds k.
PresenceMatrix binarize(const TopicModel& model, double k = 0.1);

struct SalienceResult {
  std::vector<std::string> categories;  // sorted
  Eigen::MatrixXd quotient;             // topics x categories; NaN when undefined
  std::vector<bool> defined;            // per topic: overall share positive
  std::vector<std::string> diagnostics;
};

// Q[i][c] = share of topic i among category-c articles / overall share.
SalienceResult topic_category_salience(const TopicModel& model, const PresenceMatrix& presence,
                                       const corpus::Corpus& corpus);

// Per topic, the category with the highest quotient; ties break to the
// lexicographically first category. Undefined topics get an empty string.
std::vector<std::string> assign_topic_category(const SalienceResult& salience);

struct CategoryShare {
  int year = 0;
  std::string category;
  double share = 0.0;
  std::uint64_t presences = 0;
};

// Yearly share of presence counts per assigned category; shares sum to one
// within a year, years without presences are omitted.
std::vector<CategoryShare> category_share_series(const TopicModel& model,
                                                 const PresenceMatrix& presence,
                                                 std::span<const std::string> assignment);

struct GroupTopicShare {
  std::string topic_id;
  std::string category;
  double share_in = 0.0;
  double share_out = 0.0;
  std::uint64_t occurrences = 0;
};

// Presence share of every topic inside articles matching the predicate vs
// the complement; ordered by category then descending occurrences.
std::vector<GroupTopicShare> group_topic_share_comparison(
    const TopicModel& model, const PresenceMatrix& presence, const std::vector<bool>& in_group,
    std::span<const std::string> assignment);

}  // namespace divscope::topics
