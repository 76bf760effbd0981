#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divscope/corpus.hpp"
#include "divscope/topics.hpp"

namespace divscope::diversity {

enum class DistributionMode { PresenceShare, TopTopic };

// Probability vector over the topics that actually occur in a sub-corpus.
// `topics` holds model column indices; p is aligned with it and sums to one.
struct TopicDistribution {
  DistributionMode mode = DistributionMode::PresenceShare;
  double threshold = 0.0;  // presence threshold feeding the counts
  std::vector<std::uint32_t> topics;
  std::vector<double> p;

  std::size_t support() const { return topics.size(); }
};

// PresenceShare: p_i proportional to the topic's presence count in the rows.
// TopTopic: p_i proportional to the articles whose largest weight lands on
// the topic (ties to the lowest topic index).
TopicDistribution topic_distribution(const topics::TopicModel& model,
                                     const topics::PresenceMatrix& presence,
                                     std::span<const std::size_t> rows, DistributionMode mode);

double hhi(std::span<const double> p);
// Diversity readings: higher is more diverse for every family.
double balance_hhi(const TopicDistribution& dist);    // 1 - sum p^2
double balance_entropy(const TopicDistribution& dist);  // -sum p ln p

enum class DistanceMetric { Cosine, Chebyshev, Jaccard, Correlation };
std::string_view distance_metric_name(DistanceMetric metric);

struct DistanceMatrix {
  DistanceMetric metric = DistanceMetric::Cosine;
  std::vector<std::uint32_t> topics;  // model column indices
  Eigen::MatrixXd d;                  // symmetric, zero diagonal
};

// Pairwise topic distances over a sub-corpus. Cosine, correlation and
// Chebyshev act on the continuous weight columns; Jaccard on the binary
// incidence sets. A zero/constant column against a different column yields
// distance 1 with a warning; identical columns are always at distance 0.
DistanceMatrix topic_distance_matrix(const topics::TopicModel& model,
                                     const topics::PresenceMatrix& presence,
                                     std::span<const std::size_t> rows,
                                     std::span<const std::uint32_t> topic_subset,
                                     DistanceMetric metric,
                                     std::vector<std::string>* warnings = nullptr);

enum class Linkage { Single, Complete, Average };

// Sum of the merge heights of an agglomerative dendrogram over the distance
// matrix; zero for a single class.
double weitzman_diversity(const DistanceMatrix& distances, Linkage linkage = Linkage::Average);

// Sum over unordered pairs of share products weighted by pairwise distance.
double rao_stirling(const TopicDistribution& dist, const DistanceMatrix& distances);

struct FamilyParam {
  std::string family;    // balance | weitzman | rao-stirling
  std::string paramset;  // 1 | 2 | 3
};
const std::vector<FamilyParam>& all_paramsets();

struct MetricOptions {
  Linkage linkage = Linkage::Average;
};

// The nine family/paramset values for one sub-corpus, aligned with
// all_paramsets(); nullopt when fewer than two topics are present.
std::vector<std::optional<double>> metric_suite(const topics::TopicModel& model,
                                                const topics::PresenceMatrix& presence,
                                                std::span<const std::size_t> rows,
                                                const MetricOptions& options = {},
                                                std::vector<std::string>* warnings = nullptr);

struct SeriesPoint {
  std::string window;
  std::string family;
  std::string paramset;
  std::optional<double> raw;
  std::optional<double> zscore;
};

// Metric suite per window, z-scored within each family/paramset series.
// Windows with fewer than two present topics are emitted with empty values.
std::vector<SeriesPoint> diversity_timeseries(const topics::TopicModel& model,
                                              const topics::PresenceMatrix& presence,
                                              std::span<const corpus::YearWindow> windows,
                                              const MetricOptions& options = {},
                                              unsigned threads = 1);

struct ConcentrationPoint {
  double fraction = 0.0;
  double share = 0.0;
  std::size_t topics_counted = 0;
};

// Share of all presence counts captured by the top ceil(f * K) of the K
// present topics, for each fraction f.
std::vector<ConcentrationPoint> top_topic_concentration(const topics::PresenceMatrix& presence,
                                                        std::span<const std::size_t> rows,
                                                        std::span<const double> fractions);

struct SampledComparisonRow {
  std::string group;
  std::string family;
  std::string paramset;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t runs = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

// Equal-size comparison: draws `n` articles without replacement from each
// group per run and recomputes the metric suite on each sample. Group draws
// use paired per-run streams, so identical groups produce identical samples.
std::vector<SampledComparisonRow> sampled_group_comparison(
    const topics::TopicModel& model, const topics::PresenceMatrix& presence,
    std::span<const std::size_t> group_a, std::span<const std::size_t> group_b,
    std::string label_a, std::string label_b, std::size_t n, std::size_t runs,
    std::uint64_t seed, const MetricOptions& options = {},
    std::vector<std::string>* warnings = nullptr, unsigned threads = 1);

}  // namespace divscope::diversity
