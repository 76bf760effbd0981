#include "divscope/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "divscope/errors.hpp"
#include "divscope/util/parallel.hpp"
#include "divscope/util/rng.hpp"
#include "divscope/util/stats.hpp"

namespace divscope::diversity {

TopicDistribution topic_distribution(const topics::TopicModel& model,
                                     const topics::PresenceMatrix& presence,
                                     std::span<const std::size_t> rows, DistributionMode mode) {
  if (rows.empty()) throw DataError("cannot build a topic distribution from an empty sub-corpus");
  TopicDistribution dist;
  dist.mode = mode;
  dist.threshold = presence.threshold;
  std::vector<std::uint64_t> counts(model.n_topics(), 0);
  if (mode == DistributionMode::PresenceShare) {
    for (std::size_t r : rows) {
      for (auto t : presence.rows[r]) ++counts[t];
    }
  } else {
    for (std::size_t r : rows) {
      double best = 0.0;
      std::size_t best_t = model.n_topics();
      for (std::size_t t = 0; t < model.n_topics(); ++t) {
        double w = model.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t));
        if (w > best) {  // strict: ties keep the lowest topic index
          best = w;
          best_t = t;
        }
      }
      if (best_t < model.n_topics()) ++counts[best_t];
    }
  }
  std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) {
    throw DataError("no surviving topic occurs in the sub-corpus; distribution undefined");
  }
  for (std::uint32_t t = 0; t < counts.size(); ++t) {
    if (counts[t] > 0) {
      dist.topics.push_back(t);
      dist.p.push_back(static_cast<double>(counts[t]) / static_cast<double>(total));
    }
  }
  return dist;
}

double hhi(std::span<const double> p) {
  double s = 0.0;
  for (double x : p) s += x * x;
  return s;
}

double balance_hhi(const TopicDistribution& dist) { return 1.0 - hhi(dist.p); }

double balance_entropy(const TopicDistribution& dist) {
  double h = 0.0;
  for (double x : dist.p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

std::string_view distance_metric_name(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::Cosine: return "cosine";
    case DistanceMetric::Chebyshev: return "chebyshev";
    case DistanceMetric::Jaccard: return "jaccard";
    case DistanceMetric::Correlation: return "correlation";
  }
  return "unknown";
}

DistanceMatrix topic_distance_matrix(const topics::TopicModel& model,
                                     const topics::PresenceMatrix& presence,
                                     std::span<const std::size_t> rows,
                                     std::span<const std::uint32_t> topic_subset,
                                     DistanceMetric metric, std::vector<std::string>* warnings) {
  if (topic_subset.size() < 1) throw DataError("distance matrix needs at least one topic");
  DistanceMatrix out;
  out.metric = metric;
  out.topics.assign(topic_subset.begin(), topic_subset.end());
  const std::size_t k = topic_subset.size();
  out.d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  auto warn_once = [&, warned = false]() mutable {
    if (warned || !warnings) return;
    warnings->push_back(std::string(distance_metric_name(metric)) +
                        " distance: degenerate topic column, distance set to 1");
    warned = true;
  };

  if (metric == DistanceMetric::Jaccard) {
    // Binary incidence sets from the presence rows.
    std::vector<std::vector<std::uint32_t>> incidence(k);
    std::vector<std::uint32_t> col_of(presence.n_topics, UINT32_MAX);
    for (std::uint32_t j = 0; j < k; ++j) col_of[topic_subset[j]] = j;
    for (std::uint32_t ri = 0; ri < rows.size(); ++ri) {
      for (auto t : presence.rows[rows[ri]]) {
        if (col_of[t] != UINT32_MAX) incidence[col_of[t]].push_back(ri);
      }
    }
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const auto& a = incidence[i];
        const auto& b = incidence[j];
        std::size_t inter = 0, ai = 0, bi = 0;
        while (ai < a.size() && bi < b.size()) {
          if (a[ai] < b[bi]) {
            ++ai;
          } else if (a[ai] > b[bi]) {
            ++bi;
          } else {
            ++inter;
            ++ai;
            ++bi;
          }
        }
        std::size_t uni = a.size() + b.size() - inter;
        double d = uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
        out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
        out.d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
      }
    }
    return out;
  }

  // Continuous weight columns over the sub-corpus rows.
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    for (std::size_t j = 0; j < k; ++j) {
      x(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(j)) =
          model.weights(static_cast<Eigen::Index>(rows[ri]),
                        static_cast<Eigen::Index>(topic_subset[j]));
    }
  }
  if (metric == DistanceMetric::Chebyshev) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        double d = (x.col(static_cast<Eigen::Index>(i)) - x.col(static_cast<Eigen::Index>(j)))
                       .cwiseAbs()
                       .maxCoeff();
        out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
        out.d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
      }
    }
    return out;
  }
  if (metric == DistanceMetric::Correlation) {
    Eigen::VectorXd means = x.colwise().mean();
    x.rowwise() -= means.transpose();
  }
  Eigen::VectorXd norms = x.colwise().norm();
  Eigen::MatrixXd gram = x.transpose() * x;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      auto ii = static_cast<Eigen::Index>(i);
      auto jj = static_cast<Eigen::Index>(j);
      double d;
      if ((x.col(ii).array() == x.col(jj).array()).all()) {
        d = 0.0;  // identical columns, including jointly degenerate ones
      } else if (norms[ii] == 0.0 || norms[jj] == 0.0) {
        warn_once();
        d = 1.0;
      } else {
        double sim = gram(ii, jj) / (norms[ii] * norms[jj]);
        sim = std::clamp(sim, -1.0, 1.0);
        d = 1.0 - sim;
      }
      out.d(ii, jj) = d;
      out.d(jj, ii) = d;
    }
  }
  return out;
}

double weitzman_diversity(const DistanceMatrix& distances, Linkage linkage) {
  const std::size_t n = distances.topics.size();
  if (distances.d.rows() != static_cast<Eigen::Index>(n) ||
      distances.d.cols() != static_cast<Eigen::Index>(n)) {
    throw DataError("distance matrix shape does not match its topic set");
  }
  if (!distances.d.allFinite()) throw NumericError("distance matrix has non-finite entries");
  if (n <= 1) return 0.0;

  Eigen::MatrixXd d = distances.d;
  std::vector<bool> active(n, true);
  std::vector<double> size(n, 1.0);
  double total = 0.0;
  for (std::size_t merge = 0; merge + 1 < n; ++merge) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        double dij = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (dij < best) {
          best = dij;
          bi = i;
          bj = j;
        }
      }
    }
    total += best;
    // Lance-Williams update of cluster bi; bj leaves the active set.
    for (std::size_t t = 0; t < n; ++t) {
      if (!active[t] || t == bi || t == bj) continue;
      auto tt = static_cast<Eigen::Index>(t);
      double dit = d(static_cast<Eigen::Index>(bi), tt);
      double djt = d(static_cast<Eigen::Index>(bj), tt);
      double merged;
      switch (linkage) {
        case Linkage::Single: merged = std::min(dit, djt); break;
        case Linkage::Complete: merged = std::max(dit, djt); break;
        case Linkage::Average:
        default:
          merged = (size[bi] * dit + size[bj] * djt) / (size[bi] + size[bj]);
          break;
      }
      d(static_cast<Eigen::Index>(bi), tt) = merged;
      d(tt, static_cast<Eigen::Index>(bi)) = merged;
    }
    size[bi] += size[bj];
    active[bj] = false;
  }
  return total;
}

double rao_stirling(const TopicDistribution& dist, const DistanceMatrix& distances) {
  if (dist.topics.size() != distances.topics.size() ||
      !std::equal(dist.topics.begin(), dist.topics.end(), distances.topics.begin())) {
    throw DataError("distribution and distance matrix cover different topic sets");
  }
  Eigen::Map<const Eigen::VectorXd> p(dist.p.data(), static_cast<Eigen::Index>(dist.p.size()));
  // Zero diagonal makes the full quadratic form twice the pair sum.
  return 0.5 * p.dot(distances.d * p);
}

const std::vector<FamilyParam>& all_paramsets() {
  static const std::vector<FamilyParam> sets = {
      {"balance", "1"},      {"balance", "2"},      {"balance", "3"},
      {"weitzman", "1"},     {"weitzman", "2"},     {"weitzman", "3"},
      {"rao-stirling", "1"}, {"rao-stirling", "2"}, {"rao-stirling", "3"},
  };
  return sets;
}

std::vector<std::optional<double>> metric_suite(const topics::TopicModel& model,
                                                const topics::PresenceMatrix& presence,
                                                std::span<const std::size_t> rows,
                                                const MetricOptions& options,
                                                std::vector<std::string>* warnings) {
  std::vector<std::optional<double>> out(all_paramsets().size());
  if (rows.empty()) return out;
  TopicDistribution share;
  try {
    share = topic_distribution(model, presence, rows, DistributionMode::PresenceShare);
  } catch (const DataError&) {
    return out;  // nothing present in the window
  }
  if (share.support() < 2) return out;

  auto d_cos = topic_distance_matrix(model, presence, rows, share.topics,
                                     DistanceMetric::Cosine, warnings);
  auto d_cheb = topic_distance_matrix(model, presence, rows, share.topics,
                                      DistanceMetric::Chebyshev, warnings);
  auto d_jac = topic_distance_matrix(model, presence, rows, share.topics,
                                     DistanceMetric::Jaccard, warnings);
  auto d_corr = topic_distance_matrix(model, presence, rows, share.topics,
                                      DistanceMetric::Correlation, warnings);

  out[0] = balance_hhi(share);
  out[2] = balance_entropy(share);
  out[3] = weitzman_diversity(d_cos, options.linkage);
  out[4] = weitzman_diversity(d_cheb, options.linkage);
  out[5] = weitzman_diversity(d_jac, options.linkage);
  out[6] = rao_stirling(share, d_cos);
  out[7] = rao_stirling(share, d_corr);

  try {
    TopicDistribution top = topic_distribution(model, presence, rows, DistributionMode::TopTopic);
    out[1] = balance_hhi(top);
    auto d_cos_top = topic_distance_matrix(model, presence, rows, top.topics,
                                           DistanceMetric::Cosine, warnings);
    out[8] = rao_stirling(top, d_cos_top);
  } catch (const DataError&) {
    // all-zero weight rows only; top-topic variants stay missing
  }
  return out;
}

std::vector<SeriesPoint> diversity_timeseries(const topics::TopicModel& model,
                                              const topics::PresenceMatrix& presence,
                                              std::span<const corpus::YearWindow> windows,
                                              const MetricOptions& options, unsigned threads) {
  const auto& sets = all_paramsets();
  std::vector<std::vector<std::optional<double>>> values(windows.size());
  util::for_each_chunk(windows.size(), 1, threads, [&](const util::ChunkRange& r) {
    for (std::size_t w = r.begin; w < r.end; ++w) {
      std::vector<std::size_t> rows;
      for (std::size_t a = 0; a < model.n_articles(); ++a) {
        if (model.years[a] >= windows[w].first && model.years[a] <= windows[w].last) {
          rows.push_back(a);
        }
      }
      values[w] = metric_suite(model, presence, rows, options, nullptr);
    }
  });

  std::vector<SeriesPoint> points;
  points.reserve(windows.size() * sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::vector<double> raws;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      if (values[w][s]) raws.push_back(*values[w][s]);
    }
    auto z = util::zscore(raws);
    std::size_t zi = 0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      SeriesPoint pt;
      pt.window = windows[w].label();
      pt.family = sets[s].family;
      pt.paramset = sets[s].paramset;
      pt.raw = values[w][s];
      if (pt.raw && z) pt.zscore = (*z)[zi];
      if (pt.raw) ++zi;
      points.push_back(std::move(pt));
    }
  }
  return points;
}

std::vector<ConcentrationPoint> top_topic_concentration(const topics::PresenceMatrix& presence,
                                                        std::span<const std::size_t> rows,
                                                        std::span<const double> fractions) {
  std::vector<std::uint64_t> counts(presence.n_topics, 0);
  for (std::size_t r : rows) {
    for (auto t : presence.rows[r]) ++counts[t];
  }
  std::vector<std::uint32_t> present;
  std::uint64_t total = 0;
  for (std::uint32_t t = 0; t < counts.size(); ++t) {
    if (counts[t] > 0) {
      present.push_back(t);
      total += counts[t];
    }
  }
  std::sort(present.begin(), present.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;
  });
  std::vector<ConcentrationPoint> out;
  for (double f : fractions) {
    ConcentrationPoint pt;
    pt.fraction = f;
    if (!present.empty() && total > 0) {
      std::size_t m = static_cast<std::size_t>(
          std::ceil(f * static_cast<double>(present.size()) - 1e-12));
      m = std::clamp<std::size_t>(m, 1, present.size());
      std::uint64_t covered = 0;
      for (std::size_t i = 0; i < m; ++i) covered += counts[present[i]];
      pt.share = static_cast<double>(covered) / static_cast<double>(total);
      pt.topics_counted = m;
    }
    out.push_back(pt);
  }
  return out;
}

std::vector<SampledComparisonRow> sampled_group_comparison(
    const topics::TopicModel& model, const topics::PresenceMatrix& presence,
    std::span<const std::size_t> group_a, std::span<const std::size_t> group_b,
    std::string label_a, std::string label_b, std::size_t n, std::size_t runs,
    std::uint64_t seed, const MetricOptions& options, std::vector<std::string>* warnings,
    unsigned threads) {
  if (n > group_a.size() && n > group_b.size()) {
    throw DataError("sample size " + std::to_string(n) + " exceeds both group sizes (" +
                    std::to_string(group_a.size()) + ", " + std::to_string(group_b.size()) + ")");
  }
  std::size_t effective_n = std::min({n, group_a.size(), group_b.size()});
  if (effective_n < n && warnings) {
    warnings->push_back("sample size lowered to " + std::to_string(effective_n) +
                        " to fit the smaller group");
  }
  // Sorted copies: the draw depends only on the id set, not its order.
  std::vector<std::size_t> sorted_a(group_a.begin(), group_a.end());
  std::vector<std::size_t> sorted_b(group_b.begin(), group_b.end());
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_b.begin(), sorted_b.end());

  const auto& sets = all_paramsets();
  struct RunValues {
    std::vector<std::optional<double>> a, b;
  };
  std::vector<RunValues> run_values(runs);
  util::for_each_chunk(runs, 1, threads, [&](const util::ChunkRange& r) {
    for (std::size_t run = r.begin; run < r.end; ++run) {
      auto draw = [&](const std::vector<std::size_t>& pool) {
        util::SplitMix64 eng(util::derive_seed(seed, run));
        auto picks = util::sample_without_replacement(eng, pool.size(), effective_n);
        std::vector<std::size_t> rows;
        rows.reserve(picks.size());
        for (auto i : picks) rows.push_back(pool[i]);
        std::sort(rows.begin(), rows.end());
        return rows;
      };
      run_values[run].a = metric_suite(model, presence, draw(sorted_a), options, nullptr);
      run_values[run].b = metric_suite(model, presence, draw(sorted_b), options, nullptr);
    }
  });

  std::vector<SampledComparisonRow> out;
  auto summarize = [&](const std::string& label, bool use_a) {
    for (std::size_t s = 0; s < sets.size(); ++s) {
      std::vector<double> vals;
      for (std::size_t run = 0; run < runs; ++run) {
        const auto& v = use_a ? run_values[run].a : run_values[run].b;
        if (v[s]) vals.push_back(*v[s]);
      }
      SampledComparisonRow row;
      row.group = label;
      row.family = sets[s].family;
      row.paramset = sets[s].paramset;
      row.runs = vals.size();
      row.n = effective_n;
      row.seed = seed;
      if (!vals.empty()) {
        row.mean = util::mean(vals);
        row.sd = vals.size() >= 2 ? util::sample_sd(vals) : 0.0;
      }
      out.push_back(std::move(row));
    }
  };
  summarize(label_a, true);
  summarize(label_b, false);
  return out;
}

}  // namespace divscope::diversity
