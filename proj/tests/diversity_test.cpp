#include "doctest.h"

#include <bit>
#include <cmath>
#include <map>
#include <random>

#include "divscope/diversity.hpp"
#include "divscope/errors.hpp"
#include "divscope/util/stats.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace divscope;
using diversity::DistanceMetric;
using diversity::DistributionMode;

namespace {

diversity::DistanceMatrix wrap_matrix(Eigen::MatrixXd d, DistanceMetric metric) {
  diversity::DistanceMatrix out;
  out.metric = metric;
  out.d = std::move(d);
  for (std::uint32_t i = 0; i < out.d.rows(); ++i) out.topics.push_back(i);
  return out;
}

diversity::TopicDistribution wrap_dist(std::vector<double> p) {
  diversity::TopicDistribution dist;
  for (std::uint32_t i = 0; i < p.size(); ++i) dist.topics.push_back(i);
  dist.p = std::move(p);
  return dist;
}

}  // namespace

TEST_CASE("distributions from presence counts and top topics") {
  auto model = testutil::make_model({{0.5, 0.0, 0.0, 0.0},
                                     {0.0, 0.5, 0.0, 0.0},
                                     {0.0, 0.0, 0.5, 0.0},
                                     {0.0, 0.0, 0.0, 0.5}});
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  auto dist = diversity::topic_distribution(model, presence, rows, DistributionMode::PresenceShare);
  REQUIRE(dist.support() == 4);
  for (double p : dist.p) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));

  auto degenerate = testutil::make_model({{0.9, 0.0}, {0.8, 0.0}, {0.7, 0.0}});
  auto dpres = topics::binarize(degenerate, 0.1);
  auto drows = testutil::all_rows(degenerate);
  auto ddist = diversity::topic_distribution(degenerate, dpres, drows,
                                             DistributionMode::PresenceShare);
  REQUIRE(ddist.support() == 1);
  CHECK(ddist.p[0] == 1.0);
}

TEST_CASE("top-topic mode ties go to the lowest topic index") {
  auto model = testutil::make_model({{0.4, 0.4, 0.1}, {0.1, 0.6, 0.3}});
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  auto dist = diversity::topic_distribution(model, presence, rows, DistributionMode::TopTopic);
  REQUIRE(dist.support() == 2);
  CHECK(dist.topics[0] == 0);  // the tied article lands on topic 0
  CHECK(dist.p[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("distribution of an empty or absent sub-corpus is an error") {
  auto model = testutil::make_model({{0.0, 0.0}});
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  CHECK_THROWS_AS(
      diversity::topic_distribution(model, presence, rows, DistributionMode::PresenceShare),
      DataError);
}

TEST_CASE("distribution matches a counting oracle") {
  std::mt19937_64 eng(73);
  std::vector<std::vector<double>> weights;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> w(8, 0.0);
    for (int t = 0; t < 8; ++t) {
      if (testutil::below(eng, 3) == 0) w[t] = 0.15 + 0.8 * testutil::unit(eng);
    }
    weights.push_back(std::move(w));
  }
  auto model = testutil::make_model(weights);
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  auto dist = diversity::topic_distribution(model, presence, rows, DistributionMode::PresenceShare);
  std::vector<std::uint64_t> counts(8, 0);
  std::uint64_t total = 0;
  for (const auto& w : weights) {
    for (int t = 0; t < 8; ++t) {
      if (w[t] > 0.1) {
        ++counts[t];
        ++total;
      }
    }
  }
  for (std::size_t i = 0; i < dist.topics.size(); ++i) {
    CHECK(dist.p[i] == doctest::Approx(static_cast<double>(counts[dist.topics[i]]) /
                                       static_cast<double>(total))
                           .epsilon(1e-12));
  }
}

TEST_CASE("balance metrics on closed forms") {
  auto uniform10 = wrap_dist(std::vector<double>(10, 0.1));
  CHECK(diversity::hhi(uniform10.p) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(diversity::balance_hhi(uniform10) == doctest::Approx(0.9).epsilon(1e-12));

  auto degenerate = wrap_dist({1.0});
  CHECK(diversity::balance_hhi(degenerate) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(diversity::balance_entropy(degenerate) == doctest::Approx(0.0).epsilon(1e-12));

  auto mixed = wrap_dist({0.5, 0.3, 0.2});
  CHECK(diversity::hhi(mixed.p) == doctest::Approx(0.38).epsilon(1e-12));
  CHECK(diversity::balance_hhi(mixed) == doctest::Approx(0.62).epsilon(1e-12));

  auto uniform8 = wrap_dist(std::vector<double>(8, 0.125));
  CHECK(diversity::balance_entropy(uniform8) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  auto coin = wrap_dist({0.5, 0.5});
  CHECK(diversity::balance_entropy(coin) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("identical topic columns are at distance zero under every metric") {
  auto model = testutil::make_model({{0.3, 0.3, 0.6}, {0.2, 0.2, 0.0}, {0.5, 0.5, 0.1}});
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  std::vector<std::uint32_t> all = {0, 1, 2};
  for (auto metric : {DistanceMetric::Cosine, DistanceMetric::Chebyshev, DistanceMetric::Jaccard,
                      DistanceMetric::Correlation}) {
    auto d = diversity::topic_distance_matrix(model, presence, rows, all, metric);
    CHECK(d.d(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.d(0, 0) == 0.0);
  }
}

TEST_CASE("disjoint incidence sets have jaccard distance one") {
  auto model = testutil::make_model({{0.5, 0.0}, {0.0, 0.5}});
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  std::vector<std::uint32_t> all = {0, 1};
  auto d = diversity::topic_distance_matrix(model, presence, rows, all, DistanceMetric::Jaccard);
  CHECK(d.d(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero columns give distance one with a warning") {
  auto model = testutil::make_model({{0.5, 0.0}, {0.6, 0.0}});
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  std::vector<std::uint32_t> all = {0, 1};
  std::vector<std::string> warnings;
  auto d = diversity::topic_distance_matrix(model, presence, rows, all, DistanceMetric::Cosine,
                                            &warnings);
  CHECK(d.d(0, 1) == 1.0);
  CHECK(!warnings.empty());
}

TEST_CASE("distance matrices match longhand pairwise computation") {
  std::mt19937_64 eng(79);
  const std::size_t n = 24, k = 6;
  std::vector<std::vector<double>> weights;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(k, 0.0);
    for (std::size_t t = 0; t < k; ++t) {
      if (testutil::below(eng, 2) == 0) w[t] = 0.12 + 0.8 * testutil::unit(eng);
    }
    weights.push_back(std::move(w));
  }
  auto model = testutil::make_model(weights);
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  std::vector<std::uint32_t> all;
  for (std::uint32_t t = 0; t < k; ++t) all.push_back(t);

  auto cos = diversity::topic_distance_matrix(model, presence, rows, all, DistanceMetric::Cosine);
  auto che = diversity::topic_distance_matrix(model, presence, rows, all,
                                              DistanceMetric::Chebyshev);
  auto jac = diversity::topic_distance_matrix(model, presence, rows, all, DistanceMetric::Jaccard);
  auto cor = diversity::topic_distance_matrix(model, presence, rows, all,
                                              DistanceMetric::Correlation);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double dot = 0.0, na = 0.0, nb = 0.0, cheb = 0.0;
      double ma = 0.0, mb = 0.0;
      std::size_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double x = weights[i][a], y = weights[i][b];
        dot += x * y;
        na += x * x;
        nb += y * y;
        cheb = std::max(cheb, std::fabs(x - y));
        ma += x / n;
        mb += y / n;
        bool pa = x > 0.1, pb = y > 0.1;
        inter += pa && pb;
        uni += pa || pb;
      }
      double cdot = 0.0, cna = 0.0, cnb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double x = weights[i][a] - ma, y = weights[i][b] - mb;
        cdot += x * y;
        cna += x * x;
        cnb += y * y;
      }
      auto ia = static_cast<Eigen::Index>(a);
      auto ib = static_cast<Eigen::Index>(b);
      CHECK(cos.d(ia, ib) ==
            doctest::Approx(1.0 - dot / std::sqrt(na * nb)).epsilon(1e-12));
      CHECK(che.d(ia, ib) == doctest::Approx(cheb).epsilon(1e-12));
      CHECK(jac.d(ia, ib) ==
            doctest::Approx(1.0 - static_cast<double>(inter) / static_cast<double>(uni))
                .epsilon(1e-12));
      CHECK(cor.d(ia, ib) ==
            doctest::Approx(1.0 - cdot / std::sqrt(cna * cnb)).epsilon(1e-12));
    }
  }
}

TEST_CASE("two classes merge at their distance") {
  Eigen::MatrixXd d(2, 2);
  d << 0.0, 0.7, 0.7, 0.0;
  CHECK(diversity::weitzman_diversity(wrap_matrix(d, DistanceMetric::Cosine)) ==
        doctest::Approx(0.7).epsilon(1e-12));
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
  CHECK(diversity::weitzman_diversity(wrap_matrix(z, DistanceMetric::Cosine)) == 0.0);
  Eigen::MatrixXd one(1, 1);
  one << 0.0;
  CHECK(diversity::weitzman_diversity(wrap_matrix(one, DistanceMetric::Cosine)) == 0.0);
}

TEST_CASE("non-finite distances are rejected") {
  Eigen::MatrixXd d(2, 2);
  d << 0.0, std::numeric_limits<double>::quiet_NaN(), 1.0, 0.0;
  CHECK_THROWS_AS(diversity::weitzman_diversity(wrap_matrix(d, DistanceMetric::Cosine)),
                  NumericError);
}

TEST_CASE("dendrogram sum equals the subset recursion on random ultrametrics") {
  std::mt19937_64 eng(83);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 2 + testutil::below(eng, 11);  // up to 12 classes
    auto d = oracles::random_ultrametric(eng, n);
    double exact = oracles::subset_recursion_value(d);
    for (auto linkage :
         {diversity::Linkage::Single, diversity::Linkage::Complete, diversity::Linkage::Average}) {
      double dendro = diversity::weitzman_diversity(wrap_matrix(d, DistanceMetric::Cosine),
                                                    linkage);
      CHECK(dendro == doctest::Approx(exact).epsilon(1e-9));
    }
  }
}

TEST_CASE("rao-stirling closed forms and errors") {
  auto degenerate = wrap_dist({1.0});
  Eigen::MatrixXd one(1, 1);
  one << 0.0;
  CHECK(diversity::rao_stirling(degenerate, wrap_matrix(one, DistanceMetric::Cosine)) == 0.0);

  auto coin = wrap_dist({0.5, 0.5});
  Eigen::MatrixXd d(2, 2);
  d << 0.0, 1.0, 1.0, 0.0;
  CHECK(diversity::rao_stirling(coin, wrap_matrix(d, DistanceMetric::Cosine)) ==
        doctest::Approx(0.25).epsilon(1e-12));

  Eigen::MatrixXd wrong = Eigen::MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(diversity::rao_stirling(coin, wrap_matrix(wrong, DistanceMetric::Cosine)),
                  DataError);
}

TEST_CASE("rao-stirling equals the explicit double loop on random instances") {
  std::mt19937_64 eng(89);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t k = 2 + testutil::below(eng, 49);
    std::vector<double> p(k);
    double total = 0.0;
    for (auto& x : p) {
      x = testutil::unit(eng) + 1e-3;
      total += x;
    }
    for (auto& x : p) x /= total;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                              static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        double v = testutil::unit(eng) * 2.0;
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    }
    double direct = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        direct += p[i] * p[j] * d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    double value =
        diversity::rao_stirling(wrap_dist(p), wrap_matrix(d, DistanceMetric::Cosine));
    CHECK(value == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("metric bounds and structural invariances") {
  std::mt19937_64 eng(97);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t k = 2 + testutil::below(eng, 12);
    std::vector<double> p(k);
    double total = 0.0;
    for (auto& x : p) {
      x = testutil::unit(eng) + 1e-3;
      total += x;
    }
    for (auto& x : p) x /= total;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                              static_cast<Eigen::Index>(k));
    double dmax = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        double v = testutil::unit(eng);
        dmax = std::max(dmax, v);
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    }
    auto dist = wrap_dist(p);
    auto dm = wrap_matrix(d, DistanceMetric::Cosine);
    double one_minus_hhi = diversity::balance_hhi(dist);
    CHECK(one_minus_hhi >= 0.0);
    CHECK(one_minus_hhi < 1.0);
    double entropy = diversity::balance_entropy(dist);
    CHECK(entropy >= 0.0);
    CHECK(entropy <= std::log(static_cast<double>(k)) + 1e-12);
    double rao = diversity::rao_stirling(dist, dm);
    CHECK(rao >= 0.0);
    CHECK(rao <= one_minus_hhi * dmax / 2.0 + 1e-12);

    // Permuting topic indices changes nothing.
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), eng);
    std::vector<double> pp(k);
    Eigen::MatrixXd dd(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      pp[i] = p[perm[i]];
      for (std::size_t j = 0; j < k; ++j) {
        dd(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            d(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j]));
      }
    }
    auto pdist = wrap_dist(pp);
    auto pdm = wrap_matrix(dd, DistanceMetric::Cosine);
    CHECK(diversity::balance_hhi(pdist) == doctest::Approx(one_minus_hhi).epsilon(1e-12));
    CHECK(diversity::rao_stirling(pdist, pdm) == doctest::Approx(rao).epsilon(1e-12));
    CHECK(diversity::weitzman_diversity(pdm) ==
          doctest::Approx(diversity::weitzman_diversity(dm)).epsilon(1e-9));
  }
}

TEST_CASE("splitting a class across a zero-distance twin changes nothing") {
  std::mt19937_64 eng(101);
  const std::size_t k = 6;
  std::vector<double> p(k);
  double total = 0.0;
  for (auto& x : p) {
    x = testutil::unit(eng) + 0.05;
    total += x;
  }
  for (auto& x : p) x /= total;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      double v = 0.2 + testutil::unit(eng);
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  // Duplicate class 0 at distance zero and split its share.
  std::vector<double> p2 = p;
  p2[0] /= 2.0;
  p2.push_back(p2[0]);
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(k + 1, k + 1);
  d2.topLeftCorner(k, k) = d;
  for (std::size_t j = 0; j < k; ++j) {
    d2(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = d(0, static_cast<Eigen::Index>(j));
    d2(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = d(0, static_cast<Eigen::Index>(j));
  }
  double rao_before = diversity::rao_stirling(wrap_dist(p), wrap_matrix(d, DistanceMetric::Cosine));
  double rao_after =
      diversity::rao_stirling(wrap_dist(p2), wrap_matrix(d2, DistanceMetric::Cosine));
  CHECK(rao_after == doctest::Approx(rao_before).epsilon(1e-12));

  // Min/max linkage ignores cluster sizes, so the zero-height twin merge
  // leaves every later height untouched. Size-weighted (average) linkage
  // keeps the property on ultrametric inputs, covered below.
  for (auto linkage : {diversity::Linkage::Single, diversity::Linkage::Complete}) {
    double before = diversity::weitzman_diversity(wrap_matrix(d, DistanceMetric::Cosine), linkage);
    double after = diversity::weitzman_diversity(wrap_matrix(d2, DistanceMetric::Cosine), linkage);
    CHECK(after == doctest::Approx(before).epsilon(1e-9));
  }
}

TEST_CASE("zero-distance twins on ultrametric inputs under average linkage") {
  std::mt19937_64 eng(137);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t n = 3 + testutil::below(eng, 8);
    auto d = oracles::random_ultrametric(eng, n);
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n + 1),
                                               static_cast<Eigen::Index>(n + 1));
    d2.topLeftCorner(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = d;
    for (std::size_t j = 0; j < n; ++j) {
      d2(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) =
          d(0, static_cast<Eigen::Index>(j));
      d2(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) =
          d(0, static_cast<Eigen::Index>(j));
    }
    double before = diversity::weitzman_diversity(wrap_matrix(d, DistanceMetric::Cosine));
    double after = diversity::weitzman_diversity(wrap_matrix(d2, DistanceMetric::Cosine));
    CHECK(after == doctest::Approx(before).epsilon(1e-9));
  }
}

TEST_CASE("time series marks missing windows and z-scores the rest") {
  std::vector<std::vector<double>> weights;
  std::vector<int> years;
  std::mt19937_64 eng(103);
  for (int y = 2015; y <= 2018; ++y) {
    for (int i = 0; i < 30; ++i) {
      std::vector<double> w(5, 0.0);
      w[testutil::below(eng, 5)] = 0.5;
      w[testutil::below(eng, 5)] = 0.4;
      weights.push_back(std::move(w));
      years.push_back(y);
    }
  }
  auto model = testutil::make_model(weights, years);
  auto presence = topics::binarize(model, 0.1);
  std::vector<corpus::YearWindow> windows = {{2014, 2014}, {2015, 2015}, {2016, 2016},
                                             {2017, 2017}, {2018, 2018}};
  auto series = diversity::diversity_timeseries(model, presence, windows);
  CHECK(series.size() == windows.size() * diversity::all_paramsets().size());
  std::size_t missing = 0;
  std::map<std::pair<std::string, std::string>, std::vector<double>> zs;
  for (const auto& pt : series) {
    if (!pt.raw) {
      ++missing;
      CHECK(pt.window == "2014");
      continue;
    }
    if (pt.zscore) zs[{pt.family, pt.paramset}].push_back(*pt.zscore);
  }
  CHECK(missing == diversity::all_paramsets().size());
  for (const auto& [key, values] : zs) {
    REQUIRE(values.size() == 4);
    CHECK(util::mean(values) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(util::population_sd(values) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("single-window series keeps the raw value without a z-score") {
  auto model = testutil::make_model({{0.5, 0.3}, {0.2, 0.6}});
  auto presence = topics::binarize(model, 0.1);
  std::vector<corpus::YearWindow> windows = {{2019, 2019}};
  auto series = diversity::diversity_timeseries(model, presence, windows);
  for (const auto& pt : series) {
    CHECK(pt.raw);
    CHECK_FALSE(pt.zscore);
  }
}

TEST_CASE("stationary corpora show no z trend") {
  std::mt19937_64 eng(107);
  std::vector<std::vector<double>> weights;
  std::vector<int> years;
  for (int y = 2010; y <= 2019; ++y) {
    for (int i = 0; i < 120; ++i) {
      std::vector<double> w(12, 0.0);
      for (int hits = 0; hits < 3; ++hits) w[testutil::below(eng, 12)] = 0.2 + 0.5 * testutil::unit(eng);
      weights.push_back(std::move(w));
      years.push_back(y);
    }
  }
  auto model = testutil::make_model(weights, years);
  auto presence = topics::binarize(model, 0.1);
  std::vector<corpus::YearWindow> windows;
  for (int y = 2010; y <= 2019; ++y) windows.push_back({y, y});
  auto series = diversity::diversity_timeseries(model, presence, windows);
  std::map<std::pair<std::string, std::string>, std::vector<double>> zs;
  for (const auto& pt : series) {
    if (pt.zscore) zs[{pt.family, pt.paramset}].push_back(*pt.zscore);
  }
  for (const auto& [key, values] : zs) {
    auto fit = util::linear_trend(values);
    // 95% band around zero slope.
    CHECK(std::fabs(fit.slope) <= 2.31 * fit.slope_se);
  }
}

TEST_CASE("an injected topic collapse strictly lowers balance diversity") {
  std::mt19937_64 eng(109);
  std::vector<std::vector<double>> weights;
  std::vector<int> years;
  for (int y = 2012; y <= 2019; ++y) {
    bool collapsed = y >= 2016;
    for (int i = 0; i < 100; ++i) {
      std::vector<double> w(20, 0.0);
      if (collapsed) {
        w[testutil::below(eng, 2)] = 0.6;  // everything lands on two topics
      } else {
        for (int hits = 0; hits < 3; ++hits) w[testutil::below(eng, 20)] = 0.5;
      }
      weights.push_back(std::move(w));
      years.push_back(y);
    }
  }
  auto model = testutil::make_model(weights, years);
  auto presence = topics::binarize(model, 0.1);
  std::vector<corpus::YearWindow> windows;
  for (int y = 2012; y <= 2019; ++y) windows.push_back({y, y});
  auto series = diversity::diversity_timeseries(model, presence, windows);
  std::vector<double> before, after;
  for (const auto& pt : series) {
    if (pt.family != "balance" || pt.paramset != "1" || !pt.raw) continue;
    (std::stoi(pt.window) < 2016 ? before : after).push_back(*pt.raw);
  }
  REQUIRE(!before.empty());
  REQUIRE(!after.empty());
  for (double b : before) {
    for (double a : after) CHECK(a < b);
  }
}

TEST_CASE("concentration shares follow the rank distribution") {
  // Uniform usage: the top f share of topics carries about f of the mass.
  std::vector<std::vector<double>> weights;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> w(20, 0.0);
    w[i % 20] = 0.5;
    weights.push_back(std::move(w));
  }
  auto model = testutil::make_model(weights);
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  std::vector<double> fractions = {0.05, 0.25, 0.5, 1.0};
  auto points = diversity::top_topic_concentration(presence, rows, fractions);
  REQUIRE(points.size() == 4);
  for (const auto& pt : points) {
    CHECK(pt.share == doctest::Approx(static_cast<double>(pt.topics_counted) / 20.0)
                          .epsilon(1e-12));
  }
  CHECK(points[3].share == doctest::Approx(1.0).epsilon(1e-12));

  // A dominant topic swallows the whole top-1 share.
  std::vector<std::vector<double>> dom;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> w(10, 0.0);
    w[0] = 0.5;
    if (i < 3) w[1 + i % 9] = 0.3;
    dom.push_back(std::move(w));
  }
  auto dmodel = testutil::make_model(dom);
  auto dpresence = topics::binarize(dmodel, 0.1);
  auto drows = testutil::all_rows(dmodel);
  std::vector<double> quarter = {0.25};
  auto dpoints = diversity::top_topic_concentration(dpresence, drows, quarter);
  CHECK(dpoints[0].share > 0.9);
}

TEST_CASE("concentration matches a sort-and-sum oracle") {
  std::mt19937_64 eng(113);
  std::vector<std::vector<double>> weights;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> w(15, 0.0);
    for (int hits = 0; hits < 2; ++hits) w[testutil::below(eng, 15)] = 0.4;
    weights.push_back(std::move(w));
  }
  auto model = testutil::make_model(weights);
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  std::vector<double> fractions = {0.1, 0.33, 0.66};
  auto points = diversity::top_topic_concentration(presence, rows, fractions);

  std::vector<std::uint64_t> counts(15, 0);
  std::uint64_t total = 0;
  for (const auto& w : weights) {
    for (int t = 0; t < 15; ++t) {
      if (w[t] > 0.1) {
        ++counts[t];
        ++total;
      }
    }
  }
  std::vector<std::uint64_t> present_counts;
  for (auto c : counts) {
    if (c > 0) present_counts.push_back(c);
  }
  std::sort(present_counts.rbegin(), present_counts.rend());
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    std::size_t m = static_cast<std::size_t>(
        std::ceil(fractions[i] * static_cast<double>(present_counts.size()) - 1e-12));
    m = std::clamp<std::size_t>(m, 1, present_counts.size());
    std::uint64_t covered = 0;
    for (std::size_t r = 0; r < m; ++r) covered += present_counts[r];
    CHECK(points[i].share ==
          doctest::Approx(static_cast<double>(covered) / static_cast<double>(total))
              .epsilon(1e-12));
  }
}

TEST_CASE("sampling identical groups under paired seeds gives identical means") {
  std::mt19937_64 eng(127);
  std::vector<std::vector<double>> weights;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> w(10, 0.0);
    for (int hits = 0; hits < 2; ++hits) w[testutil::below(eng, 10)] = 0.4;
    weights.push_back(std::move(w));
  }
  auto model = testutil::make_model(weights);
  auto presence = topics::binarize(model, 0.1);
  auto rows = testutil::all_rows(model);
  auto out = diversity::sampled_group_comparison(model, presence, rows, rows, "A", "B", 100, 10,
                                                 777);
  std::map<std::pair<std::string, std::string>, double> means_a, means_b;
  for (const auto& r : out) {
    (r.group == "A" ? means_a : means_b)[{r.family, r.paramset}] = r.mean;
  }
  REQUIRE(means_a.size() == means_b.size());
  for (const auto& [key, mean] : means_a) CHECK(mean == means_b.at(key));

  // Same seed, bit-identical output.
  auto again = diversity::sampled_group_comparison(model, presence, rows, rows, "A", "B", 100,
                                                   10, 777);
  REQUIRE(again.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].mean == again[i].mean);
    CHECK(out[i].sd == again[i].sd);
  }
}

TEST_CASE("a concentrated subgroup scores below its complement on balance") {
  std::mt19937_64 eng(131);
  std::vector<std::vector<double>> weights;
  std::vector<std::size_t> diverse_rows, narrow_rows;
  for (int i = 0; i < 400; ++i) {
    std::vector<double> w(12, 0.0);
    if (i < 200) {
      for (int hits = 0; hits < 2; ++hits) w[testutil::below(eng, 12)] = 0.4;
      diverse_rows.push_back(static_cast<std::size_t>(i));
    } else {
      w[testutil::below(eng, 2)] = 0.5;  // concentrated on two topics
      narrow_rows.push_back(static_cast<std::size_t>(i));
    }
    weights.push_back(std::move(w));
  }
  auto model = testutil::make_model(weights);
  auto presence = topics::binarize(model, 0.1);
  auto out = diversity::sampled_group_comparison(model, presence, diverse_rows, narrow_rows,
                                                 "diverse", "narrow", 120, 8, 5151);
  std::map<std::pair<std::string, std::string>, double> means_a, means_b;
  for (const auto& r : out) {
    (r.group == "diverse" ? means_a : means_b)[{r.family, r.paramset}] = r.mean;
  }
  for (const auto& set : diversity::all_paramsets()) {
    if (set.family != "balance") continue;
    CHECK(means_b.at({set.family, set.paramset}) < means_a.at({set.family, set.paramset}));
  }
}

TEST_CASE("sample size errors and adjustments") {
  auto model = testutil::make_model({{0.5, 0.2}, {0.3, 0.5}, {0.2, 0.4}, {0.6, 0.0}});
  auto presence = topics::binarize(model, 0.1);
  std::vector<std::size_t> a = {0, 1, 2, 3};
  std::vector<std::size_t> b = {0, 1};
  CHECK_THROWS_AS(diversity::sampled_group_comparison(model, presence, b, b, "A", "B", 3, 2, 1),
                  DataError);
  std::vector<std::string> warnings;
  auto out = diversity::sampled_group_comparison(model, presence, a, b, "A", "B", 3, 2, 1, {},
                                                 &warnings);
  CHECK(!out.empty());
  CHECK(out[0].n == 2);  // lowered to the smaller group
  CHECK(!warnings.empty());
}
