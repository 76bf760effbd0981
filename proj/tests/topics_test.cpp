#include "doctest.h"

#include <random>
#include <map>
#include <set>

#include "divscope/errors.hpp"
#include "divscope/topics.hpp"
#include "test_util.hpp"

using namespace divscope;
using testutil::ArticleSpec;

namespace {

struct Fixture {
  corpus::Corpus corpus;
  std::filesystem::path doc_topic;
  std::filesystem::path topic_words;
};

Fixture write_model(const std::filesystem::path& dir,
                    const std::vector<ArticleSpec>& articles,
                    const std::vector<std::vector<double>>& weights,
                    std::size_t words_per_topic = 3) {
  Fixture f;
  f.corpus = testutil::make_corpus(articles);
  std::size_t k = weights.empty() ? 0 : weights[0].size();
  std::ostringstream csv;
  csv << "article_id";
  for (std::size_t t = 0; t < k; ++t) csv << ",topic_" << t;
  csv << "\n";
  for (std::size_t r = 0; r < weights.size(); ++r) {
    csv << articles[r].id;
    for (std::size_t t = 0; t < k; ++t) csv << ',' << weights[r][t];
    csv << "\n";
  }
  f.doc_topic = dir / "doc_topic.csv";
  util::write_text(f.doc_topic, csv.str());
  std::ostringstream words;
  for (std::size_t t = 0; t < k; ++t) {
    words << "{\"topic_id\":\"topic_" << t << "\",\"words\":[";
    for (std::size_t w = 0; w < words_per_topic; ++w) {
      words << (w ? "," : "") << "\"w" << t << "_" << w << "\"";
    }
    words << "]}\n";
  }
  f.topic_words = dir / "topic_words.jsonl";
  util::write_text(f.topic_words, words.str());
  return f;
}

}  // namespace

TEST_CASE("loads an aligned doc-topic fixture") {
  auto dir = testutil::scratch_dir("topics_load");
  auto f = write_model(dir,
                       {{"a1"}, {"a2"}, {"a3"}},
                       {{0.1, 0.2, 0.0, 0.7}, {0.4, 0.0, 0.3, 0.3}, {0.0, 0.9, 0.1, 0.0}});
  topics::ModelDiagnostics diag;
  auto model = topics::load_topic_model(f.doc_topic, f.topic_words, f.corpus, &diag);
  CHECK(model.n_topics() == 4);
  CHECK(model.n_articles() == 3);
  CHECK(diag.unknown_articles.empty());
  CHECK(diag.missing_articles.empty());
}

TEST_CASE("out-of-range probabilities report their coordinates") {
  auto dir = testutil::scratch_dir("topics_range");
  auto f = write_model(dir, {{"a1"}}, {{0.1, 1.2}});
  CHECK_THROWS_WITH_AS(topics::load_topic_model(f.doc_topic, f.topic_words, f.corpus),
                       doctest::Contains("topic_1"), DataError);
}

TEST_CASE("unknown article ids are dropped into the diagnostics") {
  auto dir = testutil::scratch_dir("topics_unknown");
  auto f = write_model(dir, {{"a1"}, {"a2"}}, {{0.5, 0.5}, {0.2, 0.8}});
  // Add a stray row for an id outside the corpus.
  auto text = util::read_text(f.doc_topic);
  util::write_text(f.doc_topic, text + "ghost,0.3,0.3\n");
  topics::ModelDiagnostics diag;
  auto model = topics::load_topic_model(f.doc_topic, f.topic_words, f.corpus, &diag);
  CHECK(model.n_articles() == 2);
  REQUIRE(diag.unknown_articles.size() == 1);
  CHECK(diag.unknown_articles[0] == "ghost");
}

TEST_CASE("prevalence filter removes topics present in too many articles") {
  auto dir = testutil::scratch_dir("topics_prevalent");
  std::vector<ArticleSpec> articles;
  std::vector<std::vector<double>> weights;
  for (int i = 0; i < 100; ++i) {
    ArticleSpec a;
    a.id = "a" + std::to_string(100 + i);
    articles.push_back(a);
    // topic_0 present in 11 articles, topic_1 in 5.
    weights.push_back({i < 11 ? 0.5 : 0.0, i < 5 ? 0.5 : 0.0, 0.3});
  }
  auto f = write_model(dir, articles, weights);
  auto model = topics::load_topic_model(f.doc_topic, f.topic_words, f.corpus);
  auto outcome = topics::filter_topics(model, 0.10, 3, 0.1);
  CHECK(outcome.removed_prevalent == std::vector<std::string>{"topic_0", "topic_2"});
  CHECK(outcome.model.n_topics() == 1);
}

TEST_CASE("topics with short word lists are removed") {
  auto dir = testutil::scratch_dir("topics_words");
  auto f = write_model(dir, {{"a1"}, {"a2"}}, {{0.5, 0.2}, {0.0, 0.6}}, 2);
  auto model = topics::load_topic_model(f.doc_topic, f.topic_words, f.corpus);
  CHECK_THROWS_AS(topics::filter_topics(model, 1.0, 3, 0.1), DataError);  // all removed
  auto outcome = topics::filter_topics(model, 1.0, 2, 0.1);
  CHECK(outcome.model.n_topics() == 2);
}

TEST_CASE("renormalization rescales surviving rows") {
  auto model = testutil::make_model({{0.4, 0.4, 0.2}, {0.1, 0.6, 0.3}});
  model.topic_words[2] = {"only"};  // forces removal at min_words 2
  auto outcome = topics::filter_topics(model, 1.0, 2, 0.1, true);
  REQUIRE(outcome.model.n_topics() == 2);
  for (Eigen::Index r = 0; r < outcome.model.weights.rows(); ++r) {
    CHECK(outcome.model.weights.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("binarization is strict") {
  auto model = testutil::make_model({{0.1, 0.11, 0.0}});
  auto presence = topics::binarize(model, 0.1);
  CHECK_FALSE(presence.present(0, 0));  // exactly at the threshold
  CHECK(presence.present(0, 1));
  CHECK_FALSE(presence.present(0, 2));

  auto at_zero = topics::binarize(model, 0.0);
  CHECK(at_zero.present(0, 0));
  CHECK(at_zero.present(0, 1));
  CHECK_FALSE(at_zero.present(0, 2));  // p == 0 is not > 0

  CHECK_THROWS_AS(topics::binarize(model, 1.0), ConfigError);
}

TEST_CASE("category salience quotient arithmetic") {
  // Topic 0: present in half the cs.A articles and a quarter overall.
  std::vector<ArticleSpec> articles;
  std::vector<std::vector<double>> weights;
  for (int i = 0; i < 8; ++i) {
    ArticleSpec a;
    a.id = "a" + std::to_string(i);
    a.categories = {i < 4 ? "cs.A" : "cs.B"};
    articles.push_back(a);
    weights.push_back({(i == 0 || i == 1) ? 0.5 : 0.0, 0.5});
  }
  auto dir = testutil::scratch_dir("topics_salience");
  auto f = write_model(dir, articles, weights);
  auto model = topics::load_topic_model(f.doc_topic, f.topic_words, f.corpus);
  auto presence = topics::binarize(model, 0.1);
  auto result = topics::topic_category_salience(model, presence, f.corpus);
  REQUIRE(result.categories == std::vector<std::string>{"cs.A", "cs.B"});
  // s_{0,cs.A} = 2/4, s_0 = 2/8 -> Q = 2.
  CHECK(result.quotient(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(result.quotient(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  // Topic 1 is uniform: Q = 1 in both categories.
  CHECK(result.quotient(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(result.quotient(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("salience matches a direct-count oracle on a random fixture") {
  std::mt19937_64 eng(61);
  const std::size_t n = 60, k = 20;
  const char* cats[] = {"c.A", "c.B", "c.C", "c.D", "c.E"};
  std::vector<ArticleSpec> articles;
  std::vector<std::vector<double>> weights;
  for (std::size_t i = 0; i < n; ++i) {
    ArticleSpec a;
    char buf[8];
    std::snprintf(buf, sizeof(buf), "a%03zu", i);
    a.id = buf;
    a.categories = {cats[testutil::below(eng, 5)]};
    if (testutil::below(eng, 3) == 0) a.categories.push_back(cats[testutil::below(eng, 5)]);
    std::sort(a.categories.begin(), a.categories.end());
    a.categories.erase(std::unique(a.categories.begin(), a.categories.end()),
                       a.categories.end());
    articles.push_back(a);
    std::vector<double> w(k, 0.0);
    for (std::size_t t = 0; t < k; ++t) {
      if (testutil::below(eng, 4) == 0) w[t] = 0.2 + 0.7 * testutil::unit(eng);
    }
    weights.push_back(std::move(w));
  }
  auto dir = testutil::scratch_dir("topics_salience_oracle");
  auto f = write_model(dir, articles, weights);
  auto model = topics::load_topic_model(f.doc_topic, f.topic_words, f.corpus);
  auto presence = topics::binarize(model, 0.1);
  auto result = topics::topic_category_salience(model, presence, f.corpus);
  auto assignment = topics::assign_topic_category(result);

  for (std::size_t t = 0; t < k; ++t) {
    std::size_t overall = 0;
    for (std::size_t a = 0; a < model.n_articles(); ++a) overall += presence.present(a, t);
    if (overall == 0) {
      CHECK_FALSE(result.defined[t]);
      CHECK(assignment[t].empty());
      continue;
    }
    double s_overall = static_cast<double>(overall) / static_cast<double>(n);
    double best_q = -1.0;
    std::string best_cat;
    for (std::size_t c = 0; c < result.categories.size(); ++c) {
      std::size_t cat_n = 0, cat_hits = 0;
      for (std::size_t a = 0; a < model.n_articles(); ++a) {
        const auto* art = f.corpus.find(model.article_ids[a]);
        if (!art->has_category(result.categories[c])) continue;
        ++cat_n;
        cat_hits += presence.present(a, t);
      }
      if (cat_n == 0) continue;
      double q = (static_cast<double>(cat_hits) / static_cast<double>(cat_n)) / s_overall;
      CHECK(result.quotient(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) ==
            doctest::Approx(q).epsilon(1e-12));
      if (q > best_q) {
        best_q = q;
        best_cat = result.categories[c];
      }
    }
    CHECK(assignment[t] == best_cat);
  }
}

TEST_CASE("assignment breaks exact ties lexicographically") {
  topics::SalienceResult r;
  r.categories = {"cs.CL", "cs.CV"};
  r.quotient.resize(2, 2);
  r.quotient << 2.0, 1.1,   // clear winner: cs.CL
                1.5, 1.5;   // tie -> lexicographically first
  r.defined = {true, true};
  auto assignment = topics::assign_topic_category(r);
  CHECK(assignment[0] == "cs.CL");
  CHECK(assignment[1] == "cs.CL");
}

TEST_CASE("category share series sums to one per year") {
  std::vector<int> years = {2018, 2018, 2019, 2019, 2019};
  auto model = testutil::make_model(
      {{0.5, 0.0}, {0.5, 0.5}, {0.0, 0.5}, {0.5, 0.0}, {0.5, 0.5}}, years);
  auto presence = topics::binarize(model, 0.1);
  std::vector<std::string> assignment = {"cs.A", "cs.B"};
  auto rows = topics::category_share_series(model, presence, assignment);
  std::map<int, double> totals;
  for (const auto& r : rows) totals[r.year] += r.share;
  for (const auto& [year, total] : totals) {
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  // 2018: topic0 twice, topic1 once.
  for (const auto& r : rows) {
    if (r.year == 2018 && r.category == "cs.A") {
      CHECK(r.share == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("single-category fixtures give share one; empty years are omitted") {
  auto model = testutil::make_model({{0.5}, {0.4}}, {2018, 2018});
  auto presence = topics::binarize(model, 0.1);
  std::vector<std::string> assignment = {"cs.A"};
  auto rows = topics::category_share_series(model, presence, assignment);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].share == 1.0);

  auto sparse_model = testutil::make_model({{0.5}, {0.0}}, {2018, 2019});
  auto sparse_presence = topics::binarize(sparse_model, 0.1);
  auto sparse_rows = topics::category_share_series(sparse_model, sparse_presence, assignment);
  REQUIRE(sparse_rows.size() == 1);  // 2019 has no presences
  CHECK(sparse_rows[0].year == 2018);
}

TEST_CASE("share series matches an exhaustive count oracle") {
  std::mt19937_64 eng(67);
  const std::size_t n = 80, k = 10;
  std::vector<std::vector<double>> weights;
  std::vector<int> years;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(k, 0.0);
    for (std::size_t t = 0; t < k; ++t) {
      if (testutil::below(eng, 3) == 0) w[t] = 0.15 + 0.8 * testutil::unit(eng);
    }
    weights.push_back(std::move(w));
    years.push_back(2015 + static_cast<int>(testutil::below(eng, 5)));
  }
  auto model = testutil::make_model(weights, years);
  auto presence = topics::binarize(model, 0.1);
  std::vector<std::string> assignment;
  const char* cats[] = {"c.A", "c.B", "c.C"};
  for (std::size_t t = 0; t < k; ++t) assignment.push_back(cats[t % 3]);
  auto rows = topics::category_share_series(model, presence, assignment);

  std::map<std::pair<int, std::string>, std::uint64_t> oracle;
  std::map<int, std::uint64_t> totals;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t t = 0; t < k; ++t) {
      if (weights[a][t] > 0.1) {
        ++oracle[{years[a], assignment[t]}];
        ++totals[years[a]];
      }
    }
  }
  CHECK(!rows.empty());
  for (const auto& r : rows) {
    auto expected = static_cast<double>(oracle[{r.year, r.category}]) /
                    static_cast<double>(totals[r.year]);
    CHECK(r.share == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("group comparison shares and ordering") {
  auto model = testutil::make_model({{0.5, 0.0}, {0.5, 0.0}, {0.0, 0.5}, {0.0, 0.0}});
  auto presence = topics::binarize(model, 0.1);
  std::vector<bool> in_group = {true, true, false, false};
  std::vector<std::string> assignment = {"c.A", "c.B"};
  auto rows = topics::group_topic_share_comparison(model, presence, in_group, assignment);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].topic_id == "t0");  // only in group articles
  CHECK(rows[0].share_in == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rows[0].share_out == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rows[1].share_in == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rows[1].share_out == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("empty group or complement is an error") {
  auto model = testutil::make_model({{0.5}, {0.5}});
  auto presence = topics::binarize(model, 0.1);
  std::vector<std::string> assignment = {"c.A"};
  std::vector<bool> all_in = {true, true};
  std::vector<bool> all_out = {false, false};
  CHECK_THROWS_AS(topics::group_topic_share_comparison(model, presence, all_in, assignment),
                  DataError);
  CHECK_THROWS_AS(topics::group_topic_share_comparison(model, presence, all_out, assignment),
                  DataError);
}

TEST_CASE("filtering then binarizing equals binarizing then masking") {
  std::mt19937_64 eng(71);
  std::vector<std::vector<double>> weights;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> w(6, 0.0);
    for (int t = 0; t < 6; ++t) {
      if (testutil::below(eng, 3) == 0) w[t] = 0.12 + 0.3 * testutil::unit(eng);
    }
    weights.push_back(std::move(w));
  }
  auto model = testutil::make_model(weights);
  model.topic_words[4] = {"x"};  // removed by the word rule
  auto outcome = topics::filter_topics(model, 0.6, 2, 0.1);
  auto filtered_presence = topics::binarize(outcome.model, 0.1);

  auto full_presence = topics::binarize(model, 0.1);
  std::set<std::string> kept(outcome.model.topic_ids.begin(), outcome.model.topic_ids.end());
  for (std::size_t a = 0; a < model.n_articles(); ++a) {
    for (std::size_t t = 0; t < model.n_topics(); ++t) {
      if (!kept.count(model.topic_ids[t])) continue;
      auto it = std::find(outcome.model.topic_ids.begin(), outcome.model.topic_ids.end(),
                          model.topic_ids[t]);
      auto ft = static_cast<std::uint32_t>(it - outcome.model.topic_ids.begin());
      CHECK(full_presence.present(a, static_cast<std::uint32_t>(t)) ==
            filtered_presence.present(a, ft));
    }
  }
}

TEST_CASE("quotient is invariant to duplicating the corpus") {
  std::vector<ArticleSpec> articles;
  std::vector<std::vector<double>> weights;
  for (int rep = 0; rep < 2; ++rep) {
    for (int i = 0; i < 6; ++i) {
      ArticleSpec a;
      a.id = "a" + std::to_string(rep * 6 + i);
      a.categories = {i % 2 ? "c.A" : "c.B"};
      articles.push_back(a);
      weights.push_back({i < 3 ? 0.5 : 0.0, 0.3});
    }
  }
  auto dir = testutil::scratch_dir("topics_scalefree");
  auto f1 = write_model(dir, {articles.begin(), articles.begin() + 6},
                        {weights.begin(), weights.begin() + 6});
  auto m1 = topics::load_topic_model(f1.doc_topic, f1.topic_words, f1.corpus);
  auto q1 = topics::topic_category_salience(m1, topics::binarize(m1, 0.1), f1.corpus);

  auto dir2 = testutil::scratch_dir("topics_scalefree2");
  auto f2 = write_model(dir2, articles, weights);
  auto m2 = topics::load_topic_model(f2.doc_topic, f2.topic_words, f2.corpus);
  auto q2 = topics::topic_category_salience(m2, topics::binarize(m2, 0.1), f2.corpus);

  REQUIRE(q1.categories == q2.categories);
  for (Eigen::Index t = 0; t < q1.quotient.rows(); ++t) {
    for (Eigen::Index c = 0; c < q1.quotient.cols(); ++c) {
      if (std::isnan(q1.quotient(t, c))) continue;
      CHECK(q1.quotient(t, c) == doctest::Approx(q2.quotient(t, c)).epsilon(1e-12));
    }
  }
}
