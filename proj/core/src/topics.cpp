#include "divscope/topics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "divscope/errors.hpp"
#include "divscope/util/csv.hpp"
#include "divscope/util/io.hpp"
#include "divscope/util/parallel.hpp"

#include "json.hpp"

namespace divscope::topics {

namespace {

double parse_probability(std::string_view field, std::size_t line_no, const std::string& article,
                         const std::string& topic) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw DataError("doc-topic line " + std::to_string(line_no) + ": article " + article +
                    ", topic " + topic + ": malformed probability '" + std::string(field) + "'");
  }
  if (!(value >= 0.0 && value <= 1.0)) {
    throw DataError("doc-topic line " + std::to_string(line_no) + ": article " + article +
                    ", topic " + topic + ": probability " + util::format_double(value) +
                    " outside [0,1]");
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

TopicModel load_topic_model(const std::filesystem::path& doc_topic_path,
                            const std::filesystem::path& topic_words_path,
                            const corpus::Corpus& corpus, ModelDiagnostics* diagnostics,
                            std::span<const std::string> restrict_ids, unsigned threads) {
  auto lines = util::read_lines(doc_topic_path);
  if (lines.empty()) throw DataError("doc-topic file is empty: " + doc_topic_path.string());
  auto header = util::parse_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "article_id") {
    throw DataError("doc-topic header must start with 'article_id' followed by topic columns");
  }
  TopicModel model;
  model.topic_ids.assign(header.begin() + 1, header.end());
  const std::size_t k = model.topic_ids.size();

  ModelDiagnostics local;
  std::unordered_set<std::string> keep;
  for (const auto& id : restrict_ids) keep.insert(id);

  struct Row {
    std::string id;
    std::vector<double> p;
    int year = 0;
  };
  std::vector<std::optional<Row>> parsed(lines.size());
  util::for_each_chunk(
      lines.size() - 1, util::kDefaultGrain, threads, [&](const util::ChunkRange& r) {
        for (std::size_t li = r.begin + 1; li < r.end + 1; ++li) {
          const auto& line = lines[li];
          if (line.empty()) continue;
          auto fields = split_fields(line);
          if (fields.size() != k + 1) {
            throw DataError("doc-topic line " + std::to_string(li + 1) + ": expected " +
                            std::to_string(k + 1) + " fields, found " +
                            std::to_string(fields.size()));
          }
          Row row;
          row.id = std::string(fields[0]);
          row.p.resize(k);
          for (std::size_t c = 0; c < k; ++c) {
            row.p[c] = parse_probability(fields[c + 1], li + 1, row.id, model.topic_ids[c]);
          }
          parsed[li] = std::move(row);
        }
      });

  std::vector<Row> rows;
  std::unordered_set<std::string> seen;
  for (std::size_t li = 1; li < parsed.size(); ++li) {
    if (!parsed[li]) continue;
    Row& row = *parsed[li];
    if (!seen.insert(row.id).second) {
      throw DataError("doc-topic file: duplicate article id " + row.id);
    }
    const corpus::Article* article = corpus.find(row.id);
    if (!article) {
      local.unknown_articles.push_back(row.id);
      continue;
    }
    if (!keep.empty() && !keep.count(row.id)) continue;
    row.year = article->created.year;
    rows.push_back(std::move(row));
  }
  for (const auto& article : corpus.articles()) {
    if (!keep.empty() && !keep.count(article.id)) continue;
    if (!seen.count(article.id)) local.missing_articles.push_back(article.id);
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; });

  model.article_ids.reserve(rows.size());
  model.years.reserve(rows.size());
  model.weights.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    model.article_ids.push_back(rows[r].id);
    model.years.push_back(rows[r].year);
    for (std::size_t c = 0; c < k; ++c) {
      model.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].p[c];
    }
  }

  // Topic word lists.
  std::unordered_map<std::string, std::vector<std::string>> words;
  for (auto& line : util::read_lines(topic_words_path)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("topic_id") || !j.contains("words")) {
      throw DataError("topic-words file: invalid record '" + line.substr(0, 80) + "'");
    }
    std::string id = j["topic_id"].is_string() ? j["topic_id"].get<std::string>()
                                               : j["topic_id"].dump();
    std::vector<std::string> w;
    for (const auto& e : j["words"]) w.push_back(e.get<std::string>());
    words[id] = std::move(w);
  }
  model.topic_words.resize(k);
  for (std::size_t t = 0; t < k; ++t) {
    auto it = words.find(model.topic_ids[t]);
    if (it == words.end() || it->second.empty()) {
      throw DataError("topic '" + model.topic_ids[t] + "' has no word list");
    }
    model.topic_words[t] = it->second;
  }
  for (const auto& [id, _] : words) {
    if (std::find(model.topic_ids.begin(), model.topic_ids.end(), id) == model.topic_ids.end()) {
      local.warnings.push_back("topic-words entry '" + id + "' has no doc-topic column");
    }
  }
  if (diagnostics) *diagnostics = std::move(local);
  return model;
}

bool PresenceMatrix::present(std::size_t article, std::uint32_t topic) const {
  const auto& row = rows[article];
  return std::binary_search(row.begin(), row.end(), topic);
}

std::uint64_t PresenceMatrix::total_presences() const {
  std::uint64_t total = 0;
  for (auto c : topic_counts) total += c;
  return total;
}

PresenceMatrix binarize(const TopicModel& model, double k) {
  if (!(k >= 0.0 && k < 1.0)) {
    throw ConfigError("presence threshold must lie in [0,1), got " + util::format_double(k));
  }
  PresenceMatrix out;
  out.threshold = k;
  out.n_topics = model.n_topics();
  out.rows.resize(model.n_articles());
  out.topic_counts.assign(model.n_topics(), 0);
  for (std::size_t a = 0; a < model.n_articles(); ++a) {
    auto& row = out.rows[a];
    for (std::size_t t = 0; t < model.n_topics(); ++t) {
      if (model.weights(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(t)) > k) {
        row.push_back(static_cast<std::uint32_t>(t));
        ++out.topic_counts[t];
      }
    }
  }
  return out;
}

FilterOutcome filter_topics(const TopicModel& model, double max_prevalence,
                            std::size_t min_words, double presence_k, bool renormalize) {
  if (model.n_articles() == 0) throw DataError("cannot filter topics of an empty model");
  PresenceMatrix presence = binarize(model, presence_k);
  FilterOutcome out;
  std::vector<std::size_t> kept;
  const double n = static_cast<double>(model.n_articles());
  for (std::size_t t = 0; t < model.n_topics(); ++t) {
    double prevalence = static_cast<double>(presence.topic_counts[t]) / n;
    if (prevalence > max_prevalence) {
      out.removed_prevalent.push_back(model.topic_ids[t]);
      continue;
    }
    if (model.topic_words[t].size() < min_words) {
      out.removed_few_words.push_back(model.topic_ids[t]);
      continue;
    }
    kept.push_back(t);
  }
  if (kept.empty()) {
    throw DataError("topic filtering removed every topic; relax max_prevalence or min_words");
  }
  TopicModel& filtered = out.model;
  filtered.article_ids = model.article_ids;
  filtered.years = model.years;
  filtered.weights.resize(static_cast<Eigen::Index>(model.n_articles()),
                          static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    filtered.topic_ids.push_back(model.topic_ids[kept[j]]);
    filtered.topic_words.push_back(model.topic_words[kept[j]]);
    filtered.weights.col(static_cast<Eigen::Index>(j)) =
        model.weights.col(static_cast<Eigen::Index>(kept[j]));
  }
  if (renormalize) {
    for (Eigen::Index r = 0; r < filtered.weights.rows(); ++r) {
      double sum = filtered.weights.row(r).sum();
      if (sum > 0.0) filtered.weights.row(r) /= sum;
    }
  }
  return out;
}

SalienceResult topic_category_salience(const TopicModel& model, const PresenceMatrix& presence,
                                       const corpus::Corpus& corpus) {
  SalienceResult result;
  std::set<std::string> cats;
  std::vector<const corpus::Article*> articles(model.n_articles());
  for (std::size_t a = 0; a < model.n_articles(); ++a) {
    articles[a] = corpus.find(model.article_ids[a]);
    if (!articles[a]) throw DataError("model article " + model.article_ids[a] + " not in corpus");
    for (const auto& c : articles[a]->categories) cats.insert(c);
  }
  result.categories.assign(cats.begin(), cats.end());
  const std::size_t k = model.n_topics();
  const std::size_t nc = result.categories.size();
  std::unordered_map<std::string, std::size_t> cat_index;
  for (std::size_t c = 0; c < nc; ++c) cat_index.emplace(result.categories[c], c);

  std::vector<std::uint64_t> cat_articles(nc, 0);
  std::vector<std::vector<std::uint64_t>> cat_topic(nc, std::vector<std::uint64_t>(k, 0));
  for (std::size_t a = 0; a < model.n_articles(); ++a) {
    for (const auto& c : articles[a]->categories) {
      std::size_t ci = cat_index.at(c);
      ++cat_articles[ci];
      for (auto t : presence.rows[a]) ++cat_topic[ci][t];
    }
  }
  const double n = static_cast<double>(model.n_articles());
  result.quotient.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(nc));
  result.quotient.setConstant(std::numeric_limits<double>::quiet_NaN());
  result.defined.assign(k, false);
  for (std::size_t t = 0; t < k; ++t) {
    double overall = static_cast<double>(presence.topic_counts[t]) / n;
    if (overall <= 0.0) {
      result.diagnostics.push_back("topic " + model.topic_ids[t] +
                                   " never present; quotient undefined");
      continue;
    }
    result.defined[t] = true;
    for (std::size_t c = 0; c < nc; ++c) {
      if (cat_articles[c] == 0) continue;
      double share = static_cast<double>(cat_topic[c][t]) / static_cast<double>(cat_articles[c]);
      result.quotient(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) =
          share / overall;
    }
  }
  return result;
}

std::vector<std::string> assign_topic_category(const SalienceResult& salience) {
  std::vector<std::string> out(static_cast<std::size_t>(salience.quotient.rows()));
  for (Eigen::Index t = 0; t < salience.quotient.rows(); ++t) {
    if (!salience.defined[static_cast<std::size_t>(t)]) continue;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_c = 0;
    bool found = false;
    for (Eigen::Index c = 0; c < salience.quotient.cols(); ++c) {
      double q = salience.quotient(t, c);
      if (std::isnan(q)) continue;
      if (q > best) {  // ties keep the earlier (lexicographically first) category
        best = q;
        best_c = static_cast<std::size_t>(c);
        found = true;
      }
    }
    if (found) out[static_cast<std::size_t>(t)] = salience.categories[best_c];
  }
  return out;
}

std::vector<CategoryShare> category_share_series(const TopicModel& model,
                                                 const PresenceMatrix& presence,
                                                 std::span<const std::string> assignment) {
  if (assignment.size() != model.n_topics()) {
    throw DataError("assignment size does not match the number of topics");
  }
  std::map<int, std::map<std::string, std::uint64_t>> counts;  // year -> category -> presences
  for (std::size_t a = 0; a < model.n_articles(); ++a) {
    int year = model.years[a];
    for (auto t : presence.rows[a]) {
      const auto& cat = assignment[t];
      if (cat.empty()) continue;  // unassigned topics stay out of the population
      ++counts[year][cat];
    }
  }
  std::vector<CategoryShare> rows;
  for (const auto& [year, per_cat] : counts) {
    std::uint64_t total = 0;
    for (const auto& [_, c] : per_cat) total += c;
    if (total == 0) continue;
    for (const auto& [cat, c] : per_cat) {
      rows.push_back({year, cat, static_cast<double>(c) / static_cast<double>(total), c});
    }
  }
  return rows;
}

std::vector<GroupTopicShare> group_topic_share_comparison(
    const TopicModel& model, const PresenceMatrix& presence, const std::vector<bool>& in_group,
    std::span<const std::string> assignment) {
  if (in_group.size() != model.n_articles()) {
    throw DataError("group mask size does not match the number of articles");
  }
  std::uint64_t n_in = 0;
  for (bool b : in_group) n_in += b ? 1 : 0;
  std::uint64_t n_out = model.n_articles() - n_in;
  if (n_in == 0) throw DataError("group is empty");
  if (n_out == 0) throw DataError("group complement is empty");

  std::vector<std::uint64_t> in_counts(model.n_topics(), 0);
  std::vector<std::uint64_t> out_counts(model.n_topics(), 0);
  for (std::size_t a = 0; a < model.n_articles(); ++a) {
    auto& counts = in_group[a] ? in_counts : out_counts;
    for (auto t : presence.rows[a]) ++counts[t];
  }
  std::vector<GroupTopicShare> rows;
  rows.reserve(model.n_topics());
  for (std::size_t t = 0; t < model.n_topics(); ++t) {
    GroupTopicShare r;
    r.topic_id = model.topic_ids[t];
    r.category = assignment.empty() ? std::string() : assignment[t];
    r.share_in = static_cast<double>(in_counts[t]) / static_cast<double>(n_in);
    r.share_out = static_cast<double>(out_counts[t]) / static_cast<double>(n_out);
    r.occurrences = presence.topic_counts[t];
    rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end(), [](const GroupTopicShare& a, const GroupTopicShare& b) {
    if (a.category != b.category) return a.category < b.category;
    if (a.occurrences != b.occurrences) return a.occurrences > b.occurrences;
    return a.topic_id < b.topic_id;
  });
  return rows;
}

}  // namespace divscope::topics
