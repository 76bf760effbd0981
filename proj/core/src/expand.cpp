#include "divscope/expand.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "divscope/errors.hpp"
#include "divscope/util/io.hpp"
#include "divscope/util/parallel.hpp"
#include "divscope/util/stats.hpp"

#include "json.hpp"

namespace divscope::expand {

std::vector<std::string> ExpandedVocabulary::combined() const {
  std::vector<std::string> all = salient;
  all.insert(all.end(), neighbors.begin(), neighbors.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

std::vector<std::string> salient_vocabulary(const text::TermTable& category,
                                            const text::TermTable& parent,
                                            std::uint64_t min_count, std::size_t top_k) {
  struct Candidate {
    std::string term;
    double ratio;
    std::uint64_t freq_in;
  };
  std::vector<Candidate> candidates;
  for (const auto& term : category.sorted_terms()) {
    auto ratio = text::salience(term, category, parent, min_count);
    if (ratio) candidates.push_back({term, *ratio, category.count(term)});
  }
  if (candidates.empty()) {
    throw DataError("no term in partition '" + category.partition +
                    "' passes the frequency gate (min_count=" + std::to_string(min_count) +
                    "); lower min_count");
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    if (a.freq_in != b.freq_in) return a.freq_in > b.freq_in;
    return a.term < b.term;
  });
  if (candidates.size() > top_k) candidates.resize(top_k);
  std::vector<std::string> out;
  out.reserve(candidates.size());
  for (auto& c : candidates) out.push_back(std::move(c.term));
  return out;
}

ExpandedVocabulary expanded_vocabulary(const std::string& category_id,
                                       std::vector<std::string> salient,
                                       const embed::EmbeddingTable& table, std::size_t top_n,
                                       double min_sim, embed::SeedAggregation aggregation,
                                       std::vector<std::string>* warnings) {
  ExpandedVocabulary out;
  out.category = category_id;
  out.salient = std::move(salient);
  for (auto& hit : embed::similar_terms(table, out.salient, top_n, min_sim, aggregation, warnings)) {
    out.neighbors.push_back(std::move(hit.term));
  }
  return out;
}

double vocabulary_occurrences(const text::TokenStream& stream,
                              const std::unordered_set<std::string>& vocabulary) {
  double count = 0.0;
  for (const auto& tok : stream.tokens) {
    if (vocabulary.count(tok)) count += 1.0;
  }
  return count;
}

ThresholdStats classification_threshold(std::span<const double> inside_counts,
                                        std::span<const double> outside_counts, double factor,
                                        std::vector<std::string>* warnings) {
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };
  if (inside_counts.empty()) throw DataError("inside partition is empty");
  if (outside_counts.size() < 2) {
    throw DataError("outside partition needs at least two articles to estimate the deviation");
  }
  ThresholdStats stats;
  stats.factor = factor;
  stats.mean_inside = util::mean(inside_counts);
  stats.mean_outside = util::mean(outside_counts);
  stats.sd_outside = util::sample_sd(outside_counts);
  if (stats.sd_outside == 0.0) {
    warn("outside counts have zero deviation; threshold degenerates to the outside mean");
  }
  double band = stats.mean_outside + factor * stats.sd_outside;
  stats.threshold = std::min(band, stats.mean_inside);
  stats.clamped = band > stats.mean_inside;
  if (stats.mean_inside <= stats.mean_outside) {
    warn("inside mean does not exceed outside mean; expansion will be unreliable");
  }
  return stats;
}

std::vector<std::string> expand_category(std::span<const text::TokenStream> outside_streams,
                                         const std::unordered_set<std::string>& vocabulary,
                                         double threshold, unsigned threads) {
  std::vector<std::uint8_t> selected(outside_streams.size(), 0);
  util::for_each_chunk(outside_streams.size(), util::kDefaultGrain, threads,
                       [&](const util::ChunkRange& r) {
                         for (std::size_t i = r.begin; i < r.end; ++i) {
                           if (vocabulary_occurrences(outside_streams[i], vocabulary) > threshold) {
                             selected[i] = 1;
                           }
                         }
                       });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < outside_streams.size(); ++i) {
    if (selected[i]) ids.push_back(outside_streams[i].article_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

CategoryExpansion expand_one(const corpus::Corpus& corpus,
                             std::span<const text::TokenStream> streams,
                             const CategorySpec& spec, const text::TermTable& category_table,
                             const text::TermTable& parent_table,
                             const embed::EmbeddingTable& embeddings,
                             const ExpansionParams& params, unsigned threads,
                             std::vector<std::string>* warnings) {
  if (streams.size() != corpus.size()) {
    throw DataError("token streams are not aligned with the corpus");
  }
  CategoryExpansion result;
  result.spec = spec;
  auto salient = salient_vocabulary(category_table, parent_table, params.salience_min_count,
                                    params.salient_top);
  result.vocabulary =
      expanded_vocabulary(spec.id, std::move(salient), embeddings, params.neighbor_top,
                          params.min_similarity, params.aggregation, warnings);
  auto combined = result.vocabulary.combined();
  std::unordered_set<std::string> vocab(combined.begin(), combined.end());

  std::vector<double> inside_counts;
  std::vector<double> outside_counts;
  std::vector<text::TokenStream> outside_streams;
  const auto& articles = corpus.articles();
  std::vector<double> all_counts(articles.size(), 0.0);
  util::for_each_chunk(articles.size(), util::kDefaultGrain, threads,
                       [&](const util::ChunkRange& r) {
                         for (std::size_t i = r.begin; i < r.end; ++i) {
                           all_counts[i] = vocabulary_occurrences(streams[i], vocab);
                         }
                       });
  for (std::size_t i = 0; i < articles.size(); ++i) {
    if (!articles[i].has_abstract()) continue;  // no text, no classification
    if (articles[i].has_category(spec.id)) {
      inside_counts.push_back(all_counts[i]);
    } else {
      outside_counts.push_back(all_counts[i]);
      outside_streams.push_back(streams[i]);
    }
  }
  result.inside_n = inside_counts.size();
  result.outside_n = outside_counts.size();
  result.stats = classification_threshold(inside_counts, outside_counts, spec.factor, warnings);
  result.expanded_ids = expand_category(outside_streams, vocab, result.stats.threshold, threads);
  return result;
}

std::vector<std::string> build_field_corpus(const corpus::Corpus& corpus,
                                            std::span<const CategorySpec> cores,
                                            std::span<const CategoryExpansion> expansions) {
  std::vector<std::string> ids;
  for (const auto& article : corpus.articles()) {
    for (const auto& core : cores) {
      if (article.has_category(core.id)) {
        ids.push_back(article.id);
        break;
      }
    }
  }
  for (const auto& exp : expansions) {
    ids.insert(ids.end(), exp.expanded_ids.begin(), exp.expanded_ids.end());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void write_audit_json(const std::filesystem::path& path, const CategoryExpansion& expansion) {
  nlohmann::ordered_json j;
  j["category"] = expansion.spec.id;
  j["parent"] = expansion.spec.parent;
  j["factor"] = expansion.spec.factor;
  j["salient"] = expansion.vocabulary.salient;
  j["neighbors"] = expansion.vocabulary.neighbors;
  j["vocabulary"] = expansion.vocabulary.combined();
  j["mean_inside"] = expansion.stats.mean_inside;
  j["mean_outside"] = expansion.stats.mean_outside;
  j["sd_outside"] = expansion.stats.sd_outside;
  j["threshold"] = expansion.stats.threshold;
  j["clamped"] = expansion.stats.clamped;
  j["inside_n"] = expansion.inside_n;
  j["outside_n"] = expansion.outside_n;
  j["expanded_n"] = expansion.expanded_ids.size();
  util::write_text(path, j.dump(2) + "\n");
}

void write_id_file(const std::filesystem::path& path, std::span<const std::string> ids) {
  std::ostringstream out;
  for (const auto& id : ids) out << id << '\n';
  util::write_text(path, out.str());
}

std::vector<std::string> read_id_file(const std::filesystem::path& path) {
  std::vector<std::string> ids;
  for (auto& line : util::read_lines(path)) {
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

}  // namespace divscope::expand
