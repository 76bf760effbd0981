#include "divscope/textproc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "divscope/errors.hpp"
#include "divscope/util/csv.hpp"
#include "divscope/util/io.hpp"
#include "divscope/util/parallel.hpp"

namespace divscope::text {

StopwordSet load_stopwords(const std::filesystem::path& path) {
  StopwordSet set;
  for (auto& line : util::read_lines(path)) {
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t");
    set.insert(line.substr(first, last - first + 1));
  }
  return set;
}

std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stopwords) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    // Trim stray underscores; a token must contain at least one letter.
    std::size_t b = cur.find_first_not_of('_');
    if (b == std::string::npos) {
      cur.clear();
      return;
    }
    std::size_t e = cur.find_last_not_of('_');
    std::string tok = cur.substr(b, e - b + 1);
    cur.clear();
    bool unigram = tok.find('_') == std::string::npos;
    if (unigram && stopwords.count(tok)) return;
    tokens.push_back(std::move(tok));
  };
  for (unsigned char c : text) {
    if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if ((c >= 'a' && c <= 'z') || c == '_') {
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      flush();
    }
  }
  if (!cur.empty()) flush();
  return tokens;
}

std::string CollocationModel::pair_key(std::string_view left, std::string_view right) {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key.append(left);
  key.push_back(' ');
  key.append(right);
  return key;
}

namespace {

std::size_t word_count(std::string_view token) {
  return static_cast<std::size_t>(std::count(token.begin(), token.end(), '_')) + 1;
}

std::vector<std::string> merge_pass(std::vector<std::string> tokens,
                                    const std::unordered_set<std::string>& merges,
                                    std::size_t max_words) {
  if (merges.empty()) return tokens;
  std::vector<std::string> out;
  out.reserve(tokens.size());
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (i + 1 < tokens.size() &&
        word_count(tokens[i]) + word_count(tokens[i + 1]) <= max_words &&
        merges.count(CollocationModel::pair_key(tokens[i], tokens[i + 1]))) {
      out.push_back(tokens[i] + "_" + tokens[i + 1]);
      i += 2;
    } else {
      out.push_back(std::move(tokens[i]));
      ++i;
    }
  }
  return out;
}

struct PairCounts {
  std::unordered_map<std::string, std::uint64_t> unigram;
  std::unordered_map<std::string, std::uint64_t> pair;
  std::uint64_t total = 0;
};

template <typename DocAccessor>
PairCounts count_pairs(std::size_t n_docs, DocAccessor doc, unsigned threads) {
  return util::reduce_chunks<PairCounts>(
      n_docs, util::kDefaultGrain, threads,
      [&](const util::ChunkRange& r, PairCounts& acc) {
        for (std::size_t d = r.begin; d < r.end; ++d) {
          const auto& toks = doc(d);
          acc.total += toks.size();
          for (std::size_t i = 0; i < toks.size(); ++i) {
            ++acc.unigram[toks[i]];
            if (i + 1 < toks.size()) {
              ++acc.pair[CollocationModel::pair_key(toks[i], toks[i + 1])];
            }
          }
        }
      },
      [](PairCounts& out, PairCounts& in) {
        if (out.unigram.empty() && out.pair.empty()) {
          out = std::move(in);
          return;
        }
        out.total += in.total;
        for (auto& [k, v] : in.unigram) out.unigram[k] += v;
        for (auto& [k, v] : in.pair) out.pair[k] += v;
      });
}

std::unordered_set<std::string> select_merges(const PairCounts& counts,
                                              const CollocationConfig& config,
                                              std::size_t max_words) {
  std::unordered_set<std::string> merges;
  if (counts.total == 0) return merges;
  const double n = static_cast<double>(counts.total);
  for (const auto& [key, c_ab] : counts.pair) {
    if (c_ab < config.min_pair_count) continue;
    auto space = key.find(' ');
    std::string_view left(key.data(), space);
    std::string_view right(key.data() + space + 1, key.size() - space - 1);
    if (word_count(left) + word_count(right) > max_words) continue;
    double c_a = static_cast<double>(counts.unigram.at(std::string(left)));
    double c_b = static_cast<double>(counts.unigram.at(std::string(right)));
    double pmi = std::log(static_cast<double>(c_ab) * n / (c_a * c_b));
    if (pmi > config.pmi_threshold) merges.insert(key);
  }
  return merges;
}

}  // namespace

std::vector<std::string> CollocationModel::apply(std::vector<std::string> tokens) const {
  tokens = merge_pass(std::move(tokens), pass1_, 2);
  tokens = merge_pass(std::move(tokens), pass2_, 3);
  return tokens;
}

CollocationModel detect_collocations(std::span<const std::vector<std::string>> docs,
                                     const CollocationConfig& config, unsigned threads) {
  auto counts1 = count_pairs(docs.size(), [&](std::size_t d) -> const std::vector<std::string>& {
    return docs[d];
  }, threads);
  auto pass1 = select_merges(counts1, config, 2);

  std::vector<std::vector<std::string>> merged(docs.size());
  util::for_each_chunk(docs.size(), util::kDefaultGrain, threads,
                       [&](const util::ChunkRange& r) {
                         for (std::size_t d = r.begin; d < r.end; ++d) {
                           merged[d] = merge_pass(docs[d], pass1, 2);
                         }
                       });
  auto counts2 = count_pairs(merged.size(), [&](std::size_t d) -> const std::vector<std::string>& {
    return merged[d];
  }, threads);
  auto pass2 = select_merges(counts2, config, 3);
  // Pairs already merged in pass 1 never reappear adjacent, so keeping the
  // two sets disjoint is automatic.
  return CollocationModel(std::move(pass1), std::move(pass2), config);
}

std::vector<TokenStream> preprocess_corpus(const corpus::Corpus& corpus,
                                           const StopwordSet& stopwords,
                                           const CollocationConfig& config, unsigned threads,
                                           CollocationModel* model_out) {
  const auto& articles = corpus.articles();
  std::vector<std::vector<std::string>> raw(articles.size());
  util::for_each_chunk(articles.size(), util::kDefaultGrain, threads,
                       [&](const util::ChunkRange& r) {
                         for (std::size_t i = r.begin; i < r.end; ++i) {
                           raw[i] = tokenize(articles[i].abstract_text, stopwords);
                         }
                       });
  CollocationModel model = detect_collocations(raw, config, threads);
  std::vector<TokenStream> streams(articles.size());
  util::for_each_chunk(articles.size(), util::kDefaultGrain, threads,
                       [&](const util::ChunkRange& r) {
                         for (std::size_t i = r.begin; i < r.end; ++i) {
                           streams[i].article_id = articles[i].id;
                           streams[i].tokens = model.apply(std::move(raw[i]));
                         }
                       });
  if (model_out) *model_out = std::move(model);
  return streams;
}

void TermTable::add(const TermTable& other) {
  total += other.total;
  for (const auto& [term, c] : other.counts) counts[term] += c;
}

std::vector<std::string> TermTable::sorted_terms() const {
  std::vector<std::string> terms;
  terms.reserve(counts.size());
  for (const auto& [term, _] : counts) terms.push_back(term);
  std::sort(terms.begin(), terms.end());
  return terms;
}

TermTable build_term_table(std::span<const TokenStream> streams, std::string partition,
                           unsigned threads) {
  TermTable table = util::reduce_chunks<TermTable>(
      streams.size(), util::kDefaultGrain, threads,
      [&](const util::ChunkRange& r, TermTable& acc) {
        for (std::size_t i = r.begin; i < r.end; ++i) {
          for (const auto& tok : streams[i].tokens) {
            ++acc.counts[tok];
            ++acc.total;
          }
        }
      },
      [](TermTable& out, TermTable& in) {
        if (out.counts.empty()) {
          out = std::move(in);
          return;
        }
        out.add(in);
      });
  table.partition = std::move(partition);
  return table;
}

std::optional<double> salience(std::string_view term, const TermTable& category,
                               const TermTable& parent, std::uint64_t min_count) {
  std::uint64_t freq_in = category.count(term);
  if (freq_in <= min_count) return std::nullopt;
  std::uint64_t freq_parent = parent.count(term);
  if (freq_parent == 0) {
    throw DataError("term '" + std::string(term) + "' counted in partition '" +
                    category.partition + "' but missing from parent '" + parent.partition + "'");
  }
  return static_cast<double>(freq_in) / static_cast<double>(freq_parent);
}

void write_term_table_csv(const std::filesystem::path& path, const TermTable& table) {
  std::ostringstream out;
  out << "term,count\n";
  for (const auto& term : table.sorted_terms()) {
    out << util::csv_escape(term) << ',' << table.count(term) << '\n';
  }
  util::write_text(path, out.str());
}

}  // namespace divscope::text
