#include "divscope/embed.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "divscope/errors.hpp"
#include "divscope/util/io.hpp"
#include "divscope/util/parallel.hpp"
#include "divscope/util/rng.hpp"

namespace divscope::embed {

std::optional<std::size_t> EmbeddingTable::find(std::string_view term) const {
  auto it = std::lower_bound(terms.begin(), terms.end(), term);
  if (it == terms.end() || *it != term) return std::nullopt;
  return static_cast<std::size_t>(it - terms.begin());
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double na = a.norm();
  double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

// Sparse symmetric matrix in CSR form; rows sorted by column index.
struct SparseSym {
  std::size_t n = 0;
  std::vector<std::size_t> row_begin;  // n + 1 offsets
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  Eigen::MatrixXd multiply(const Eigen::MatrixXd& x, unsigned threads) const {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), x.cols());
    util::for_each_chunk(n, 256, threads, [&](const util::ChunkRange& r) {
      for (std::size_t i = r.begin; i < r.end; ++i) {
        auto yi = y.row(static_cast<Eigen::Index>(i));
        for (std::size_t k = row_begin[i]; k < row_begin[i + 1]; ++k) {
          yi += val[k] * x.row(col[k]);
        }
      }
    });
    return y;
  }
};

using PairKey = std::uint64_t;
inline PairKey pack(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

EmbeddingTable train_ppmi_svd(std::span<const text::TokenStream> streams,
                              const PpmiSvdConfig& config, unsigned threads) {
  if (config.window < 1) throw ConfigError("embedding window must be at least 1");
  if (config.dims < 1) throw ConfigError("embedding dims must be at least 1");

  // Vocabulary: frequent terms, ascending order.
  text::TermTable freq = text::build_term_table(streams, "embedding", threads);
  std::vector<std::string> vocab;
  for (auto& term : freq.sorted_terms()) {
    if (freq.count(term) >= config.min_term_count) vocab.push_back(term);
  }
  if (vocab.empty()) throw DataError("embedding vocabulary is empty; lower min_term_count");
  if (static_cast<std::size_t>(config.dims) > vocab.size()) {
    throw ConfigError("embedding dims " + std::to_string(config.dims) +
                      " exceeds vocabulary size " + std::to_string(vocab.size()) +
                      "; choose dims <= " + std::to_string(vocab.size()));
  }
  std::unordered_map<std::string_view, std::uint32_t> index;
  index.reserve(vocab.size());
  for (std::uint32_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);

  // Symmetric windowed co-occurrence counts.
  using CountMap = std::unordered_map<PairKey, std::uint32_t>;
  CountMap counts = util::reduce_chunks<CountMap>(
      streams.size(), util::kDefaultGrain, threads,
      [&](const util::ChunkRange& r, CountMap& acc) {
        std::vector<std::uint32_t> ids;
        for (std::size_t d = r.begin; d < r.end; ++d) {
          ids.clear();
          for (const auto& tok : streams[d].tokens) {
            auto it = index.find(tok);
            if (it != index.end()) ids.push_back(it->second);
          }
          const std::size_t w = static_cast<std::size_t>(config.window);
          for (std::size_t i = 0; i < ids.size(); ++i) {
            std::size_t lo = i > w ? i - w : 0;
            std::size_t hi = std::min(ids.size(), i + w + 1);
            for (std::size_t j = lo; j < hi; ++j) {
              if (j != i) ++acc[pack(ids[i], ids[j])];
            }
          }
        }
      },
      [](CountMap& out, CountMap& in) {
        if (out.empty()) {
          out = std::move(in);
          return;
        }
        for (auto& [k, v] : in) out[k] += v;
      });

  // Positive PMI entries in CSR order. Marginals stay integral so the result
  // cannot depend on accumulation order.
  const std::size_t v = vocab.size();
  std::vector<std::uint64_t> row_sum(v, 0);
  std::uint64_t grand_total = 0;
  for (const auto& [key, c] : counts) {
    row_sum[key >> 32] += c;
    grand_total += c;
  }
  std::vector<std::pair<PairKey, double>> entries;
  entries.reserve(counts.size());
  for (const auto& [key, c] : counts) {
    std::uint32_t i = static_cast<std::uint32_t>(key >> 32);
    std::uint32_t j = static_cast<std::uint32_t>(key & 0xffffffffu);
    double pmi = std::log(static_cast<double>(c) * static_cast<double>(grand_total) /
                          (static_cast<double>(row_sum[i]) * static_cast<double>(row_sum[j])));
    if (pmi > 0.0) entries.emplace_back(key, pmi);
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Entries are sorted by (row, col); prefix sums give CSR offsets.
  SparseSym m;
  m.n = v;
  m.row_begin.assign(v + 1, 0);
  m.col.resize(entries.size());
  m.val.resize(entries.size());
  for (std::size_t e = 0; e < entries.size(); ++e) {
    m.col[e] = static_cast<std::uint32_t>(entries[e].first & 0xffffffffu);
    m.val[e] = entries[e].second;
    ++m.row_begin[(entries[e].first >> 32) + 1];
  }
  for (std::size_t i = 0; i < v; ++i) m.row_begin[i + 1] += m.row_begin[i];

  // Randomized range finder with power iterations; all matrix products are
  // chunk-deterministic so the factorization is reproducible.
  const int d = config.dims;
  const int p = std::min<int>(config.oversample, static_cast<int>(v) - d);
  const int k = d + std::max(0, p);
  util::SplitMix64 eng(util::derive_seed(config.seed, 0x5eedu));
  Eigen::MatrixXd gaussian(static_cast<Eigen::Index>(v), k);
  for (Eigen::Index c = 0; c < gaussian.cols(); ++c) {
    for (Eigen::Index r = 0; r < gaussian.rows(); ++r) {
      gaussian(r, c) = util::standard_normal(eng);
    }
  }
  Eigen::MatrixXd y = m.multiply(gaussian, threads);
  for (int q = 0; q < config.power_iterations; ++q) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    Eigen::MatrixXd thin_q =
        qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(v), k);
    y = m.multiply(thin_q, threads);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  Eigen::MatrixXd basis =
      qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(v), k);
  Eigen::MatrixXd projected = m.multiply(basis, threads);  // M * Q, (v x k)
  Eigen::MatrixXd small = basis.transpose() * projected;   // Q^T M Q, (k x k)
  Eigen::BDCSVD<Eigen::MatrixXd> svd(small, Eigen::ComputeThinU);
  Eigen::MatrixXd u = basis * svd.matrixU().leftCols(d);
  Eigen::VectorXd scale = svd.singularValues().head(d).cwiseSqrt();

  EmbeddingTable table;
  table.dim = static_cast<std::size_t>(d);
  table.terms = std::move(vocab);
  table.vectors = u * scale.asDiagonal();
  return table;
}

EmbeddingTable load_vectors(const std::filesystem::path& path,
                            std::vector<std::string>* warnings) {
  auto lines = util::read_lines(path);
  EmbeddingTable table;
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::size_t dim = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::istringstream in(lines[i]);
    std::string term;
    in >> term;
    std::vector<double> values;
    double x;
    while (in >> x) values.push_back(x);
    if (!in.eof()) {
      throw DataError("vector file line " + std::to_string(i + 1) + ": malformed component");
    }
    if (rows.empty()) {
      dim = values.size();
      if (dim == 0) {
        throw DataError("vector file line " + std::to_string(i + 1) + ": no components");
      }
    } else if (values.size() != dim) {
      throw DataError("vector file line " + std::to_string(i + 1) + ": expected " +
                      std::to_string(dim) + " components, found " +
                      std::to_string(values.size()));
    }
    for (double c : values) {
      if (!std::isfinite(c)) {
        throw DataError("vector file line " + std::to_string(i + 1) + ": non-finite component");
      }
    }
    bool duplicate =
        std::any_of(rows.begin(), rows.end(), [&](const auto& r) { return r.first == term; });
    if (duplicate) {
      if (warnings) {
        warnings->push_back("vector file line " + std::to_string(i + 1) + ": duplicate term '" +
                            term + "' skipped");
      }
      continue;
    }
    rows.emplace_back(std::move(term), std::move(values));
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  table.dim = dim;
  table.terms.reserve(rows.size());
  table.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    table.terms.push_back(rows[r].first);
    for (std::size_t c = 0; c < dim; ++c) {
      table.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r].second[c];
    }
  }
  return table;
}

void save_vectors(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ostringstream out;
  char buf[32];
  for (std::size_t r = 0; r < table.terms.size(); ++r) {
    out << table.terms[r];
    for (std::size_t c = 0; c < table.dim; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    table.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      out << ' ' << buf;
    }
    out << '\n';
  }
  util::write_text(path, out.str());
}

std::vector<SimilarTerm> similar_terms(const EmbeddingTable& table,
                                       const std::vector<std::string>& seeds, std::size_t top_n,
                                       double min_sim, SeedAggregation aggregation,
                                       std::vector<std::string>* warnings) {
  std::vector<std::size_t> seed_rows;
  std::vector<bool> is_seed(table.size(), false);
  for (const auto& s : seeds) {
    auto idx = table.find(s);
    if (!idx) {
      if (warnings) warnings->push_back("seed term '" + s + "' not in embedding vocabulary");
      continue;
    }
    if (!is_seed[*idx]) {
      is_seed[*idx] = true;
      seed_rows.push_back(*idx);
    }
  }
  if (seed_rows.empty()) {
    throw DataError("none of the seed terms are present in the embedding vocabulary");
  }

  Eigen::VectorXd norms = table.vectors.rowwise().norm();
  std::vector<SimilarTerm> candidates;
  for (std::size_t r = 0; r < table.size(); ++r) {
    if (is_seed[r]) continue;
    if (norms[static_cast<Eigen::Index>(r)] == 0.0) continue;
    double agg = aggregation == SeedAggregation::Max ? -1.0 : 0.0;
    for (std::size_t s : seed_rows) {
      double ns = norms[static_cast<Eigen::Index>(s)];
      double sim = ns == 0.0 ? 0.0
                             : table.vectors.row(static_cast<Eigen::Index>(r))
                                       .dot(table.vectors.row(static_cast<Eigen::Index>(s))) /
                                   (norms[static_cast<Eigen::Index>(r)] * ns);
      if (aggregation == SeedAggregation::Max) {
        agg = std::max(agg, sim);
      } else {
        agg += sim / static_cast<double>(seed_rows.size());
      }
    }
    if (agg >= min_sim) candidates.push_back({table.terms[r], agg});
  }
  std::sort(candidates.begin(), candidates.end(), [](const SimilarTerm& a, const SimilarTerm& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.term < b.term;
  });
  if (candidates.size() > top_n) candidates.resize(top_n);
  return candidates;
}

}  // namespace divscope::embed
