#include "divscope/netan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "divscope/errors.hpp"
#include "divscope/util/csv.hpp"
#include "divscope/util/io.hpp"
#include "divscope/util/parallel.hpp"

namespace divscope::netan {

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a > b) std::swap(a, b);  // keep the smaller id as root
    parent[b] = a;
    return true;
  }
};

std::vector<std::vector<std::uint32_t>> adjacency(const CoocGraph& graph) {
  std::vector<std::vector<std::uint32_t>> adj(graph.node_count());
  for (const auto& e : graph.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  return adj;
}

// Component label per node; labels are the smallest node id in the component.
std::vector<std::uint32_t> component_labels(const CoocGraph& graph) {
  UnionFind uf(graph.node_count());
  for (const auto& e : graph.edges) uf.unite(e.a, e.b);
  std::vector<std::uint32_t> label(graph.node_count());
  for (std::uint32_t v = 0; v < graph.node_count(); ++v) label[v] = uf.find(v);
  return label;
}

}  // namespace

CoocGraph CoocGraph::from_edges(std::size_t nodes, std::vector<Edge> edges) {
  CoocGraph g;
  g.labels.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) g.labels[i] = "n" + std::to_string(i);
  g.occurrences.assign(nodes, 1);
  g.categories.assign(nodes, std::string());
  for (auto& e : edges) {
    if (e.a == e.b) throw DataError("self-loop in graph edge list");
    if (e.a > e.b) std::swap(e.a, e.b);
    if (e.b >= nodes) throw DataError("edge endpoint outside node range");
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  g.edges = std::move(edges);
  return g;
}

CoocGraph build_cooc_graph(const topics::TopicModel& model,
                           const topics::PresenceMatrix& presence,
                           std::span<const std::size_t> rows,
                           std::span<const std::string> assignment, unsigned threads) {
  // Occurrence counts within the window decide the node set.
  std::vector<std::uint64_t> counts(model.n_topics(), 0);
  for (std::size_t r : rows) {
    for (auto t : presence.rows[r]) ++counts[t];
  }
  std::vector<std::uint32_t> node_of(model.n_topics(), UINT32_MAX);
  CoocGraph g;
  for (std::uint32_t t = 0; t < model.n_topics(); ++t) {
    if (counts[t] == 0) continue;
    node_of[t] = static_cast<std::uint32_t>(g.labels.size());
    g.labels.push_back(model.topic_ids[t]);
    g.occurrences.push_back(counts[t]);
    g.categories.push_back(assignment.empty() ? std::string() : assignment[t]);
  }

  using PairMap = std::unordered_map<std::uint64_t, std::uint64_t>;
  PairMap pairs = util::reduce_chunks<PairMap>(
      rows.size(), util::kDefaultGrain, threads,
      [&](const util::ChunkRange& range, PairMap& acc) {
        for (std::size_t i = range.begin; i < range.end; ++i) {
          const auto& present = presence.rows[rows[i]];
          for (std::size_t a = 0; a < present.size(); ++a) {
            for (std::size_t b = a + 1; b < present.size(); ++b) {
              std::uint64_t key = (static_cast<std::uint64_t>(node_of[present[a]]) << 32) |
                                  node_of[present[b]];
              ++acc[key];
            }
          }
        }
      },
      [](PairMap& out, PairMap& in) {
        if (out.empty()) {
          out = std::move(in);
          return;
        }
        for (auto& [k, v] : in) out[k] += v;
      });
  g.edges.reserve(pairs.size());
  for (const auto& [key, w] : pairs) {
    CoocGraph::Edge e;
    e.a = static_cast<std::uint32_t>(key >> 32);
    e.b = static_cast<std::uint32_t>(key & 0xffffffffu);
    e.weight = static_cast<double>(w);
    g.edges.push_back(e);
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const CoocGraph::Edge& x, const CoocGraph::Edge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  return g;
}

std::vector<CoocGraph::Edge> max_spanning_tree(const CoocGraph& graph) {
  std::vector<CoocGraph::Edge> edges = graph.edges;
  std::sort(edges.begin(), edges.end(), [](const CoocGraph::Edge& x, const CoocGraph::Edge& y) {
    if (x.weight != y.weight) return x.weight > y.weight;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  UnionFind uf(graph.node_count());
  std::vector<CoocGraph::Edge> kept;
  for (const auto& e : edges) {
    if (uf.unite(e.a, e.b)) kept.push_back(e);
  }
  std::sort(kept.begin(), kept.end(), [](const CoocGraph::Edge& x, const CoocGraph::Edge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  return kept;
}

CentralityResult eigenvector_centrality(const CoocGraph& graph, double tol, int max_iter) {
  const std::size_t n = graph.node_count();
  if (n == 0) throw DataError("eigenvector centrality of an empty graph");
  auto label = component_labels(graph);
  std::unordered_map<std::uint32_t, std::size_t> comp_size;
  for (auto l : label) ++comp_size[l];
  std::uint32_t largest = label[0];
  for (const auto& [l, size] : comp_size) {
    if (size > comp_size[largest] || (size == comp_size[largest] && l < largest)) largest = l;
  }
  CentralityResult result;
  result.score.assign(n, 0.0);
  result.in_largest.assign(n, false);
  std::vector<std::uint32_t> members;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (label[v] == largest) {
      result.in_largest[v] = true;
      members.push_back(v);
    }
  }
  std::vector<std::uint32_t> slot(n, UINT32_MAX);
  for (std::uint32_t i = 0; i < members.size(); ++i) slot[members[i]] = i;

  // Restricted adjacency of the largest component.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(members.size());
  for (const auto& e : graph.edges) {
    if (slot[e.a] == UINT32_MAX || slot[e.b] == UINT32_MAX) continue;
    adj[slot[e.a]].emplace_back(slot[e.b], e.weight);
    adj[slot[e.b]].emplace_back(slot[e.a], e.weight);
  }
  const std::size_t m = members.size();
  std::vector<double> v(m, 1.0 / std::sqrt(static_cast<double>(m)));
  std::vector<double> av(m, 0.0);
  std::vector<double> next(m, 0.0);
  double residual = 0.0;
  int it = 0;
  auto multiply = [&](const std::vector<double>& in, std::vector<double>& out) {
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (const auto& [j, w] : adj[i]) s += w * in[j];
      out[i] = s;
    }
  };
  for (it = 1; it <= max_iter; ++it) {
    multiply(v, av);
    // Unit shift: (A + I) v keeps the dominant eigenvector and guarantees
    // convergence on bipartite components.
    double norm = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      next[i] = av[i] + v[i];
      norm += next[i] * next[i];
    }
    norm = std::sqrt(norm);
    residual = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      next[i] /= norm;
      residual = std::max(residual, std::fabs(next[i] - v[i]));
    }
    std::swap(v, next);
    if (residual <= tol) break;
  }
  if (it > max_iter) {
    throw NumericError("eigenvector centrality did not converge in " +
                       std::to_string(max_iter) + " iterations (residual " +
                       util::format_double(residual) + ")");
  }
  multiply(v, av);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    num += v[i] * av[i];
    den += v[i] * v[i];
  }
  result.eigenvalue = den > 0.0 ? num / den : 0.0;
  result.iterations = std::min(it, max_iter);
  double vmax = 0.0;
  for (double x : v) vmax = std::max(vmax, std::fabs(x));
  for (std::size_t i = 0; i < m; ++i) {
    result.score[members[i]] = vmax > 0.0 ? std::fabs(v[i]) / vmax : 0.0;
  }
  return result;
}

NetworkStats network_stats(const CoocGraph& graph, unsigned threads) {
  NetworkStats stats;
  if (graph.node_count() == 0) return stats;
  auto label = component_labels(graph);
  std::unordered_map<std::uint32_t, std::size_t> comp_size;
  for (auto l : label) ++comp_size[l];
  stats.components = comp_size.size();
  std::uint32_t largest = label[0];
  for (const auto& [l, size] : comp_size) {
    if (size > comp_size[largest] || (size == comp_size[largest] && l < largest)) largest = l;
  }
  stats.largest_component_size = comp_size[largest];
  if (stats.largest_component_size < 2) return stats;  // path stats undefined

  std::vector<std::uint32_t> members;
  for (std::uint32_t v = 0; v < graph.node_count(); ++v) {
    if (label[v] == largest) members.push_back(v);
  }
  std::vector<std::uint32_t> slot(graph.node_count(), UINT32_MAX);
  for (std::uint32_t i = 0; i < members.size(); ++i) slot[members[i]] = i;
  auto adj_full = adjacency(graph);
  std::vector<std::vector<std::uint32_t>> adj(members.size());
  for (std::uint32_t i = 0; i < members.size(); ++i) {
    for (auto nb : adj_full[members[i]]) {
      if (slot[nb] != UINT32_MAX) adj[i].push_back(slot[nb]);
    }
  }

  struct PathAcc {
    std::uint64_t total = 0;
    int max_dist = 0;
  };
  const std::size_t m = members.size();
  PathAcc acc = util::reduce_chunks<PathAcc>(
      m, 16, threads,
      [&](const util::ChunkRange& r, PathAcc& local) {
        std::vector<int> dist(m);
        std::vector<std::uint32_t> queue(m);
        for (std::size_t src = r.begin; src < r.end; ++src) {
          std::fill(dist.begin(), dist.end(), -1);
          std::size_t head = 0, tail = 0;
          dist[src] = 0;
          queue[tail++] = static_cast<std::uint32_t>(src);
          while (head < tail) {
            auto u = queue[head++];
            for (auto w : adj[u]) {
              if (dist[w] < 0) {
                dist[w] = dist[u] + 1;
                queue[tail++] = w;
              }
            }
          }
          for (std::size_t v = 0; v < m; ++v) {
            if (v == src) continue;
            local.total += static_cast<std::uint64_t>(dist[v]);
            local.max_dist = std::max(local.max_dist, dist[v]);
          }
        }
      },
      [](PathAcc& out, PathAcc& in) {
        out.total += in.total;
        out.max_dist = std::max(out.max_dist, in.max_dist);
      });
  double pairs = static_cast<double>(m) * static_cast<double>(m - 1);
  stats.avg_path_length = static_cast<double>(acc.total) / pairs;
  stats.diameter = acc.max_dist;
  return stats;
}

std::vector<std::optional<double>> centrality_by_rank(std::span<const double> centrality,
                                                      std::span<const std::uint64_t> occurrences,
                                                      std::span<const double> fractions) {
  if (centrality.size() != occurrences.size()) {
    throw DataError("centrality and occurrence vectors differ in length");
  }
  std::vector<std::uint32_t> order(centrality.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (occurrences[a] != occurrences[b]) return occurrences[a] > occurrences[b];
    return a < b;
  });
  std::vector<std::optional<double>> out;
  for (double f : fractions) {
    if (order.empty()) {
      out.push_back(std::nullopt);
      continue;
    }
    std::size_t m = static_cast<std::size_t>(
        std::ceil(f * static_cast<double>(order.size()) - 1e-12));
    m = std::clamp<std::size_t>(m, 1, order.size());
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += centrality[order[i]];
    out.push_back(s / static_cast<double>(m));
  }
  return out;
}

void write_edge_csv(const std::filesystem::path& path, const CoocGraph& graph,
                    std::span<const CoocGraph::Edge> edges) {
  std::ostringstream out;
  out << "source,target,weight\n";
  for (const auto& e : edges) {
    out << util::csv_escape(graph.labels[e.a]) << ',' << util::csv_escape(graph.labels[e.b])
        << ',' << util::format_double(e.weight) << '\n';
  }
  util::write_text(path, out.str());
}

void write_node_csv(const std::filesystem::path& path, const CoocGraph& graph,
                    std::span<const double> centrality) {
  std::ostringstream out;
  out << "topic,occurrences,category,centrality\n";
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    out << util::csv_escape(graph.labels[v]) << ',' << graph.occurrences[v] << ','
        << util::csv_escape(graph.categories[v]) << ','
        << (v < centrality.size() ? util::format_double(centrality[v]) : "") << '\n';
  }
  util::write_text(path, out.str());
}

}  // namespace divscope::netan
