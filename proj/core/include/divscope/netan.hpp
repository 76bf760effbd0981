#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divscope/topics.hpp"

namespace divscope::netan {

// Undirected weighted topic graph; edge weight counts the articles where
// both endpoints are present. Nodes are stored explicitly so isolated topics
// still count as components.
struct CoocGraph {
  struct Edge {
    std::uint32_t a = 0;  // node indices, a < b
    std::uint32_t b = 0;
    double weight = 0.0;
  };

  std::vector<std::string> labels;         // per node
  std::vector<std::uint64_t> occurrences;  // per node
  std::vector<std::string> categories;     // per node, may be empty strings
  std::vector<Edge> edges;                 // sorted by (a, b), no self-loops

  std::size_t node_count() const { return labels.size(); }

  static CoocGraph from_edges(std::size_t nodes, std::vector<Edge> edges);
};

// Topics with at least one presence in the rows become nodes.
CoocGraph build_cooc_graph(const topics::TopicModel& model,
                           const topics::PresenceMatrix& presence,
                           std::span<const std::size_t> rows,
                           std::span<const std::string> assignment = {},
                           unsigned threads = 1);

// Per-component maximum spanning forest, greedy on descending weight with
// (min id, max id) tie-breaking. Returns edges sorted by (a, b).
std::vector<CoocGraph::Edge> max_spanning_tree(const CoocGraph& graph);

struct CentralityResult {
  std::vector<double> score;      // normalized to max 1; 0 outside the component
  std::vector<bool> in_largest;   // component membership flags
  double eigenvalue = 0.0;
  int iterations = 0;
};

// Power iteration on the weighted adjacency of the largest component (a unit
// shift keeps the iteration aperiodic). Non-convergence raises NumericError.
CentralityResult eigenvector_centrality(const CoocGraph& graph, double tol = 1e-10,
                                        int max_iter = 1000);

struct NetworkStats {
  std::size_t components = 0;
  std::size_t largest_component_size = 0;
  std::optional<double> avg_path_length;  // unweighted hops, unordered pairs
  std::optional<int> diameter;
};

NetworkStats network_stats(const CoocGraph& graph, unsigned threads = 1);

// Mean centrality among the top ceil(f * n) nodes by occurrence count.
std::vector<std::optional<double>> centrality_by_rank(std::span<const double> centrality,
                                                      std::span<const std::uint64_t> occurrences,
                                                      std::span<const double> fractions);

void write_edge_csv(const std::filesystem::path& path, const CoocGraph& graph,
                    std::span<const CoocGraph::Edge> edges);
void write_node_csv(const std::filesystem::path& path, const CoocGraph& graph,
                    std::span<const double> centrality);

}  // namespace divscope::netan
