#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffcluster/edge_model.hpp"

namespace dc {

struct WeightedEdge {
  std::uint32_t a;
  std::uint32_t b;
  double w;
};

/// Undirected graph without self-loops or duplicate pairs; weights finite and > 0.
class WeightedGraph {
 public:
  WeightedGraph() = default;
  WeightedGraph(std::size_t n, std::vector<WeightedEdge> edges);

  std::size_t size() const { return n_; }
  const std::vector<WeightedEdge>& edges() const { return edges_; }

  struct Arc {
    std::uint32_t to;
    double w;
  };
  /// Adjacency lists in ascending neighbor order.
  const std::vector<std::vector<Arc>>& adjacency() const { return adj_; }
  /// Sum of incident edge weights.
  const std::vector<double>& strength() const { return strength_; }
  double total_weight() const { return total_; }

 private:
  std::size_t n_ = 0;
  std::vector<WeightedEdge> edges_;
  std::vector<std::vector<Arc>> adj_;
  std::vector<double> strength_;
  double total_ = 0.0;
};

/// Dense module ids, numbered in order of each module's smallest node.
struct ClusterAssignment {
  std::vector<std::int32_t> module;

  std::size_t size() const { return module.size(); }
  std::size_t modules() const;
  /// Relabels ids so they are dense and ordered by smallest member.
  static ClusterAssignment canonical(const std::vector<std::int32_t>& ids);
};

/// Keeps edges with prob >= eta and prob > 0, merged per unordered pair by max.
WeightedGraph threshold_edges(std::size_t n, const std::vector<RefinedEdge>& edges, double eta);

ClusterAssignment connected_components(const WeightedGraph& g);

/// Two-level map equation in bits under undirected flow:
/// visit rate = strength / 2W, module exit rate = cut / 2W.
double map_codelength(const WeightedGraph& g, const ClusterAssignment& partition);

/// Per connected component: greedy single-node moves from singletons (nodes in
/// ascending order), then merges of linked module pairs, repeated until neither
/// gains more than 1e-12 bits. Never codes longer than one module per component.
ClusterAssignment map_cluster(const WeightedGraph& g);

std::string partition_to_csv(const ClusterAssignment& p);
void write_partition_csv(const ClusterAssignment& p, const std::string& path);
ClusterAssignment read_partition_csv(const std::string& path);

}  // namespace dc
