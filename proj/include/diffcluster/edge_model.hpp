#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "diffcluster/common.hpp"
#include "diffcluster/knn_graph.hpp"

namespace dc {

enum class TransformKind { Exp, Sigmoid };

struct TransformConfig {
  TransformKind kind = TransformKind::Sigmoid;
  double tau = 0.25;      // exp temperature
  double delta = 7.5;     // sigmoid steepness
  double epsilon = -5.0;  // sigmoid offset; midpoint at d = -epsilon / delta
};

/// d = 2 - 2a for a in [-1, 1].
double dist_from_sim(double a);
/// exp(-d / tau).
double prob_exp(double d, double tau);
/// 1 / (1 + exp(delta * d + epsilon)).
double prob_sigmoid(double d, const TransformConfig& cfg = {});
/// Dispatches on cfg.kind.
double transform_distance(double d, const TransformConfig& cfg);

/// Row-normalized edge probabilities over a kNN graph.
///
/// `raw` holds p_ij, `norm` holds p_ij / s_i. When a graph is attached the
/// table also caches, for every (j, rank r), the probability node N_j[r]
/// assigns to j (zero when j is outside that node's list).
class EdgeProbTable {
 public:
  EdgeProbTable(Matrix raw, std::shared_ptr<const KnnGraph> graph);

  const Matrix& raw() const { return raw_; }
  const Matrix& norm() const { return norm_; }
  const Vector& row_sums() const { return row_sums_; }
  bool has_graph() const { return graph_ != nullptr; }
  const KnnGraph& graph() const;
  std::shared_ptr<const KnnGraph> graph_ptr() const { return graph_; }

  std::size_t size() const { return static_cast<std::size_t>(norm_.rows()); }
  std::size_t k() const { return static_cast<std::size_t>(norm_.cols()); }

  /// p_hat of neighbor `h` toward `j`, where h = N_j[rank].
  double incoming(std::size_t j, std::size_t rank) const { return incoming_(j, rank); }
  /// p_hat_{hj} by node ids; 0 when j is not among h's K neighbors.
  double prob_toward(std::size_t h, std::size_t j) const;

 private:
  Matrix raw_;
  Matrix norm_;
  Vector row_sums_;
  Matrix incoming_;
  std::shared_ptr<const KnnGraph> graph_;
};

/// Normalizes each row by its sum. Throws DegenerateInput on a non-positive row sum.
EdgeProbTable normalize_probs(Matrix raw, std::shared_ptr<const KnnGraph> graph = nullptr);

/// Transforms graph similarities into distances and probabilities, then normalizes.
EdgeProbTable build_edge_probs(std::shared_ptr<const KnnGraph> graph, const TransformConfig& cfg);

/// |A n B| / |A u B| over index sets (duplicates ignored).
double jaccard_basic(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// Per-node truncation depths k_hat.
struct TopKVector {
  std::vector<std::int32_t> khat;
};

/// 10 * ceil(topk / 10) when topk < K, else K; never exceeds K.
std::int32_t round_topk(std::int32_t topk, std::int32_t k);

/// Probability-weighted Jaccard over the full K-neighborhoods.
double edge_prob_weighted(const EdgeProbTable& table, std::size_t i, std::size_t j);

/// Same form as edge_prob_weighted, with both neighborhoods truncated to the
/// anchor's depth khat[i] (capped at K).
double edge_prob_topk(const EdgeProbTable& table, const TopKVector& khat, std::size_t i,
                      std::size_t j);

struct RefinedEdge {
  std::uint32_t src;
  std::uint32_t dst;
  double prob;

  friend bool operator==(const RefinedEdge&, const RefinedEdge&) = default;
};

/// All pairs (i, j in N_i^{khat_i}, j != i) scored with edge_prob_topk, merged
/// per unordered pair by max. Output has src < dst, sorted by (src, dst).
std::vector<RefinedEdge> refine_graph(const EdgeProbTable& table, const TopKVector& khat);

/// CSV with header `src,dst,prob`, probabilities at 9 significant digits.
void write_edges_csv(const std::vector<RefinedEdge>& edges, const std::string& path);
std::string edges_to_csv(const std::vector<RefinedEdge>& edges);
std::vector<RefinedEdge> read_edges_csv(const std::string& path);

}  // namespace dc
