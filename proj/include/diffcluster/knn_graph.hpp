#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffcluster/embeddings.hpp"

namespace dc {

/// Exact kNN graph: row i lists the K most similar nodes to i (self first),
/// with aligned cosine similarities in non-increasing order.
class KnnGraph {
 public:
  KnnGraph() = default;
  KnnGraph(std::size_t n, std::size_t k, std::vector<std::uint32_t> neighbors,
           std::vector<double> sims);

  std::size_t size() const { return n_; }
  std::size_t k() const { return k_; }

  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {neighbors_.data() + i * k_, k_};
  }
  std::span<const double> sims(std::size_t i) const { return {sims_.data() + i * k_, k_}; }
  std::uint32_t neighbor(std::size_t i, std::size_t r) const { return neighbors_[i * k_ + r]; }
  double sim(std::size_t i, std::size_t r) const { return sims_[i * k_ + r]; }

  const std::vector<std::uint32_t>& neighbor_table() const { return neighbors_; }
  const std::vector<double>& sim_table() const { return sims_; }

  /// Copy with every similarity rounded through f32, i.e. exactly what the
  /// DCKG format stores.
  KnnGraph rounded_to_storage() const;

  friend bool operator==(const KnnGraph&, const KnnGraph&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<std::uint32_t> neighbors_;
  std::vector<double> sims_;
};

/// a.b / (|a||b|), clamped to [-1, 1]. Bitwise symmetric in its arguments.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Brute-force exact kNN over cosine similarity. Ties are broken by ascending
/// node index; node i is always its own first neighbor with similarity 1.
KnnGraph build_knn(const EmbeddingSet& e, std::size_t k, unsigned threads = 1);

/// Replaces floor(ratio * N * (K-1)) randomly chosen non-self similarities with
/// U[0,1) draws, min-max normalizes each row into [0,1] and re-sorts rows.
KnnGraph inject_noise(const KnnGraph& g, double ratio, std::uint64_t seed);

std::vector<char> encode_graph(const KnnGraph& g);
KnnGraph decode_graph(std::vector<char> bytes);
void save_graph(const KnnGraph& g, const std::string& path);
KnnGraph load_graph(const std::string& path);

}  // namespace dc
