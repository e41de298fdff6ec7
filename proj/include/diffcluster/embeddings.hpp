#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diffcluster/common.hpp"

namespace dc {

/// Label value reserved for "no identity".
inline constexpr std::int32_t kUnlabeled = -1;

/// N x d feature matrix with optional per-row identity labels.
///
/// Rows are held in double precision. The on-disk format stores f32, so a
/// save/load round trip is exact for values representable in single
/// precision (which includes anything previously loaded from disk).
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(Matrix rows, std::optional<std::vector<std::int32_t>> labels = std::nullopt,
               bool normalized = false);

  std::size_t count() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows_.cols()); }
  const Matrix& rows() const { return rows_; }
  const std::optional<std::vector<std::int32_t>>& labels() const { return labels_; }
  bool normalized() const { return normalized_; }
  bool has_labels() const { return labels_.has_value(); }

  EmbeddingSet with_labels(std::vector<std::int32_t> labels) const;

 private:
  Matrix rows_;
  std::optional<std::vector<std::int32_t>> labels_;
  bool normalized_ = false;
};

struct SyntheticSpec {
  std::int64_t num_clusters = 20;
  std::int64_t points_per_cluster = 50;
  std::int64_t dim = 64;
  double intra_spread = 0.15;
  std::uint64_t seed = 0;
};

/// Unit-sphere Gaussian clusters: each point is normalize(center + spread * g).
EmbeddingSet generate_synthetic(const SyntheticSpec& spec);

/// Rescales every row to unit norm. Throws DegenerateInput naming the first zero row.
EmbeddingSet l2_normalize(const EmbeddingSet& e);

void save_embeddings(const EmbeddingSet& e, const std::string& path);
EmbeddingSet load_embeddings(const std::string& path);
std::vector<char> encode_embeddings(const EmbeddingSet& e);
EmbeddingSet decode_embeddings(std::vector<char> bytes);

/// One integer per line; blank lines are skipped.
std::vector<std::int32_t> load_labels_text(const std::string& path);

}  // namespace dc
