#include "diffcluster/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "binary_io.hpp"

namespace dc {

namespace {

constexpr std::uint16_t kEmbeddingVersion = 1;
constexpr std::uint16_t kFlagNormalized = 1u << 0;
constexpr std::uint16_t kFlagLabels = 1u << 1;

void check_finite(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j)))
        throw Error(ErrorKind::DegenerateInput,
                    "non-finite entry at row " + std::to_string(i) + ", column " + std::to_string(j));
}

}  // namespace

EmbeddingSet::EmbeddingSet(Matrix rows, std::optional<std::vector<std::int32_t>> labels,
                           bool normalized)
    : rows_(std::move(rows)), labels_(std::move(labels)), normalized_(normalized) {
  if (rows_.rows() < 1) throw Error(ErrorKind::Parameter, "embedding set needs at least one row");
  check_finite(rows_);
  if (labels_ && labels_->size() != static_cast<std::size_t>(rows_.rows()))
    throw Error(ErrorKind::Parameter, "label count " + std::to_string(labels_->size()) +
                                          " does not match row count " +
                                          std::to_string(rows_.rows()));
}

EmbeddingSet EmbeddingSet::with_labels(std::vector<std::int32_t> labels) const {
  return EmbeddingSet(rows_, std::move(labels), normalized_);
}

EmbeddingSet generate_synthetic(const SyntheticSpec& spec) {
  if (spec.dim < 2) throw Error(ErrorKind::InvalidSpec, "dim must be >= 2");
  if (spec.num_clusters < 1 || spec.points_per_cluster < 1)
    throw Error(ErrorKind::InvalidSpec, "cluster and point counts must be positive");
  if (!std::isfinite(spec.intra_spread) || spec.intra_spread < 0.0)
    throw Error(ErrorKind::InvalidSpec, "intra_spread must be finite and non-negative");

  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto n = static_cast<Eigen::Index>(spec.num_clusters * spec.points_per_cluster);
  Matrix rows(n, d);
  std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
  Rng rng(spec.seed);

  Eigen::Index row = 0;
  for (std::int64_t c = 0; c < spec.num_clusters; ++c) {
    Vector center(d);
    do {
      for (Eigen::Index j = 0; j < d; ++j) center(j) = rng.normal();
    } while (center.norm() == 0.0);
    center /= center.norm();
    for (std::int64_t p = 0; p < spec.points_per_cluster; ++p, ++row) {
      Vector v(d);
      for (Eigen::Index j = 0; j < d; ++j) v(j) = center(j) + spec.intra_spread * rng.normal();
      rows.row(row) = (v / v.norm()).transpose();
      labels[static_cast<std::size_t>(row)] = static_cast<std::int32_t>(c);
    }
  }
  return EmbeddingSet(std::move(rows), std::move(labels), true);
}

EmbeddingSet l2_normalize(const EmbeddingSet& e) {
  Matrix rows = e.rows();
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double norm = rows.row(i).norm();
    if (norm == 0.0)
      throw Error(ErrorKind::DegenerateInput, "zero-norm row " + std::to_string(i));
    rows.row(i) /= norm;
  }
  return EmbeddingSet(std::move(rows), e.labels(), true);
}

std::vector<char> encode_embeddings(const EmbeddingSet& e) {
  io::Writer w;
  w.magic("DCEB");
  w.put<std::uint16_t>(kEmbeddingVersion);
  std::uint16_t flags = 0;
  if (e.normalized()) flags |= kFlagNormalized;
  if (e.has_labels()) flags |= kFlagLabels;
  w.put<std::uint16_t>(flags);
  w.put<std::uint64_t>(e.count());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(e.dim()));
  const Matrix& m = e.rows();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.put<float>(static_cast<float>(m(i, j)));
  if (e.has_labels())
    for (auto l : *e.labels()) w.put<std::int32_t>(l);
  return w.data();
}

EmbeddingSet decode_embeddings(std::vector<char> bytes) {
  io::Reader r(std::move(bytes));
  r.expect_magic("DCEB");
  const std::size_t version_at = r.offset();
  const auto version = r.get<std::uint16_t>("version");
  if (version != kEmbeddingVersion)
    throw FormatError("unsupported version " + std::to_string(version), version_at);
  const auto flags = r.get<std::uint16_t>("flags");
  const auto n = r.get<std::uint64_t>("row count");
  const std::size_t dim_at = r.offset();
  const auto d = r.get<std::uint32_t>("dimension");
  if (n == 0) throw FormatError("row count is zero", dim_at - sizeof(std::uint64_t));
  if (d < 1) throw FormatError("dimension is zero", dim_at);

  const std::size_t row_bytes = std::size_t{d} * sizeof(float);
  if (n > (std::numeric_limits<std::size_t>::max() / row_bytes))
    throw FormatError("dimension mismatch: N*d overflows", dim_at);
  Matrix rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < n; ++i) {
    r.need(row_bytes, ("row " + std::to_string(i)).c_str());
    for (std::uint32_t j = 0; j < d; ++j)
      rows(static_cast<Eigen::Index>(i), j) = static_cast<double>(r.get<float>("row data"));
  }
  std::optional<std::vector<std::int32_t>> labels;
  if (flags & kFlagLabels) {
    labels.emplace(n);
    r.need(n * sizeof(std::int32_t), "labels");
    for (auto& l : *labels) l = r.get<std::int32_t>("labels");
  }
  if (!r.at_end()) throw FormatError("dimension mismatch: trailing bytes", r.offset());
  EmbeddingSet e(std::move(rows), std::move(labels), false);
  // f32 storage perturbs unit norms by ~1e-7; restore them in double precision.
  return (flags & kFlagNormalized) ? l2_normalize(e) : e;
}

void save_embeddings(const EmbeddingSet& e, const std::string& path) {
  io::Writer w;
  const auto bytes = encode_embeddings(e);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

EmbeddingSet load_embeddings(const std::string& path) {
  return decode_embeddings(io::read_file(path));
}

std::vector<std::int32_t> load_labels_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parameter, "cannot open for reading: " + path);
  std::vector<std::int32_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    long long v;
    if (!(ss >> v) || v < std::numeric_limits<std::int32_t>::min() ||
        v > std::numeric_limits<std::int32_t>::max())
      throw Error(ErrorKind::Format, path + ":" + std::to_string(lineno) + ": not a 32-bit integer");
    labels.push_back(static_cast<std::int32_t>(v));
  }
  return labels;
}

}  // namespace dc
