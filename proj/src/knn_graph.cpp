#include "diffcluster/knn_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "binary_io.hpp"

namespace dc {

namespace {

// Sorts row entries [1, k) by similarity descending, index ascending; slot 0 stays put.
void sort_row_tail(std::span<std::uint32_t> nbrs, std::span<double> sims) {
  const std::size_t k = nbrs.size();
  std::vector<std::size_t> order(k - 1);
  std::iota(order.begin(), order.end(), 1);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return nbrs[a] < nbrs[b];
  });
  std::vector<std::uint32_t> n2(k);
  std::vector<double> s2(k);
  n2[0] = nbrs[0];
  s2[0] = sims[0];
  for (std::size_t r = 1; r < k; ++r) {
    n2[r] = nbrs[order[r - 1]];
    s2[r] = sims[order[r - 1]];
  }
  std::copy(n2.begin(), n2.end(), nbrs.begin());
  std::copy(s2.begin(), s2.end(), sims.begin());
}

}  // namespace

KnnGraph::KnnGraph(std::size_t n, std::size_t k, std::vector<std::uint32_t> neighbors,
                   std::vector<double> sims)
    : n_(n), k_(k), neighbors_(std::move(neighbors)), sims_(std::move(sims)) {
  if (k_ < 1 || k_ > n_) throw Error(ErrorKind::Parameter, "graph needs 1 <= K <= N");
  if (neighbors_.size() != n_ * k_ || sims_.size() != n_ * k_)
    throw Error(ErrorKind::Parameter, "graph table sizes do not match N*K");
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t r = 0; r < k_; ++r)
      if (neighbors_[i * k_ + r] >= n_)
        throw Error(ErrorKind::Parameter, "neighbor index out of range in row " + std::to_string(i));
}

KnnGraph KnnGraph::rounded_to_storage() const {
  std::vector<double> s(sims_.size());
  std::transform(sims_.begin(), sims_.end(), s.begin(),
                 [](double v) { return static_cast<double>(static_cast<float>(v)); });
  return KnnGraph(n_, k_, neighbors_, std::move(s));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::Parameter, "cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::DegenerateInput, "cosine_similarity: zero vector");
  // sqrt(na)*sqrt(nb) is commutative bit-for-bit, so the result is symmetric.
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

KnnGraph build_knn(const EmbeddingSet& e, std::size_t k, unsigned threads) {
  const std::size_t n = e.count();
  if (k < 1 || k > n)
    throw Error(ErrorKind::Parameter,
                "k = " + std::to_string(k) + " outside [1, N = " + std::to_string(n) + "]");
  if (!e.normalized()) throw Error(ErrorKind::Parameter, "build_knn requires L2-normalized embeddings");

  const Matrix& x = e.rows();
  std::vector<std::uint32_t> nbrs(n * k);
  std::vector<double> sims(n * k);

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> cand(n - 1);
    std::vector<double> row_sims(n);
    for (std::size_t i = begin; i < end; ++i) {
      const std::span<const double> fi(x.row(static_cast<Eigen::Index>(i)).data(), x.cols());
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const std::span<const double> fj(x.row(static_cast<Eigen::Index>(j)).data(), x.cols());
        row_sims[j] = cosine_similarity(fi, fj);
      }
      std::size_t c = 0;
      for (std::uint32_t j = 0; j < n; ++j)
        if (j != i) cand[c++] = j;
      auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (row_sims[a] != row_sims[b]) return row_sims[a] > row_sims[b];
        return a < b;
      };
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end(),
                        better);
      nbrs[i * k] = static_cast<std::uint32_t>(i);
      sims[i * k] = 1.0;
      for (std::size_t r = 1; r < k; ++r) {
        nbrs[i * k + r] = cand[r - 1];
        sims[i * k + r] = row_sims[cand[r - 1]];
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, end = std::min(n, b + chunk);
      if (b < end) pool.emplace_back(work, b, end);
    }
  }
  return KnnGraph(n, k, std::move(nbrs), std::move(sims));
}

KnnGraph inject_noise(const KnnGraph& g, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw Error(ErrorKind::Range, "noise ratio must lie in [0, 1]");
  const std::size_t n = g.size(), k = g.k();
  std::vector<std::uint32_t> nbrs = g.neighbor_table();
  std::vector<double> sims = g.sim_table();

  // Candidate positions are every non-self slot; choose a uniform subset by partial Fisher-Yates.
  const std::size_t slots = n * (k - 1);
  const auto chosen = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(slots)));
  std::vector<std::size_t> pos(slots);
  std::iota(pos.begin(), pos.end(), 0);
  Rng rng(seed);
  for (std::size_t t = 0; t < chosen; ++t) {
    const std::size_t pick = t + static_cast<std::size_t>(rng.below(slots - t));
    std::swap(pos[t], pos[pick]);
    const std::size_t row = pos[t] / (k - 1), col = 1 + pos[t] % (k - 1);
    sims[row * k + col] = rng.uniform();
  }

  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> row(sims.data() + i * k, k);
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    const double mn = *lo, mx = *hi;
    for (double& v : row) v = (mx > mn) ? (v - mn) / (mx - mn) : 1.0;
    // Self is pinned to 1 and kept first even when a perturbed entry ties it.
    row[0] = 1.0;
    if (k > 1) sort_row_tail({nbrs.data() + i * k, k}, row);
  }
  return KnnGraph(n, k, std::move(nbrs), std::move(sims));
}

std::vector<char> encode_graph(const KnnGraph& g) {
  io::Writer w;
  w.magic("DCKG");
  w.put<std::uint64_t>(g.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.k()));
  for (auto v : g.neighbor_table()) w.put<std::uint32_t>(v);
  for (auto v : g.sim_table()) w.put<float>(static_cast<float>(v));
  return w.data();
}

KnnGraph decode_graph(std::vector<char> bytes) {
  io::Reader r(std::move(bytes));
  r.expect_magic("DCKG");
  const auto n = r.get<std::uint64_t>("node count");
  const std::size_t k_at = r.offset();
  const auto k = r.get<std::uint32_t>("K");
  if (k < 1 || k > n) throw FormatError("K outside [1, N]", k_at);
  const std::size_t cells = n * k;
  r.need(cells * (sizeof(std::uint32_t) + sizeof(float)), "graph tables");
  std::vector<std::uint32_t> nbrs(cells);
  std::vector<double> sims(cells);
  for (auto& v : nbrs) {
    const std::size_t at = r.offset();
    v = r.get<std::uint32_t>("neighbors");
    if (v >= n) throw FormatError("neighbor index out of range", at);
  }
  for (auto& v : sims) v = static_cast<double>(r.get<float>("similarities"));
  if (!r.at_end()) throw FormatError("trailing bytes", r.offset());
  return KnnGraph(n, k, std::move(nbrs), std::move(sims));
}

void save_graph(const KnnGraph& g, const std::string& path) {
  io::Writer w;
  const auto bytes = encode_graph(g);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

KnnGraph load_graph(const std::string& path) { return decode_graph(io::read_file(path)); }

}  // namespace dc
