#include "diffcluster/edge_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace dc {

double dist_from_sim(double a) {
  if (!(a >= -1.0 && a <= 1.0)) throw Error(ErrorKind::Range, "similarity outside [-1, 1]");
  return 2.0 - 2.0 * a;
}

double prob_exp(double d, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorKind::Parameter, "tau must be positive");
  return std::exp(-d / tau);
}

double prob_sigmoid(double d, const TransformConfig& cfg) {
  return 1.0 / (1.0 + std::exp(cfg.delta * d + cfg.epsilon));
}

double transform_distance(double d, const TransformConfig& cfg) {
  return cfg.kind == TransformKind::Exp ? prob_exp(d, cfg.tau) : prob_sigmoid(d, cfg);
}

EdgeProbTable::EdgeProbTable(Matrix raw, std::shared_ptr<const KnnGraph> graph)
    : raw_(std::move(raw)), graph_(std::move(graph)) {
  const Eigen::Index n = raw_.rows(), k = raw_.cols();
  row_sums_ = Vector::Zero(n);
  norm_ = Matrix(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < k; ++r) {
      if (!(raw_(i, r) >= 0.0) || !std::isfinite(raw_(i, r)))
        throw Error(ErrorKind::DegenerateInput, "negative or non-finite probability in row " + std::to_string(i));
      s += raw_(i, r);
    }
    if (!(s > 0.0)) throw Error(ErrorKind::DegenerateInput, "zero row sum in row " + std::to_string(i));
    row_sums_(i) = s;
    for (Eigen::Index r = 0; r < k; ++r) norm_(i, r) = raw_(i, r) / s;
  }

  if (!graph_) return;
  if (graph_->size() != static_cast<std::size_t>(n) || graph_->k() != static_cast<std::size_t>(k))
    throw Error(ErrorKind::Parameter, "probability table shape does not match graph");

  // rank_of[j] = sorted (neighbor, rank) pairs of N_j, for lookup of h's rank in j's list.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> rank_of(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
    auto& v = rank_of[j];
    v.reserve(static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < static_cast<std::size_t>(k); ++r)
      v.emplace_back(graph_->neighbor(j, r), static_cast<std::uint32_t>(r));
    std::sort(v.begin(), v.end());
  }
  incoming_ = Matrix::Zero(n, k);
  for (std::size_t h = 0; h < static_cast<std::size_t>(n); ++h) {
    for (std::size_t r = 0; r < static_cast<std::size_t>(k); ++r) {
      const std::uint32_t j = graph_->neighbor(h, r);
      const auto& v = rank_of[j];
      auto it = std::lower_bound(v.begin(), v.end(), std::pair<std::uint32_t, std::uint32_t>(
                                                          static_cast<std::uint32_t>(h), 0));
      if (it != v.end() && it->first == h)
        incoming_(static_cast<Eigen::Index>(j), it->second) = norm_(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(r));
    }
  }
}

const KnnGraph& EdgeProbTable::graph() const {
  if (!graph_) throw Error(ErrorKind::Parameter, "edge probability table has no attached graph");
  return *graph_;
}

double EdgeProbTable::prob_toward(std::size_t h, std::size_t j) const {
  const auto nb = graph().neighbors(h);
  for (std::size_t r = 0; r < nb.size(); ++r)
    if (nb[r] == j) return norm_(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(r));
  return 0.0;
}

EdgeProbTable normalize_probs(Matrix raw, std::shared_ptr<const KnnGraph> graph) {
  return EdgeProbTable(std::move(raw), std::move(graph));
}

EdgeProbTable build_edge_probs(std::shared_ptr<const KnnGraph> graph, const TransformConfig& cfg) {
  if (!graph) throw Error(ErrorKind::Parameter, "build_edge_probs: null graph");
  const std::size_t n = graph->size(), k = graph->k();
  Matrix raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < k; ++r)
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) =
          transform_distance(dist_from_sim(graph->sim(i, r)), cfg);
  return EdgeProbTable(std::move(raw), std::move(graph));
}

double jaccard_basic(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::Parameter, "jaccard_basic: empty set");
  std::vector<std::uint32_t> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  std::sort(sb.begin(), sb.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  std::size_t inter = 0;
  for (std::size_t x = 0, y = 0; x < sa.size() && y < sb.size();) {
    if (sa[x] < sb[y]) {
      ++x;
    } else if (sb[y] < sa[x]) {
      ++y;
    } else {
      ++inter, ++x, ++y;
    }
  }
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::int32_t round_topk(std::int32_t topk, std::int32_t k) {
  if (topk < 1) throw Error(ErrorKind::Parameter, "Top-K must be >= 1");
  if (topk >= k) return k;
  const std::int32_t up = 10 * ((topk + 9) / 10);
  return std::min(up, k);
}

namespace {

// Sorted (node, p_hat_ih) pairs over the first `depth` neighbors of i.
class AnchorPrefix {
 public:
  AnchorPrefix(const EdgeProbTable& t, std::size_t i, std::size_t depth) : depth_(depth) {
    const auto nb = t.graph().neighbors(i);
    entries_.reserve(depth);
    for (std::size_t r = 0; r < depth; ++r) {
      const double p = t.norm()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r));
      entries_.emplace_back(nb[r], p);
      out_sum_ += p;
    }
    std::sort(entries_.begin(), entries_.end());
  }

  const std::pair<std::uint32_t, double>* find(std::uint32_t h) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair<std::uint32_t, double>(h, -1.0));
    return (it != entries_.end() && it->first == h) ? &*it : nullptr;
  }
  double out_sum() const { return out_sum_; }
  std::size_t depth() const { return depth_; }

 private:
  std::vector<std::pair<std::uint32_t, double>> entries_;
  double out_sum_ = 0.0;
  std::size_t depth_;
};

double pair_prob(const EdgeProbTable& t, const AnchorPrefix& anchor, std::size_t j) {
  const auto nbj = t.graph().neighbors(j);
  double num = 0.0, in_sum = 0.0;
  for (std::size_t r = 0; r < anchor.depth(); ++r) {
    const double phj = t.incoming(j, r);
    in_sum += phj;
    if (const auto* hit = anchor.find(nbj[r])) num += hit->second + phj;
  }
  const double den = anchor.out_sum() + in_sum;
  // num <= den term by term; the clamp only absorbs rounding.
  return den > 0.0 ? std::min(1.0, num / den) : 0.0;
}

std::size_t depth_for(const EdgeProbTable& t, const TopKVector& khat, std::size_t i) {
  if (khat.khat.size() != t.size())
    throw Error(ErrorKind::Parameter, "k_hat vector length does not match node count");
  const std::int32_t v = khat.khat[i];
  if (v < 1) throw Error(ErrorKind::Parameter, "k_hat entries must be >= 1");
  return std::min<std::size_t>(static_cast<std::size_t>(v), t.k());
}

void check_pair(const EdgeProbTable& t, std::size_t i, std::size_t j) {
  if (i >= t.size() || j >= t.size()) throw Error(ErrorKind::Parameter, "node id out of range");
}

}  // namespace

double edge_prob_weighted(const EdgeProbTable& table, std::size_t i, std::size_t j) {
  check_pair(table, i, j);
  return pair_prob(table, AnchorPrefix(table, i, table.k()), j);
}

double edge_prob_topk(const EdgeProbTable& table, const TopKVector& khat, std::size_t i,
                      std::size_t j) {
  check_pair(table, i, j);
  return pair_prob(table, AnchorPrefix(table, i, depth_for(table, khat, i)), j);
}

std::vector<RefinedEdge> refine_graph(const EdgeProbTable& table, const TopKVector& khat) {
  const KnnGraph& g = table.graph();
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> best;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t depth = depth_for(table, khat, i);
    const AnchorPrefix anchor(table, i, depth);
    for (std::size_t r = 0; r < depth; ++r) {
      const std::uint32_t j = g.neighbor(i, r);
      if (j == i) continue;
      const double p = pair_prob(table, anchor, j);
      const auto a = static_cast<std::uint32_t>(i);
      auto [it, inserted] = best.emplace(std::pair(std::min(a, j), std::max(a, j)), p);
      if (!inserted) it->second = std::max(it->second, p);
    }
  }
  std::vector<RefinedEdge> out;
  out.reserve(best.size());
  for (const auto& [key, p] : best) out.push_back({key.first, key.second, p});
  return out;
}

std::string edges_to_csv(const std::vector<RefinedEdge>& edges) {
  std::string s = "src,dst,prob\n";
  char buf[64];
  for (const auto& e : edges) {
    std::snprintf(buf, sizeof buf, "%u,%u,%.9g\n", e.src, e.dst, e.prob);
    s += buf;
  }
  return s;
}

void write_edges_csv(const std::vector<RefinedEdge>& edges, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Parameter, "cannot open for writing: " + path);
  out << edges_to_csv(edges);
}

std::vector<RefinedEdge> read_edges_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parameter, "cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("src,dst,prob", 0) != 0)
    throw Error(ErrorKind::Format, path + ": missing `src,dst,prob` header");
  std::vector<RefinedEdge> edges;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    unsigned long long s = 0, d = 0;
    double p = 0.0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(line);
    if (!(ss >> s >> c1 >> d >> c2 >> p) || c1 != ',' || c2 != ',')
      throw Error(ErrorKind::Format, path + ":" + std::to_string(lineno) + ": malformed edge row");
    edges.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(d), p});
  }
  return edges;
}

}  // namespace dc
