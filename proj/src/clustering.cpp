#include "diffcluster/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace dc {

namespace {

constexpr double kMinGain = 1e-12;

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

// Greedy optimizer state over one set of nodes (a connected component).
class MapOptimizer {
 public:
  MapOptimizer(const WeightedGraph& g, const std::vector<std::uint32_t>& nodes)
      : g_(g), nodes_(nodes), local_(g.size(), -1) {
    double total = 0.0;
    for (auto v : nodes_) total += g.strength()[v];
    two_w_ = total;  // sum of strengths = 2W within the component
    for (std::size_t i = 0; i < nodes_.size(); ++i) local_[nodes_[i]] = static_cast<int>(i);
    module_.resize(nodes_.size());
    std::iota(module_.begin(), module_.end(), 0);
    flow_.resize(nodes_.size());
    cut_.resize(nodes_.size());
    members_.assign(nodes_.size(), 1);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      flow_[i] = g.strength()[nodes_[i]] / two_w_;
      cut_[i] = g.strength()[nodes_[i]];
    }
    mflow_ = flow_;
    exit_total_ = std::accumulate(cut_.begin(), cut_.end(), 0.0) / two_w_;
    link_.assign(nodes_.size(), 0.0);
  }

  void run() {
    do sweep();
    while (merge_modules());
    // Local moves can strand the walk in a split that codes worse than no
    // split at all; restart from one module in that case.
    if (relative_codelength() > kMinGain) {
      std::fill(module_.begin(), module_.end(), 0);
      std::fill(cut_.begin(), cut_.end(), 0.0);
      std::fill(mflow_.begin(), mflow_.end(), 0.0);
      std::fill(members_.begin(), members_.end(), 0);
      mflow_[0] = 1.0;
      members_[0] = static_cast<int>(nodes_.size());
      exit_total_ = 0.0;
      sweep();
    }
  }

  std::vector<int> modules() const { return module_; }

 private:
  double module_term(double q, double p) const { return -2.0 * plogp(q) + plogp(q + p); }

  bool try_move(std::size_t i) {
    const std::uint32_t v = nodes_[i];
    const int from = module_[i];
    const double s = g_.strength()[v];
    const double pa = flow_[i];

    // Weight from v into each module.
    touched_.clear();
    for (const auto& arc : g_.adjacency()[v]) {
      const int m = module_[static_cast<std::size_t>(local_[arc.to])];
      if (link_[static_cast<std::size_t>(m)] == 0.0) touched_.push_back(m);
      link_[static_cast<std::size_t>(m)] += arc.w;
    }
    const double w_from = link_[static_cast<std::size_t>(from)];

    const double q_from = cut_[static_cast<std::size_t>(from)] / two_w_;
    const double p_from = module_flow(from);
    const double q_from_new = (cut_[static_cast<std::size_t>(from)] - s + 2.0 * w_from) / two_w_;
    const double p_from_new = p_from - pa;
    const double base_from = module_term(q_from, p_from);
    const double new_from = members_[static_cast<std::size_t>(from)] == 1 ? 0.0 : module_term(q_from_new, p_from_new);

    double best_gain = kMinGain;
    int best = -1;
    auto consider = [&](int to, double w_to, double cut_to, double p_to) {
      const double q_to = cut_to / two_w_;
      const double q_to_new = (cut_to + s - 2.0 * w_to) / two_w_;
      const double exit_new = exit_total_ - q_from + q_from_new - q_to + q_to_new;
      const double before = plogp(exit_total_) + base_from + (to >= 0 ? module_term(q_to, p_to) : 0.0);
      const double after = plogp(exit_new) + new_from + module_term(q_to_new, p_to + pa);
      const double gain = before - after;
      if (gain > best_gain) {
        best_gain = gain;
        best = to;
      }
    };
    // Every existing module of the component, in id order, then a fresh module.
    for (std::size_t m = 0; m < cut_.size(); ++m) {
      const int mi = static_cast<int>(m);
      if (mi == from || members_[m] == 0) continue;
      consider(mi, link_[m], cut_[m], module_flow(mi));
    }
    if (members_[static_cast<std::size_t>(from)] > 1) consider(-2, 0.0, 0.0, 0.0);

    for (int m : touched_) link_[static_cast<std::size_t>(m)] = 0.0;
    if (best == -1) return false;

    int to = best;
    double w_to = 0.0;
    if (to == -2) {
      to = static_cast<int>(std::find(members_.begin(), members_.end(), 0) - members_.begin());
    } else {
      for (const auto& arc : g_.adjacency()[v])
        if (module_[static_cast<std::size_t>(local_[arc.to])] == to) w_to += arc.w;
    }
    const auto f = static_cast<std::size_t>(from), t = static_cast<std::size_t>(to);
    exit_total_ -= (cut_[f] + cut_[t]) / two_w_;
    cut_[f] += -s + 2.0 * w_from;
    cut_[t] += s - 2.0 * w_to;
    exit_total_ += (cut_[f] + cut_[t]) / two_w_;
    --members_[f];
    ++members_[t];
    // An emptied module is reset exactly rather than left with rounding residue.
    mflow_[f] = members_[f] == 0 ? 0.0 : mflow_[f] - pa;
    mflow_[t] += pa;
    if (members_[f] == 0) cut_[f] = 0.0;
    module_[i] = to;
    return true;
  }

  double module_flow(int m) const { return mflow_[static_cast<std::size_t>(m)]; }

  void sweep() {
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::size_t i = 0; i < nodes_.size(); ++i) moved |= try_move(i);
    }
  }

  // Codelength minus the constant node-entropy term; 0 for the one-module split.
  double relative_codelength() const {
    double l = plogp(exit_total_);
    for (std::size_t m = 0; m < cut_.size(); ++m) {
      if (members_[m] == 0) continue;
      const double q = cut_[m] / two_w_;
      l += module_term(q, mflow_[m]);
    }
    return l;
  }

  // Merges the pair of linked modules with the largest codelength gain, one
  // pair at a time, until no merge gains. Returns whether anything merged.
  bool merge_modules() {
    bool any = false;
    for (;;) {
      std::map<std::pair<int, int>, double> between;
      for (auto v : nodes_)
        for (const auto& arc : g_.adjacency()[v]) {
          if (arc.to <= v) continue;
          const int a = module_[static_cast<std::size_t>(local_[v])];
          const int b = module_[static_cast<std::size_t>(local_[arc.to])];
          if (a != b) between[std::minmax(a, b)] += arc.w;
        }
      double best_gain = kMinGain;
      std::pair<int, int> best{-1, -1};
      for (const auto& [ab, w] : between) {
        const auto a = static_cast<std::size_t>(ab.first), b = static_cast<std::size_t>(ab.second);
        const double qa = cut_[a] / two_w_, qb = cut_[b] / two_w_;
        const double q_new = (cut_[a] + cut_[b] - 2.0 * w) / two_w_;
        const double exit_new = exit_total_ - qa - qb + q_new;
        const double before = plogp(exit_total_) + module_term(qa, mflow_[a]) + module_term(qb, mflow_[b]);
        const double after = plogp(exit_new) + module_term(q_new, mflow_[a] + mflow_[b]);
        if (before - after > best_gain) {
          best_gain = before - after;
          best = ab;
        }
      }
      if (best.first < 0) return any;
      const auto a = static_cast<std::size_t>(best.first), b = static_cast<std::size_t>(best.second);
      const double w = between[best];
      exit_total_ -= (cut_[a] + cut_[b]) / two_w_;
      cut_[a] += cut_[b] - 2.0 * w;
      exit_total_ += cut_[a] / two_w_;
      cut_[b] = 0.0;
      mflow_[a] += mflow_[b];
      mflow_[b] = 0.0;
      members_[a] += members_[b];
      members_[b] = 0;
      for (auto& m : module_)
        if (m == best.second) m = best.first;
      any = true;
    }
  }

  const WeightedGraph& g_;
  const std::vector<std::uint32_t>& nodes_;
  std::vector<int> local_;
  std::vector<int> module_;
  std::vector<double> flow_;
  std::vector<double> cut_;
  std::vector<double> mflow_;
  std::vector<int> members_;
  std::vector<double> link_;
  std::vector<int> touched_;
  double two_w_ = 0.0;
  double exit_total_ = 0.0;
};

}  // namespace

WeightedGraph::WeightedGraph(std::size_t n, std::vector<WeightedEdge> edges)
    : n_(n), edges_(std::move(edges)), adj_(n), strength_(n, 0.0) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
  seen.reserve(edges_.size());
  for (const auto& e : edges_) {
    if (e.a >= n || e.b >= n) throw Error(ErrorKind::Parameter, "edge endpoint out of range");
    if (e.a == e.b) throw Error(ErrorKind::Parameter, "self-loop on node " + std::to_string(e.a));
    if (!(e.w > 0.0) || !std::isfinite(e.w)) throw Error(ErrorKind::Parameter, "edge weights must be finite and > 0");
    seen.emplace_back(std::min(e.a, e.b), std::max(e.a, e.b));
    adj_[e.a].push_back({e.b, e.w});
    adj_[e.b].push_back({e.a, e.w});
    strength_[e.a] += e.w;
    strength_[e.b] += e.w;
    total_ += e.w;
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw Error(ErrorKind::Parameter, "duplicate undirected edge");
  for (auto& a : adj_) std::sort(a.begin(), a.end(), [](const Arc& x, const Arc& y) { return x.to < y.to; });
}

std::size_t ClusterAssignment::modules() const {
  std::int32_t mx = -1;
  for (auto m : module) mx = std::max(mx, m);
  return static_cast<std::size_t>(mx + 1);
}

ClusterAssignment ClusterAssignment::canonical(const std::vector<std::int32_t>& ids) {
  std::map<std::int32_t, std::int32_t> remap;
  ClusterAssignment out;
  out.module.reserve(ids.size());
  for (auto id : ids) {
    auto [it, inserted] = remap.emplace(id, static_cast<std::int32_t>(remap.size()));
    out.module.push_back(it->second);
  }
  return out;
}

WeightedGraph threshold_edges(std::size_t n, const std::vector<RefinedEdge>& edges, double eta) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> best;
  for (const auto& e : edges) {
    if (!(e.prob >= 0.0 && e.prob <= 1.0)) throw Error(ErrorKind::Range, "edge probability outside [0, 1]");
    if (e.src == e.dst || e.prob < eta || e.prob <= 0.0) continue;
    auto [it, inserted] = best.emplace(std::pair(std::min(e.src, e.dst), std::max(e.src, e.dst)), e.prob);
    if (!inserted) it->second = std::max(it->second, e.prob);
  }
  std::vector<WeightedEdge> kept;
  kept.reserve(best.size());
  for (const auto& [k, w] : best) kept.push_back({k.first, k.second, w});
  return WeightedGraph(n, std::move(kept));
}

ClusterAssignment connected_components(const WeightedGraph& g) {
  ClusterAssignment out;
  out.module.assign(g.size(), -1);
  std::int32_t next = 0;
  std::vector<std::uint32_t> stack;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (out.module[s] != -1) continue;
    out.module[s] = next;
    stack.push_back(static_cast<std::uint32_t>(s));
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (const auto& arc : g.adjacency()[v])
        if (out.module[arc.to] == -1) {
          out.module[arc.to] = next;
          stack.push_back(arc.to);
        }
    }
    ++next;
  }
  return out;
}

double map_codelength(const WeightedGraph& g, const ClusterAssignment& partition) {
  if (partition.size() != g.size()) throw Error(ErrorKind::Parameter, "partition size does not match graph");
  if (!(g.total_weight() > 0.0)) throw Error(ErrorKind::DegenerateInput, "map equation needs a graph with positive total weight");
  const double two_w = 2.0 * g.total_weight();
  std::map<std::int32_t, std::pair<double, double>> mod;  // id -> (flow, cut)
  double node_term = 0.0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const double p = g.strength()[v] / two_w;
    node_term += plogp(p);
    mod[partition.module[v]].first += p;
  }
  for (const auto& e : g.edges())
    if (partition.module[e.a] != partition.module[e.b]) {
      mod[partition.module[e.a]].second += e.w;
      mod[partition.module[e.b]].second += e.w;
    }
  double q = 0.0, exit_term = 0.0, total_term = 0.0;
  for (const auto& [id, fc] : mod) {
    const double qm = fc.second / two_w;
    q += qm;
    exit_term += plogp(qm);
    total_term += plogp(qm + fc.first);
  }
  return plogp(q) - 2.0 * exit_term - node_term + total_term;
}

ClusterAssignment map_cluster(const WeightedGraph& g) {
  const ClusterAssignment comps = connected_components(g);
  std::vector<std::vector<std::uint32_t>> members(comps.modules());
  for (std::size_t v = 0; v < g.size(); ++v) members[static_cast<std::size_t>(comps.module[v])].push_back(static_cast<std::uint32_t>(v));
  std::vector<std::int32_t> ids(g.size(), -1);
  std::int32_t offset = 0;
  for (const auto& nodes : members) {
    if (nodes.size() == 1) {
      ids[nodes[0]] = offset++;
      continue;
    }
    MapOptimizer opt(g, nodes);
    opt.run();
    const auto local = opt.modules();
    for (std::size_t i = 0; i < nodes.size(); ++i) ids[nodes[i]] = offset + local[i];
    offset += static_cast<std::int32_t>(nodes.size());
  }
  return ClusterAssignment::canonical(ids);
}

std::string partition_to_csv(const ClusterAssignment& p) {
  std::string s = "node,cluster\n";
  for (std::size_t v = 0; v < p.size(); ++v) s += std::to_string(v) + "," + std::to_string(p.module[v]) + "\n";
  return s;
}

void write_partition_csv(const ClusterAssignment& p, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Parameter, "cannot open for writing: " + path);
  out << partition_to_csv(p);
}

ClusterAssignment read_partition_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parameter, "cannot open for reading: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "node,cluster") throw Error(ErrorKind::Format, "partition CSV must start with 'node,cluster'");
  std::vector<std::int32_t> ids;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::Format, "malformed partition row: " + line);
    const auto node = std::stoul(line.substr(0, comma));
    if (node != ids.size()) throw Error(ErrorKind::Format, "partition rows must list nodes 0..N-1 in order");
    ids.push_back(static_cast<std::int32_t>(std::stol(line.substr(comma + 1))));
  }
  return ClusterAssignment{ids};
}

}  // namespace dc
