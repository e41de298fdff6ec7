// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--cli PATH] [--work DIR] [--only N,...] [--expect-fail N,...]
//
// Exit status is 0 when the failing set equals the --expect-fail set (so a
// known, documented failure does not hide a new one, and an unexpected pass
// is reported too).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "diffcluster/attention.hpp"
#include "diffcluster/clustering.hpp"
#include "diffcluster/edge_model.hpp"
#include "diffcluster/metrics.hpp"
#include "diffcluster/pipeline.hpp"
#include "oracles/attention_oracles.hpp"
#include "oracles/cluster_oracles.hpp"
#include "oracles/graph_oracles.hpp"

using namespace dc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  return m;
}

attn::AttentionMask random_mask(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> keep(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) keep[r * n + c] = (r == c) || rng.uniform() < 0.5;
  return attn::AttentionMask(n, keep);
}

// Normalized sigmoid probabilities computed straight from the similarities.
std::vector<std::vector<double>> literal_phat(const KnnGraph& g, double delta, double eps) {
  std::vector<std::vector<double>> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = 0;
    for (std::size_t r = 0; r < g.k(); ++r) {
      const double d = 2.0 - 2.0 * g.sim(i, r);
      out[i].push_back(1.0 / (1.0 + std::exp(delta * d + eps)));
      s += out[i].back();
    }
    for (double& v : out[i]) v /= s;
  }
  return out;
}

// ---- criteria -------------------------------------------------------------

Outcome c1_topk_oracle() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  double worst = 0.0;
  std::size_t pairs = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(49);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 10));
    const auto e = l2_normalize(EmbeddingSet(random_matrix(static_cast<Eigen::Index>(n), 8, rng)));
    const auto g = std::make_shared<const KnnGraph>(build_knn(e, k));
    const auto table = build_edge_probs(g, {});
    TopKVector khat;
    for (std::size_t i = 0; i < n; ++i) khat.khat.push_back(static_cast<std::int32_t>(1 + rng.below(k)));
    std::vector<std::vector<std::uint32_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i) nbrs[i].assign(g->neighbors(i).begin(), g->neighbors(i).end());
    const auto phat = literal_phat(*g, 7.5, -5.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double want =
            oracle::literal_topk_jaccard(nbrs, phat, i, j, static_cast<std::size_t>(khat.khat[i]));
        worst = std::max(worst, std::abs(edge_prob_topk(table, khat, i, j) - want));
        ++pairs;
      }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10.0,
          std::to_string(pairs) + " pairs, max |diff| " + fmt("%.2e", worst) + ", " + fmt("%.2fs", secs)};
}

Outcome c2_full_equals_topk() {
  Rng rng(1002);
  std::size_t pairs = 0, mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(49);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 10));
    const auto e = l2_normalize(EmbeddingSet(random_matrix(static_cast<Eigen::Index>(n), 8, rng)));
    const auto g = std::make_shared<const KnnGraph>(build_knn(e, k));
    const auto table = build_edge_probs(g, {});
    const TopKVector khat{std::vector<std::int32_t>(n, static_cast<std::int32_t>(k))};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        mismatches += edge_prob_topk(table, khat, i, j) != edge_prob_weighted(table, i, j);
        ++pairs;
      }
  }
  return {mismatches == 0, std::to_string(pairs) + " pairs, " + std::to_string(mismatches) + " not bit-equal"};
}

Outcome c3_sigmoid_points() {
  const TransformConfig cfg;  // delta 7.5, epsilon -5
  const double a = prob_sigmoid(0.0, cfg), b = prob_sigmoid(2.0 / 3.0, cfg);
  return {std::abs(a - 0.993307) <= 1e-6 && std::abs(b - 0.5) <= 1e-12,
          "p(0) = " + fmt("%.9f", a) + ", p(2/3) = " + fmt("%.15f", b)};
}

Outcome c4_round_topk() {
  int bad = 0, checked = 0;
  for (int k = 10; k <= 200; k += 10)
    for (int t = 1; t <= 200; ++t) {
      const int got = round_topk(t, k);
      const int want = t < k ? std::min(k, 10 * ((t + 9) / 10)) : k;
      bad += got != want || got % 10 != 0 || got > k;
      ++checked;
    }
  return {bad == 0, std::to_string(checked) + " cases, " + std::to_string(bad) + " wrong"};
}

Outcome c5_diff_invariants() {
  Rng rng(1005);
  // (a) identical maps with lambda = 1
  auto p = attn::AttentionParams::random(8, rng);
  const Matrix a = random_matrix(8, 4, rng), b = random_matrix(8, 4, rng);
  p.wq << a, a;
  p.wk << b, b;
  for (Vector* v : {&p.lam_q1, &p.lam_k1, &p.lam_q2, &p.lam_k2}) v->setZero();
  p.lam_init = 1.0;
  const double cancel = attn::diff_attention(random_matrix(6, 8, rng), p).norm();
  // (b) row sums of the coefficient matrix
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto q = attn::AttentionParams::random(8, rng);
    const auto n = static_cast<Eigen::Index>(2 + rng.below(10));
    const auto cache = attn::attention_forward(attn::Variant::Diff, random_matrix(n, 8, rng), q);
    const Vector sums = cache.coefficients().rowwise().sum();
    worst = std::max(worst, (sums.array() - (1.0 - attn::lambda_value(q))).abs().maxCoeff());
  }
  // (c) lambda at zero vectors
  auto z = attn::AttentionParams::random(8, rng);
  for (Vector* v : {&z.lam_q1, &z.lam_k1, &z.lam_q2, &z.lam_k2}) v->setZero();
  const double lam = attn::lambda_value(z);
  return {cancel <= 1e-12 && worst <= 1e-9 && lam == 0.8,
          "|out| " + fmt("%.1e", cancel) + ", row-sum err " + fmt("%.1e", worst) + ", lambda " + fmt("%.17g", lam)};
}

Outcome c6_mask_soundness() {
  Rng rng(1006);
  std::size_t rows = 0, changed = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 3 + rng.below(8);
    const auto p = attn::AttentionParams::random(8, rng);
    const Matrix x = random_matrix(static_cast<Eigen::Index>(n), 8, rng);
    const auto mask = random_mask(n, rng);
    const Matrix base = attn::sparse_diff_attention(x, p, mask);
    for (std::size_t r = 0; r < n; ++r) {
      // Every input row hidden from row r gets a large perturbation; its
      // value vector (and its keys) change, row r must not.
      Matrix xp = x;
      for (std::size_t c = 0; c < n; ++c)
        if (!mask.keep(r, c)) xp.row(static_cast<Eigen::Index>(c)) += random_matrix(1, 8, rng, 10.0);
      const Matrix out = attn::sparse_diff_attention(xp, p, mask);
      changed += (out.row(static_cast<Eigen::Index>(r)) - base.row(static_cast<Eigen::Index>(r))).cwiseAbs().maxCoeff() != 0.0;
      ++rows;
    }
  }
  return {changed == 0, std::to_string(rows) + " rows over 50 masks, " + std::to_string(changed) + " changed"};
}

Outcome c7_gradients() {
  const auto t0 = Clock::now();
  Rng rng(1007);
  double worst = 0.0;
  bool ok = true;
  for (auto [n, d] : {std::pair<std::size_t, std::size_t>{4, 8}, {6, 16}})
    for (auto variant : {attn::Variant::Vanilla, attn::Variant::Diff, attn::Variant::Sdt, attn::Variant::MoeSdt}) {
      auto p = attn::AttentionParams::random(d, rng);
      p.u = 1;
      p.alpha = 0.2 + rng.uniform();
      p.beta = 0.2 + rng.uniform();
      p.gamma = 0.2 + rng.uniform();
      const Matrix x0 = random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), rng);
      const Matrix g = random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), rng);
      const auto mask = random_mask(n, rng);
      std::vector<int> counts(n);
      for (auto& c : counts) c = 1 + static_cast<int>(rng.below(n));
      const auto moe = attn::moe_masks(n, counts, p.u);
      std::vector<const attn::AttentionMask*> masks;
      if (variant == attn::Variant::Sdt) masks = {&mask};
      if (variant == attn::Variant::MoeSdt) masks = {&moe[0], &moe[1], &moe[2]};
      std::vector<double> point(x0.data(), x0.data() + x0.size());
      const auto pv = p.to_vector();
      point.insert(point.end(), pv.begin(), pv.end());
      const attn::LossFn f = [&](std::span<const double> th, std::vector<double>* grad) {
        Matrix x = Eigen::Map<const Matrix>(th.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        auto q = p;
        q.assign(th.subspan(n * d));
        const auto cache = attn::attention_forward(variant, x, q, masks);
        if (grad) {
          auto gp = attn::AttentionParams::zeros_like(q);
          const Matrix dx = attn::attention_backward(cache, q, g, gp);
          grad->assign(dx.data(), dx.data() + dx.size());
          const auto flat = gp.to_vector();
          grad->insert(grad->end(), flat.begin(), flat.end());
        }
        return cache.out.cwiseProduct(g).sum();
      };
      const auto rep = attn::grad_check(f, point, 1e-4);
      ok = ok && rep.passed;
      worst = std::max(worst, rep.max_rel_error);
    }
  const double secs = seconds_since(t0);
  return {ok && worst < 1e-4 && secs < 30.0,
          "4 variants x {4x8, 6x16}, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2fs", secs)};
}

Outcome c8_metrics() {
  Rng rng(1008);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(100);
    std::vector<std::int32_t> pred(n), truth(n);
    const auto kp = 1 + rng.below(12), kt = 1 + rng.below(12);
    for (auto& v : pred) v = static_cast<std::int32_t>(rng.below(kp));
    for (auto& v : truth) v = static_cast<std::int32_t>(rng.below(kt));
    const auto m = evaluate_partition(pred, truth);
    const auto pw = oracle::pairwise(pred, truth);
    const auto bc = oracle::bcubed(pred, truth);
    for (double d : {m.pairwise.precision - pw.p, m.pairwise.recall - pw.r, m.pairwise.f - pw.f,
                     m.bcubed.precision - bc.p, m.bcubed.recall - bc.r, m.bcubed.f - bc.f,
                     m.nmi - oracle::nmi(pred, truth)})
      worst = std::max(worst, std::abs(d));
  }
  // Hand cases.
  bool hand = true;
  const std::vector<std::int32_t> two{0, 0, 1, 1};
  auto pw = pairwise_f(two, two);
  hand &= pw.precision == 1 && pw.recall == 1 && pw.f == 1;
  pw = pairwise_f({0, 1, 2, 3}, two);
  hand &= pw.precision == 1 && pw.recall == 0 && pw.f == 0;
  pw = pairwise_f({0, 0, 1, 1}, {0, 0, 0, 1});
  hand &= pw.precision == 0.5 && std::abs(pw.recall - 1.0 / 3) < 1e-15 && std::abs(pw.f - 0.4) < 1e-15;
  auto bc = bcubed_f(two, two);
  hand &= bc.f == 1;
  bc = bcubed_f({0, 1, 2, 3}, two);
  hand &= bc.precision == 1 && bc.recall == 0.5 && std::abs(bc.f - 2.0 / 3) < 1e-15;
  bc = bcubed_f({0, 0, 0, 0}, two);
  hand &= bc.precision == 0.5 && bc.recall == 1 && std::abs(bc.f - 2.0 / 3) < 1e-15;
  hand &= nmi({0, 0, 1, 1}, {7, 7, 3, 3}) == 1.0;
  hand &= nmi({0, 0, 0, 0}, two) == 0.0;
  hand &= std::abs(nmi({0, 0, 1, 1}, {0, 1, 0, 1})) < 1e-15;
  return {worst <= 1e-12 && hand,
          "200 random pairs, max |diff| " + fmt("%.2e", worst) + (hand ? ", hand cases exact" : ", HAND CASE MISMATCH")};
}

WeightedGraph to_graph(std::size_t n, const std::vector<oracle::Edge>& es) {
  std::vector<WeightedEdge> w;
  for (const auto& e : es) w.push_back({static_cast<std::uint32_t>(e.a), static_cast<std::uint32_t>(e.b), e.w});
  return WeightedGraph(n, w);
}

Outcome c9_map_equation() {
  // (a)
  const auto cycle = to_graph(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 0, 1}});
  const double l4 = map_codelength(cycle, {{0, 0, 0, 0}});
  // (b)
  Rng rng(1009);
  int exact = 0, local = 0, bad = 0;
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + static_cast<int>(rng.below(7));
    const auto es = oracle::random_connected(n, rng);
    const auto g = to_graph(static_cast<std::size_t>(n), es);
    const auto p = map_cluster(g);
    const double l = map_codelength(g, p);
    if (std::abs(l - oracle::exhaustive_optimum(n, es)) <= 1e-9)
      ++exact;
    else if (oracle::single_move_optimal(n, es, p.module))
      ++local;
    else
      ++bad;
  }
  // (c)
  const auto tri = to_graph(6, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}});
  const bool two = map_cluster(tri).module == std::vector<std::int32_t>{0, 0, 0, 1, 1, 1};
  return {std::abs(l4 - 2.0) <= 1e-12 && bad == 0 && two,
          "(a) L = " + fmt("%.15f", l4) + "; (b) " + std::to_string(exact) + " optimal, " + std::to_string(local) +
              " local-optimal, " + std::to_string(bad) + " neither; (c) " + (two ? "two cliques" : "WRONG")};
}

Outcome c10_end_to_end() {
  const auto b = make_benchmark("separated", 0);
  auto cfg = b.config;
  cfg.threads = 1;
  const auto t0 = Clock::now();
  const auto r = run_pipeline(cfg, b.test, &b.train);
  const double secs = seconds_since(t0);
  const auto& m = *r.metrics;
  return {m.pairwise.f >= 0.95 && m.bcubed.f >= 0.95 && m.nmi >= 0.98 && secs < 60.0,
          "F_P " + fmt("%.4f", m.pairwise.f) + ", F_B " + fmt("%.4f", m.bcubed.f) + ", NMI " + fmt("%.4f", m.nmi) +
              ", " + std::to_string(r.partition.modules()) + " clusters, " + fmt("%.1fs", secs) + " single-threaded"};
}

Outcome c11_ablation() {
  const auto ov = make_benchmark("overlapping", 0);
  const auto trows = run_ablation(transform_grid(ov.config), ov.test, &ov.train, 4);
  double f_exp = 0, f_sig = 0;
  for (const auto& r : trows) {
    if (r.name == "exp") f_exp = r.metrics.pairwise.f;
    if (r.name == "sigmoid-7.5") f_sig = r.metrics.pairwise.f;
  }
  const auto ds = make_benchmark("distractor", 0);
  const auto jrows = run_ablation(jaccard_grid(ds.config), ds.test, &ds.train, 2);
  const double f_topk = jrows[0].metrics.pairwise.f, f_full = jrows[1].metrics.pairwise.f;
  return {f_sig >= f_exp && f_topk >= f_full, "overlapping: sigmoid-7.5 " + fmt("%.4f", f_sig) + " vs exp " +
                                                  fmt("%.4f", f_exp) + "; distractor: topk " + fmt("%.4f", f_topk) +
                                                  " vs full " + fmt("%.4f", f_full)};
}

Outcome c12_noise() {
  const auto b = make_benchmark("noise", 0);
  const auto rows = run_noise_experiment(b.config, {0.0, 0.4}, {attn::Variant::Vanilla, attn::Variant::Diff}, b.test,
                                         &b.train, 4);
  const double v0 = rows[0].metrics.pairwise.f, d0 = rows[1].metrics.pairwise.f;
  const double v4 = rows[2].metrics.pairwise.f, d4 = rows[3].metrics.pairwise.f;
  const bool higher = d4 > v4, smaller_drop = (v0 - v4) > (d0 - d4);
  return {higher && smaller_drop, "F_P clean vanilla " + fmt("%.4f", v0) + " diff " + fmt("%.4f", d0) +
                                      "; at 0.4 vanilla " + fmt("%.4f", v4) + " diff " + fmt("%.4f", d4) +
                                      "; diff > vanilla: " + (higher ? "yes" : "no") + "; drop vanilla " +
                                      fmt("%.4f", v0 - v4) + " vs diff " + fmt("%.4f", d0 - d4) + ": " +
                                      (smaller_drop ? "yes" : "no")};
}

Outcome c13_predictor() {
  const auto b = make_benchmark("topk30", 0);
  auto cfg = b.config;
  const auto t0 = Clock::now();
  const auto trained = train_boundary_model(cfg, b.train);
  const double secs = seconds_since(t0);
  const auto graph = build_pipeline_graph(cfg, b.test, 1);
  const auto table = build_edge_probs(graph, cfg.transform);
  const auto truth = label_topk(*graph, *b.test.labels());
  const auto pred = predict_topk_all(trained.model, encode_all(table), 4);
  std::size_t close = 0, true30 = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    close += std::abs(pred[i] - 30) <= 10;
    true30 += truth[i] == 30;
  }
  const double frac = static_cast<double>(close) / static_cast<double>(pred.size());
  return {frac >= 0.8 && secs <= 300.0, "K = " + std::to_string(graph->k()) + ", true_k = 30 on " +
                                            std::to_string(true30) + "/" + std::to_string(pred.size()) +
                                            " nodes; within +-10: " + fmt("%.1f%%", 100 * frac) + "; training " +
                                            fmt("%.1fs", secs)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome c14_determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no --cli given"};
  fs::remove_all(work);
  fs::create_directories(work);
  {
    std::ofstream cfg(work / "small.cfg");
    cfg << "k = 20\ntrain.epochs = 2\ntrain_data.clusters = 5\ntrain_data.points = 20\ntrain_data.dim = 16\n";
  }
  const std::string base = "\"" + cli + "\" --config \"" + (work / "small.cfg").string() + "\" --seed 5 --threads 2";
  std::vector<std::string> subs;
  for (const char* run : {"a", "b"}) {
    const auto o = (work / run).string();
    const auto q = [](const std::string& s) { return "\"" + s + "\""; };
    const std::vector<std::string> cmds{
        "\"" + cli + "\" --seed 5 --out " + q(o) + " generate --clusters 6 --points 20 --dim 16 --spread 0.2",
        base + " --out " + q(o) + " build-graph --input " + q(o + "/embeddings.bin"),
        base + " --out " + q(o) + " train-predictor",
        base + " --out " + q(o + "/pair") + " train-predictor --head pair",
        base + " --out " + q(o) + " refine --graph " + q(o + "/graph.bin") + " --predictor " + q(o + "/predictor.bin"),
        base + " --out " + q(o) + " cluster --edges " + q(o + "/edges.csv") + " --nodes 120",
        base + " --out " + q(o) + " evaluate --partition " + q(o + "/partition.csv") + " --embeddings " +
            q(o + "/embeddings.bin"),
        base + " --out " + q(o) + " ablate --input " + q(o + "/embeddings.bin"),
        base + " --out " + q(o) + " noise --input " + q(o + "/embeddings.bin") + " --ratios 0,0.4",
    };
    for (const auto& c : cmds)
      if (std::system((c + " > /dev/null 2>&1").c_str()) != 0) return {false, "command failed: " + c};
  }
  std::size_t files = 0, differ = 0;
  for (const auto& entry : fs::recursive_directory_iterator(work / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), work / "a");
    ++files;
    differ += slurp(entry.path()) != slurp(work / "b" / rel);
  }
  return {files >= 20 && differ == 0, "8 subcommands, " + std::to_string(files) + " output files, " +
                                          std::to_string(differ) + " differ between runs"};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "dc_acceptance";
  std::set<int> only, expect_fail;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string a = argv[i], v = argv[i + 1];
    if (a == "--cli") cli = v;
    else if (a == "--work") work = v;
    else if (a == "--only") only = parse_list(v);
    else if (a == "--expect-fail") expect_fail = parse_list(v);
    else {
      std::fprintf(stderr, "unknown argument %s\n", a.c_str());
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Top-K Jaccard vs literal oracle", c1_topk_oracle},
      {"full-K identity at khat = K", c2_full_equals_topk},
      {"sigmoid transform points", c3_sigmoid_points},
      {"Top-K rounding exhaustive", c4_round_topk},
      {"differential attention invariants", c5_diff_invariants},
      {"sparse mask soundness", c6_mask_soundness},
      {"attention gradient checks", c7_gradients},
      {"metrics vs brute force", c8_metrics},
      {"map equation", c9_map_equation},
      {"end-to-end separated benchmark", c10_end_to_end},
      {"directional ablation", c11_ablation},
      {"directional noise robustness", c12_noise},
      {"Top-K predictor sanity", c13_predictor},
      {"CLI determinism", [&] { return c14_determinism(cli, work); }},
  };

  std::set<int> failed;
  int run = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    ++run;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) failed.insert(id);
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", run - static_cast<int>(failed.size()), run);
  std::set<int> expected;
  for (int id : expect_fail)
    if (only.empty() || only.count(id)) expected.insert(id);
  if (failed != expected) {
    for (int id : failed)
      if (!expected.count(id)) std::printf("unexpected failure: %d\n", id);
    for (int id : expected)
      if (!failed.count(id)) std::printf("expected failure now passes: %d (update --expect-fail)\n", id);
    return 1;
  }
  if (!expected.empty()) std::printf("known failures (see README): %zu\n", expected.size());
  return 0;
}
