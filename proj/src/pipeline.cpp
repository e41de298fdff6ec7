#include "diffcluster/pipeline.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace dc {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.kind())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw Error(e.kind(), std::string("stage ") + name + ": " + msg);
  }
}

std::uint64_t hash_embeddings(const EmbeddingSet& e) {
  const auto bytes = encode_embeddings(e);
  return fnv1a(bytes.data(), bytes.size());
}

std::string hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string cache_path(const PipelineConfig& cfg, const std::string& stage_name, std::uint64_t key) {
  return (std::filesystem::path(cfg.cache_dir) / (stage_name + "-" + hex(key) + ".bin")).string();
}

EmbeddingSet normalized(const EmbeddingSet& e) { return e.normalized() ? e : l2_normalize(e); }

std::size_t effective_k(const PipelineConfig& cfg, const EmbeddingSet& e) { return std::min(cfg.k, e.count()); }

// Hash of the fields every model-training stage depends on.
std::uint64_t training_key(const PipelineConfig& cfg, const EmbeddingSet& train_set, const char* what) {
  PipelineConfig c = cfg;
  c.threads = 1;
  c.cache_dir.clear();
  c.predictor_path.clear();
  const std::string text = pipeline_config_text(c) + what;
  return fnv1a(text.data(), text.size(), hash_embeddings(train_set));
}

std::vector<std::int32_t> rounded(const std::vector<std::int32_t>& raw, std::size_t k) {
  std::vector<std::int32_t> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = round_topk(raw[i], static_cast<std::int32_t>(k));
  return out;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

// Sibling-cluster generator used by the overlapping, distractor and noise benchmarks.
struct FamilySpec {
  int families = 10;
  int siblings = 2;
  int points = 20;
  int dim = 64;
  double sibling_spread = 0.5;
  double spread = 0.15;
  int distractors_per_cluster = 0;
  double distractor_spread = 0.3;
};

Vector unit_gaussian(int dim, Rng& rng) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  return v / v.norm();
}

Vector noisy(const Vector& c, double spread, Rng& rng) {
  Vector v = c;
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += spread * rng.normal();
  return v / v.norm();
}

EmbeddingSet generate_families(const FamilySpec& s, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> rows;
  std::vector<std::int32_t> labels;
  std::int32_t next_label = 0;
  std::vector<std::pair<Vector, std::int32_t>> centers;
  for (int f = 0; f < s.families; ++f) {
    const Vector fc = unit_gaussian(s.dim, rng);
    for (int c = 0; c < s.siblings; ++c) centers.emplace_back(noisy(fc, s.sibling_spread, rng), next_label++);
  }
  for (const auto& [c, label] : centers)
    for (int p = 0; p < s.points; ++p) {
      rows.push_back(noisy(c, s.spread, rng));
      labels.push_back(label);
    }
  // Distractors sit near a cluster but belong to no identity of their own kind.
  for (const auto& [c, label] : centers)
    for (int d = 0; d < s.distractors_per_cluster; ++d) {
      rows.push_back(noisy(c, s.distractor_spread, rng));
      labels.push_back(next_label++);
    }
  Matrix m(static_cast<Eigen::Index>(rows.size()), s.dim);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return EmbeddingSet(std::move(m), std::move(labels), true);
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_string(TopKMode m) {
  switch (m) {
    case TopKMode::Predictor: return "predictor";
    case TopKMode::Full: return "full";
    case TopKMode::Oracle: return "oracle";
  }
  return "?";
}

TopKMode parse_topk_mode(const std::string& s) {
  if (s == "predictor") return TopKMode::Predictor;
  if (s == "full") return TopKMode::Full;
  if (s == "oracle") return TopKMode::Oracle;
  throw Error(ErrorKind::Config, "topk mode must be predictor, full or oracle, got '" + s + "'");
}

std::string to_string(ClusterMode m) { return m == ClusterMode::Map ? "map" : "components"; }

ClusterMode parse_cluster_mode(const std::string& s) {
  if (s == "map") return ClusterMode::Map;
  if (s == "components") return ClusterMode::Components;
  throw Error(ErrorKind::Config, "cluster mode must be map or components, got '" + s + "'");
}

std::string to_string(TransformKind k) { return k == TransformKind::Exp ? "exp" : "sigmoid"; }

TransformKind parse_transform_kind(const std::string& s) {
  if (s == "exp") return TransformKind::Exp;
  if (s == "sigmoid") return TransformKind::Sigmoid;
  throw Error(ErrorKind::Config, "transform must be exp or sigmoid, got '" + s + "'");
}

void PipelineConfig::validate() const {
  if (k < 1) throw Error(ErrorKind::Config, "k must be >= 1");
  if (transform.kind == TransformKind::Exp && !(transform.tau > 0.0))
    throw Error(ErrorKind::Config, "transform.tau must be > 0");
  if (!std::isfinite(transform.delta) || !std::isfinite(transform.epsilon))
    throw Error(ErrorKind::Config, "transform.delta and transform.epsilon must be finite");
  eta.validate();
  encoder.validate();
  train.validate();
  if (!(noise_ratio >= 0.0 && noise_ratio <= 1.0)) throw Error(ErrorKind::Config, "noise ratio must lie in [0, 1]");
  if (!(edge_threshold >= 0.0 && edge_threshold <= 1.0))
    throw Error(ErrorKind::Config, "cluster.edge_threshold must lie in [0, 1]");
  if (pair_samples_per_node < 1) throw Error(ErrorKind::Config, "pair.samples_per_node must be >= 1");
}

PipelineConfig pipeline_config_from(const Config& c, PipelineConfig b) {
  auto count = [&](const char* key, std::size_t fallback, std::int64_t min = 1) {
    const auto v = c.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < min) throw Error(ErrorKind::Config, std::string(key) + " must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
  };
  b.k = count("k", b.k);
  b.transform.kind = parse_transform_kind(c.get_string("transform.kind", to_string(b.transform.kind)));
  b.transform.tau = c.get_double("transform.tau", b.transform.tau);
  b.transform.delta = c.get_double("transform.delta", b.transform.delta);
  b.transform.epsilon = c.get_double("transform.epsilon", b.transform.epsilon);
  b.eta.eta = c.get_double("eta", b.eta.eta);
  b.topk_mode = parse_topk_mode(c.get_string("topk.mode", to_string(b.topk_mode)));
  b.encoder.dim = count("model.dim", b.encoder.dim);
  b.encoder.heads = count("model.heads", b.encoder.heads);
  b.encoder.layers = count("model.layers", b.encoder.layers, 0);
  b.encoder.ffn_mult = count("model.ffn_mult", b.encoder.ffn_mult);
  b.encoder.variant = attn::parse_variant(c.get_string("model.variant", attn::to_string(b.encoder.variant)));
  b.encoder.scale_width =
      attn::parse_scale_width(c.get_string("model.scale_width", attn::to_string(b.encoder.scale_width)));
  b.encoder.lam_init = c.get_double("model.lam_init", b.encoder.lam_init);
  b.encoder.u = static_cast<int>(c.get_int("model.u", b.encoder.u));
  b.train.lr = c.get_double("train.lr", b.train.lr);
  b.train.momentum = c.get_double("train.momentum", b.train.momentum);
  b.train.weight_decay = c.get_double("train.weight_decay", b.train.weight_decay);
  b.train.epochs = static_cast<int>(c.get_int("train.epochs", b.train.epochs));
  b.train.batch_size = static_cast<int>(c.get_int("train.batch_size", b.train.batch_size));
  b.train.clip_norm = c.get_double("train.clip_norm", b.train.clip_norm);
  b.train_data.num_clusters = c.get_int("train_data.clusters", b.train_data.num_clusters);
  b.train_data.points_per_cluster = c.get_int("train_data.points", b.train_data.points_per_cluster);
  b.train_data.dim = c.get_int("train_data.dim", b.train_data.dim);
  b.train_data.intra_spread = c.get_double("train_data.spread", b.train_data.intra_spread);
  b.train_data.seed = c.get_u64("train_data.seed", b.train_data.seed);
  b.predictor_path = c.get_string("predictor.path", b.predictor_path);
  b.pair_filter = c.get_bool("pair.filter", b.pair_filter);
  b.pair_samples_per_node = static_cast<int>(c.get_int("pair.samples_per_node", b.pair_samples_per_node));
  b.cluster_mode = parse_cluster_mode(c.get_string("cluster.mode", to_string(b.cluster_mode)));
  b.edge_threshold = c.get_double("cluster.edge_threshold", b.edge_threshold);
  b.noise_ratio = c.get_double("noise.ratio", b.noise_ratio);
  b.seed = c.get_u64("seed", b.seed);
  b.cache_dir = c.get_string("cache.dir", b.cache_dir);
  return b;
}

std::string pipeline_config_text(const PipelineConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["k"] = std::to_string(cfg.k);
  kv["transform.kind"] = to_string(cfg.transform.kind);
  kv["transform.tau"] = fmt_double(cfg.transform.tau);
  kv["transform.delta"] = fmt_double(cfg.transform.delta);
  kv["transform.epsilon"] = fmt_double(cfg.transform.epsilon);
  kv["eta"] = fmt_double(cfg.eta.eta);
  kv["topk.mode"] = to_string(cfg.topk_mode);
  kv["model.dim"] = std::to_string(cfg.encoder.dim);
  kv["model.heads"] = std::to_string(cfg.encoder.heads);
  kv["model.layers"] = std::to_string(cfg.encoder.layers);
  kv["model.ffn_mult"] = std::to_string(cfg.encoder.ffn_mult);
  kv["model.variant"] = attn::to_string(cfg.encoder.variant);
  kv["model.scale_width"] = attn::to_string(cfg.encoder.scale_width);
  kv["model.lam_init"] = fmt_double(cfg.encoder.lam_init);
  kv["model.u"] = std::to_string(cfg.encoder.u);
  kv["train.lr"] = fmt_double(cfg.train.lr);
  kv["train.momentum"] = fmt_double(cfg.train.momentum);
  kv["train.weight_decay"] = fmt_double(cfg.train.weight_decay);
  kv["train.epochs"] = std::to_string(cfg.train.epochs);
  kv["train.batch_size"] = std::to_string(cfg.train.batch_size);
  kv["train.clip_norm"] = fmt_double(cfg.train.clip_norm);
  kv["train_data.clusters"] = std::to_string(cfg.train_data.num_clusters);
  kv["train_data.points"] = std::to_string(cfg.train_data.points_per_cluster);
  kv["train_data.dim"] = std::to_string(cfg.train_data.dim);
  kv["train_data.spread"] = fmt_double(cfg.train_data.intra_spread);
  kv["train_data.seed"] = std::to_string(cfg.train_data.seed);
  kv["predictor.path"] = cfg.predictor_path;
  kv["pair.filter"] = cfg.pair_filter ? "true" : "false";
  kv["pair.samples_per_node"] = std::to_string(cfg.pair_samples_per_node);
  kv["cluster.mode"] = to_string(cfg.cluster_mode);
  kv["cluster.edge_threshold"] = fmt_double(cfg.edge_threshold);
  kv["noise.ratio"] = fmt_double(cfg.noise_ratio);
  kv["seed"] = std::to_string(cfg.seed);
  kv["cache.dir"] = cfg.cache_dir;
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

std::shared_ptr<const KnnGraph> build_pipeline_graph(const PipelineConfig& cfg, const EmbeddingSet& e,
                                                     std::uint64_t noise_stream) {
  const EmbeddingSet x = normalized(e);
  const std::size_t k = effective_k(cfg, x);
  std::string key_text = "graph k=" + std::to_string(k) + " noise=" + fmt_double(cfg.noise_ratio) +
                         " seed=" + std::to_string(cfg.seed) + " stream=" + std::to_string(noise_stream);
  const std::uint64_t key = fnv1a(key_text.data(), key_text.size(), hash_embeddings(x));
  if (!cfg.cache_dir.empty()) {
    const auto path = cache_path(cfg, "graph", key);
    if (std::filesystem::exists(path)) return std::make_shared<const KnnGraph>(load_graph(path));
  }
  KnnGraph g = build_knn(x, k, cfg.threads).rounded_to_storage();
  if (cfg.noise_ratio > 0.0) g = inject_noise(g, cfg.noise_ratio, mix_seed(cfg.seed, noise_stream));
  // Noise output is already f32-exact only after this second rounding.
  g = g.rounded_to_storage();
  if (!cfg.cache_dir.empty()) {
    std::filesystem::create_directories(cfg.cache_dir);
    save_graph(g, cache_path(cfg, "graph", key));
  }
  return std::make_shared<const KnnGraph>(std::move(g));
}

TrainResult train_boundary_model(const PipelineConfig& cfg, const EmbeddingSet& train_set) {
  if (!train_set.has_labels()) throw Error(ErrorKind::Parameter, "predictor training data needs labels");
  const auto graph = build_pipeline_graph(cfg, train_set, 2);
  const auto table = build_edge_probs(graph, cfg.transform);
  const auto seqs = encode_all(table, &*train_set.labels());
  Rng rng(mix_seed(cfg.seed, 3));
  auto model = TokenModel::random(HeadKind::Boundary, kSequenceFeatures, cfg.encoder, rng);
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(cfg.seed, 4);
  tc.threads = cfg.threads;
  return train_topk(std::move(model), seqs, tc);
}

TrainResult train_pair_model(const PipelineConfig& cfg, const EmbeddingSet& train_set) {
  if (!train_set.has_labels()) throw Error(ErrorKind::Parameter, "pair training data needs labels");
  const auto graph = build_pipeline_graph(cfg, train_set, 2);
  const auto table = build_edge_probs(graph, cfg.transform);
  const auto& labels = *train_set.labels();
  const auto khat = TopKVector{rounded(label_topk(*graph, labels), graph->k())};
  const auto data = build_pair_dataset(table, khat, labels, cfg.pair_samples_per_node, mix_seed(cfg.seed, 5));
  Rng rng(mix_seed(cfg.seed, 6));
  auto model = TokenModel::random(HeadKind::Pair, kPairFeatures, cfg.encoder, rng);
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(cfg.seed, 7);
  tc.threads = cfg.threads;
  return train_pair(std::move(model), data, tc);
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const EmbeddingSet& embeddings, const EmbeddingSet* train_set) {
  stage("config", [&] {
    cfg.validate();
    return 0;
  });
  PipelineResult res;
  const EmbeddingSet x = stage("normalize", [&] { return normalized(embeddings); });
  const auto graph = stage("build_knn", [&] { return build_pipeline_graph(cfg, x, 1); });
  const auto table = stage("edge_probs", [&] { return build_edge_probs(graph, cfg.transform); });
  const std::size_t k = graph->k();

  std::optional<EmbeddingSet> generated;
  auto training_data = [&]() -> const EmbeddingSet& {
    if (train_set) return *train_set;
    if (!generated) {
      SyntheticSpec s = cfg.train_data;
      s.seed = mix_seed(cfg.seed ^ s.seed, 8);
      generated = generate_synthetic(s);
    }
    return *generated;
  };

  res.khat = stage("topk", [&] {
    switch (cfg.topk_mode) {
      case TopKMode::Full: return std::vector<std::int32_t>(x.count(), static_cast<std::int32_t>(k));
      case TopKMode::Oracle:
        if (!x.has_labels()) throw Error(ErrorKind::Parameter, "oracle Top-K needs labels");
        return rounded(label_topk(*graph, *x.labels()), k);
      case TopKMode::Predictor: break;
    }
    TokenModel model;
    if (!cfg.predictor_path.empty()) {
      model = load_model(cfg.predictor_path);
    } else {
      const auto& data = training_data();
      const std::uint64_t key = training_key(cfg, data, "boundary");
      const std::string path = cfg.cache_dir.empty() ? "" : cache_path(cfg, "predictor", key);
      if (!path.empty() && std::filesystem::exists(path)) {
        model = load_model(path);
        res.predictor_from_cache = true;
      } else {
        auto trained = train_boundary_model(cfg, data);
        model = std::move(trained.model);
        res.loss_curve = std::move(trained.loss_curve);
        if (!path.empty()) {
          std::filesystem::create_directories(cfg.cache_dir);
          save_model(model, path);
        }
      }
    }
    return rounded(predict_topk_all(model, encode_all(table), cfg.threads), k);
  });

  const TopKVector khat{res.khat};
  res.edges = stage("refine", [&] { return refine_graph(table, khat); });

  if (cfg.pair_filter) {
    res.edges = stage("pair_filter", [&] {
      const auto& data = training_data();
      const std::uint64_t key = training_key(cfg, data, "pair");
      const std::string path = cfg.cache_dir.empty() ? "" : cache_path(cfg, "pair", key);
      TokenModel model;
      if (!path.empty() && std::filesystem::exists(path)) {
        model = load_model(path);
      } else {
        model = train_pair_model(cfg, data).model;
        if (!path.empty()) {
          std::filesystem::create_directories(cfg.cache_dir);
          save_model(model, path);
        }
      }
      std::vector<double> score(res.edges.size());
      parallel_for(res.edges.size(), cfg.threads, [&](std::size_t e) {
        score[e] = predict_pair_score(model, table, khat, res.edges[e].src, res.edges[e].dst);
      });
      std::vector<RefinedEdge> kept;
      for (std::size_t e = 0; e < res.edges.size(); ++e)
        if (score[e] >= cfg.eta.eta) kept.push_back(res.edges[e]);
      return kept;
    });
  }

  res.partition = stage("cluster", [&] {
    const WeightedGraph wg = threshold_edges(x.count(), res.edges, cfg.edge_threshold);
    if (cfg.cluster_mode == ClusterMode::Components || wg.edges().empty()) return connected_components(wg);
    return map_cluster(wg);
  });

  if (x.has_labels()) res.metrics = stage("metrics", [&] { return evaluate_partition(res.partition.module, *x.labels()); });
  return res;
}

std::vector<AblationRow> run_ablation(const std::vector<std::pair<std::string, PipelineConfig>>& grid,
                                      const EmbeddingSet& data, const EmbeddingSet* train_set, unsigned workers) {
  if (!data.has_labels()) throw Error(ErrorKind::Parameter, "ablation data needs labels");
  std::vector<AblationRow> rows(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t i) {
    PipelineConfig c = grid[i].second;
    if (workers > 1) c.threads = 1;
    rows[i] = {grid[i].first, grid[i].second, *run_pipeline(c, data, train_set).metrics};
  });
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string s = "name,transform,delta,variant,jaccard,fp,fb,nmi\n";
  char buf[256];
  for (const auto& r : rows) {
    const auto& c = r.config;
    std::snprintf(buf, sizeof buf, "%s,%s,%g,%s,%s,%.6f,%.6f,%.6f\n", r.name.c_str(),
                  to_string(c.transform.kind).c_str(), c.transform.kind == TransformKind::Exp ? 0.0 : c.transform.delta,
                  attn::to_string(c.encoder.variant).c_str(), c.topk_mode == TopKMode::Full ? "full" : "topk",
                  r.metrics.pairwise.f, r.metrics.bcubed.f, r.metrics.nmi);
    s += buf;
  }
  return s;
}

std::vector<std::pair<std::string, PipelineConfig>> transform_grid(const PipelineConfig& base) {
  std::vector<std::pair<std::string, PipelineConfig>> g;
  PipelineConfig e = base;
  e.transform.kind = TransformKind::Exp;
  g.emplace_back("exp", e);
  for (double d : {5.0, 7.5, 10.0}) {
    PipelineConfig s = base;
    s.transform.kind = TransformKind::Sigmoid;
    s.transform.delta = d;
    g.emplace_back("sigmoid-" + fmt_double(d), s);
  }
  return g;
}

std::vector<std::pair<std::string, PipelineConfig>> jaccard_grid(const PipelineConfig& base) {
  PipelineConfig full = base;
  full.topk_mode = TopKMode::Full;
  PipelineConfig topk = base;
  if (topk.topk_mode == TopKMode::Full) topk.topk_mode = TopKMode::Predictor;
  return {{"topk", topk}, {"full", full}};
}

std::vector<NoiseRow> run_noise_experiment(const PipelineConfig& cfg, const std::vector<double>& ratios,
                                           const std::vector<attn::Variant>& variants, const EmbeddingSet& data,
                                           const EmbeddingSet* train_set, unsigned workers) {
  if (!data.has_labels()) throw Error(ErrorKind::Parameter, "noise experiment data needs labels");
  for (double r : ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::Range, "noise ratios must lie in [0, 1]");
  std::vector<NoiseRow> rows(ratios.size() * variants.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    PipelineConfig c = cfg;
    c.noise_ratio = ratios[i / variants.size()];
    c.encoder.variant = variants[i % variants.size()];
    if (workers > 1) c.threads = 1;
    rows[i] = {c.noise_ratio, c.encoder.variant, *run_pipeline(c, data, train_set).metrics};
  });
  return rows;
}

std::string noise_csv(const std::vector<NoiseRow>& rows) {
  std::string s = "ratio,variant,fp,fb,nmi\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g,%s,%.6f,%.6f,%.6f\n", r.ratio, attn::to_string(r.variant).c_str(),
                  r.metrics.pairwise.f, r.metrics.bcubed.f, r.metrics.nmi);
    s += buf;
  }
  return s;
}

std::vector<std::string> benchmark_names() {
  return {"separated", "single", "topk30", "overlapping", "distractor", "noise"};
}

Benchmark make_benchmark(const std::string& name, std::uint64_t seed) {
  Benchmark b;
  b.name = name;
  b.config.k = 40;
  b.config.seed = seed;
  b.config.train.epochs = 10;
  auto synth = [&](SyntheticSpec s) {
    s.seed = mix_seed(seed, 100);
    b.test = generate_synthetic(s);
    s.seed = mix_seed(seed, 101);
    b.train = generate_synthetic(s);
    b.config.train_data = s;
  };
  auto family = [&](const FamilySpec& f) {
    b.test = generate_families(f, mix_seed(seed, 100));
    b.train = generate_families(f, mix_seed(seed, 101));
  };
  if (name == "separated") {
    synth({20, 50, 64, 0.15, 0});
  } else if (name == "single") {
    synth({1, 60, 64, 0.15, 0});
  } else if (name == "topk30") {
    synth({10, 30, 64, 0.08, 0});
    b.config.k = 80;
  } else if (name == "overlapping" || name == "noise") {
    // Sibling identities share a family center, so many cross pairs are borderline.
    FamilySpec f;
    f.sibling_spread = 0.3;
    f.spread = 0.2;
    family(f);
  } else if (name == "distractor") {
    FamilySpec f;
    f.siblings = 1;
    f.families = 20;
    f.distractors_per_cluster = 10;
    family(f);
  } else {
    throw Error(ErrorKind::Parameter, "unknown benchmark '" + name + "'");
  }
  return b;
}

}  // namespace dc
