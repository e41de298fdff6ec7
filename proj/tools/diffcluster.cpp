// diffcluster command-line front end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffcluster/clustering.hpp"
#include "diffcluster/config.hpp"
#include "diffcluster/embeddings.hpp"
#include "diffcluster/knn_graph.hpp"
#include "diffcluster/metrics.hpp"
#include "diffcluster/pipeline.hpp"
#include "diffcluster/predictor.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  unsigned threads = 1;
  std::optional<double> lr, momentum, weight_decay, eta;
  std::optional<int> epochs;
  std::optional<std::string> variant;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Config file first, flags on top; anything the pipeline does not read is an error.
dc::PipelineConfig resolve(const Globals& g, dc::PipelineConfig base = {}) {
  dc::Config c = g.config_path.empty() ? dc::Config{} : dc::Config::load(g.config_path);
  if (g.seed) c.set("seed", std::to_string(*g.seed));
  if (g.lr) c.set("train.lr", fmt(*g.lr));
  if (g.momentum) c.set("train.momentum", fmt(*g.momentum));
  if (g.weight_decay) c.set("train.weight_decay", fmt(*g.weight_decay));
  if (g.epochs) c.set("train.epochs", std::to_string(*g.epochs));
  if (g.eta) c.set("eta", fmt(*g.eta));
  if (g.variant) c.set("model.variant", *g.variant);
  dc::PipelineConfig cfg = dc::pipeline_config_from(c, std::move(base));
  c.reject_unused();
  cfg.threads = g.threads;
  cfg.validate();
  return cfg;
}

fs::path out_file(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  return fs::path(g.out) / name;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw dc::Error(dc::ErrorKind::Parameter, "cannot write " + p.string());
  f << s;
  if (!f) throw dc::Error(dc::ErrorKind::Parameter, "write failed: " + p.string());
}

void write_report(const Globals& g, const std::string& name, const ordered_json& j) {
  write_text(out_file(g, name), j.dump(2) + "\n");
}

ordered_json metrics_json(const dc::MetricsReport& m) { return ordered_json::parse(dc::metrics_to_json(m)); }

std::vector<std::int32_t> labels_of(const dc::EmbeddingSet& e, const std::string& what) {
  if (!e.has_labels()) throw dc::Error(dc::ErrorKind::Parameter, what + " has no labels");
  return *e.labels();
}

// Test and training data: a bundled benchmark, or explicit files.
struct Data {
  dc::EmbeddingSet test;
  std::optional<dc::EmbeddingSet> train;
  dc::PipelineConfig base;
};

Data load_data(const Globals& g, const std::string& benchmark, const std::string& input, const std::string& train,
               const std::string& default_benchmark) {
  Data d;
  if (!input.empty()) {
    d.test = dc::load_embeddings(input);
    if (!train.empty()) d.train = dc::load_embeddings(train);
    return d;
  }
  // The seed decides the benchmark draw too, so read it before anything else.
  const std::uint64_t seed = resolve(g).seed;
  auto b = dc::make_benchmark(benchmark.empty() ? default_benchmark : benchmark, seed);
  d.test = std::move(b.test);
  d.train = std::move(b.train);
  d.base = std::move(b.config);
  return d;
}

std::vector<double> parse_ratios(const std::string& s) {
  std::vector<double> r;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw dc::Error(dc::ErrorKind::Parameter, "bad ratio '" + item + "'");
    r.push_back(v);
  }
  if (r.empty()) throw dc::Error(dc::ErrorKind::Parameter, "no noise ratios given");
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face-clustering pipeline: kNN graph, Jaccard refinement, attention Top-K predictor, map equation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--lr", g.lr, "predictor learning rate");
  app.add_option("--momentum", g.momentum, "SGD momentum");
  app.add_option("--weight-decay", g.weight_decay, "L2 weight decay");
  app.add_option("--epochs", g.epochs, "training epochs");
  app.add_option("--eta", g.eta, "pair score threshold");
  app.add_option("--variant", g.variant, "attention variant: vanilla, diff, sdt, moe-sdt");

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic labeled embedding set");
  dc::SyntheticSpec spec;
  std::string gen_benchmark;
  gen->add_option("--clusters", spec.num_clusters)->capture_default_str();
  gen->add_option("--points", spec.points_per_cluster, "points per cluster")->capture_default_str();
  gen->add_option("--dim", spec.dim)->capture_default_str();
  gen->add_option("--spread", spec.intra_spread)->capture_default_str();
  gen->add_option("--benchmark", gen_benchmark, "write a bundled benchmark (test and train sets) instead");

  // build-graph
  auto* bg = app.add_subcommand("build-graph", "exact cosine kNN graph of an embedding set");
  std::string bg_input;
  bg->add_option("--input", bg_input, "embedding file")->required()->check(CLI::ExistingFile);

  // refine
  auto* rf = app.add_subcommand("refine", "edge probabilities, Top-K depths and refined edges");
  std::string rf_graph, rf_predictor, rf_embeddings;
  rf->add_option("--graph", rf_graph, "graph file")->required()->check(CLI::ExistingFile);
  rf->add_option("--predictor", rf_predictor, "boundary model (predictor Top-K mode)")->check(CLI::ExistingFile);
  rf->add_option("--embeddings", rf_embeddings, "labeled embeddings (oracle Top-K mode)")->check(CLI::ExistingFile);

  // train-predictor
  auto* tp = app.add_subcommand("train-predictor", "train the Top-K boundary model or the pair model");
  std::string tp_input, tp_head = "boundary";
  tp->add_option("--input", tp_input, "labeled training embeddings; default generates from train_data.*")
      ->check(CLI::ExistingFile);
  tp->add_option("--head", tp_head)->check(CLI::IsMember({"boundary", "pair"}))->capture_default_str();

  // cluster
  auto* cl = app.add_subcommand("cluster", "threshold refined edges and partition");
  std::string cl_edges;
  std::size_t cl_nodes = 0;
  cl->add_option("--edges", cl_edges, "edge CSV from refine")->required()->check(CLI::ExistingFile);
  cl->add_option("--nodes", cl_nodes, "node count")->required()->check(CLI::PositiveNumber);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score a partition against labels");
  std::string ev_partition, ev_embeddings, ev_labels;
  ev->add_option("--partition", ev_partition, "partition CSV")->required()->check(CLI::ExistingFile);
  auto* ev_e = ev->add_option("--embeddings", ev_embeddings, "labeled embeddings")->check(CLI::ExistingFile);
  auto* ev_l = ev->add_option("--labels", ev_labels, "one label per line")->check(CLI::ExistingFile);
  ev_e->excludes(ev_l);

  // ablate
  auto* ab = app.add_subcommand("ablate", "distance-transform and Jaccard ablation grids");
  std::string ab_grid = "transform", ab_benchmark, ab_input, ab_train;
  ab->add_option("--grid", ab_grid)->check(CLI::IsMember({"transform", "jaccard"}))->capture_default_str();
  ab->add_option("--benchmark", ab_benchmark, "bundled benchmark (default: overlapping / distractor)");
  ab->add_option("--input", ab_input, "labeled embeddings instead of a benchmark")->check(CLI::ExistingFile);
  ab->add_option("--train", ab_train, "labeled predictor training embeddings")->check(CLI::ExistingFile);

  // noise
  auto* nz = app.add_subcommand("noise", "noise-robustness sweep, vanilla vs differential attention");
  std::string nz_ratios = "0,0.1,0.2,0.4", nz_benchmark, nz_input, nz_train;
  nz->add_option("--ratios", nz_ratios)->capture_default_str();
  nz->add_option("--benchmark", nz_benchmark, "bundled benchmark (default: noise)");
  nz->add_option("--input", nz_input, "labeled embeddings instead of a benchmark")->check(CLI::ExistingFile);
  nz->add_option("--train", nz_train, "labeled predictor training embeddings")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (!gen_benchmark.empty()) {
        const auto b = dc::make_benchmark(gen_benchmark, resolve(g).seed);
        dc::save_embeddings(b.test, out_file(g, "embeddings.bin").string());
        dc::save_embeddings(b.train, out_file(g, "train.bin").string());
        write_report(g, "generate.json",
                     {{"benchmark", b.name}, {"seed", b.config.seed}, {"count", b.test.count()},
                      {"dim", b.test.dim()}, {"train_count", b.train.count()}});
      } else {
        spec.seed = resolve(g).seed;
        const auto e = dc::generate_synthetic(spec);
        dc::save_embeddings(e, out_file(g, "embeddings.bin").string());
        write_report(g, "generate.json",
                     {{"clusters", spec.num_clusters}, {"points_per_cluster", spec.points_per_cluster},
                      {"dim", spec.dim}, {"spread", spec.intra_spread}, {"seed", spec.seed},
                      {"count", e.count()}});
      }
    } else if (*bg) {
      const auto cfg = resolve(g);
      const auto e = dc::load_embeddings(bg_input);
      const auto graph = dc::build_pipeline_graph(cfg, e, 1);
      dc::save_graph(*graph, out_file(g, "graph.bin").string());
      double mean_sim = 0.0;
      for (double s : graph->sim_table()) mean_sim += s;
      mean_sim /= static_cast<double>(graph->sim_table().size());
      write_report(g, "build-graph.json",
                   {{"nodes", graph->size()}, {"k", graph->k()}, {"noise_ratio", cfg.noise_ratio},
                    {"mean_similarity", mean_sim}});
    } else if (*rf) {
      const auto cfg = resolve(g);
      const auto graph = std::make_shared<const dc::KnnGraph>(dc::load_graph(rf_graph));
      const auto table = dc::build_edge_probs(graph, cfg.transform);
      const auto k = static_cast<std::int32_t>(graph->k());
      std::vector<std::int32_t> raw;
      switch (cfg.topk_mode) {
        case dc::TopKMode::Full:
          raw.assign(graph->size(), k);
          break;
        case dc::TopKMode::Oracle: {
          if (rf_embeddings.empty()) throw dc::Error(dc::ErrorKind::Parameter, "oracle Top-K needs --embeddings");
          const auto e = dc::load_embeddings(rf_embeddings);
          if (e.count() != graph->size())
            throw dc::Error(dc::ErrorKind::Parameter, "embeddings and graph differ in node count");
          raw = dc::label_topk(*graph, labels_of(e, "--embeddings"));
          break;
        }
        case dc::TopKMode::Predictor:
          if (rf_predictor.empty()) throw dc::Error(dc::ErrorKind::Parameter, "predictor Top-K needs --predictor");
          raw = dc::predict_topk_all(dc::load_model(rf_predictor), dc::encode_all(table), cfg.threads);
          break;
      }
      dc::TopKVector khat;
      for (auto t : raw) khat.khat.push_back(dc::round_topk(t, k));
      const auto edges = dc::refine_graph(table, khat);
      dc::write_edges_csv(edges, out_file(g, "edges.csv").string());
      std::string topk = "node,topk,khat\n";
      for (std::size_t i = 0; i < raw.size(); ++i)
        topk += std::to_string(i) + "," + std::to_string(raw[i]) + "," + std::to_string(khat.khat[i]) + "\n";
      write_text(out_file(g, "topk.csv"), topk);
      double mean_khat = 0.0;
      for (auto v : khat.khat) mean_khat += v;
      write_report(g, "refine.json",
                   {{"nodes", graph->size()}, {"k", k}, {"topk_mode", dc::to_string(cfg.topk_mode)},
                    {"transform", dc::to_string(cfg.transform.kind)}, {"edges", edges.size()},
                    {"mean_khat", mean_khat / static_cast<double>(khat.khat.size())}});
    } else if (*tp) {
      const auto cfg = resolve(g);
      dc::EmbeddingSet data;
      if (!tp_input.empty()) {
        data = dc::load_embeddings(tp_input);
      } else {
        dc::SyntheticSpec s = cfg.train_data;
        s.seed = dc::mix_seed(cfg.seed ^ s.seed, 8);
        data = dc::generate_synthetic(s);
      }
      const bool pair = tp_head == "pair";
      if (!pair) {
        // Cache the labeled sequences the boundary model trains on.
        const auto graph = dc::build_pipeline_graph(cfg, data, 2);
        const auto labels = labels_of(data, "input");
        const auto seqs = dc::encode_all(dc::build_edge_probs(graph, cfg.transform), &labels);
        dc::save_sequences(seqs, out_file(g, "sequences.bin").string());
      }
      const auto res = pair ? dc::train_pair_model(cfg, data) : dc::train_boundary_model(cfg, data);
      dc::save_model(res.model, out_file(g, pair ? "pair.bin" : "predictor.bin").string());
      std::string curve = "epoch,loss\n";
      for (std::size_t i = 0; i < res.loss_curve.size(); ++i) curve += std::to_string(i + 1) + "," + fmt(res.loss_curve[i]) + "\n";
      write_text(out_file(g, "loss.csv"), curve);
      write_report(g, "train-predictor.json",
                   {{"head", tp_head}, {"variant", dc::attn::to_string(cfg.encoder.variant)},
                    {"samples", data.count()}, {"epochs", cfg.train.epochs}, {"lr", cfg.train.lr},
                    {"momentum", cfg.train.momentum}, {"weight_decay", cfg.train.weight_decay},
                    {"parameters", res.model.parameter_count()},
                    {"final_loss", res.loss_curve.empty() ? 0.0 : res.loss_curve.back()}});
    } else if (*cl) {
      const auto cfg = resolve(g);
      const auto edges = dc::read_edges_csv(cl_edges);
      const auto wg = dc::threshold_edges(cl_nodes, edges, cfg.edge_threshold);
      const bool map = cfg.cluster_mode == dc::ClusterMode::Map && !wg.edges().empty();
      const auto p = map ? dc::map_cluster(wg) : dc::connected_components(wg);
      dc::write_partition_csv(p, out_file(g, "partition.csv").string());
      ordered_json rep = {{"nodes", cl_nodes},
                          {"edges", wg.edges().size()},
                          {"mode", map ? "map" : "components"},
                          {"modules", p.modules()}};
      if (map) rep["codelength"] = dc::map_codelength(wg, p);
      write_report(g, "cluster.json", rep);
    } else if (*ev) {
      resolve(g);
      const auto p = dc::read_partition_csv(ev_partition);
      std::vector<std::int32_t> truth;
      if (!ev_labels.empty()) {
        truth = dc::load_labels_text(ev_labels);
      } else if (!ev_embeddings.empty()) {
        truth = labels_of(dc::load_embeddings(ev_embeddings), "--embeddings");
      } else {
        throw dc::Error(dc::ErrorKind::Parameter, "evaluate needs --embeddings or --labels");
      }
      const auto m = dc::evaluate_partition(p.module, truth);
      write_text(out_file(g, "metrics.json"), dc::metrics_to_json(m) + "\n");
    } else if (*ab) {
      const auto d = load_data(g, ab_benchmark, ab_input, ab_train, ab_grid == "transform" ? "overlapping" : "distractor");
      const auto cfg = resolve(g, d.base);
      const auto grid = ab_grid == "transform" ? dc::transform_grid(cfg) : dc::jaccard_grid(cfg);
      const auto rows = dc::run_ablation(grid, d.test, d.train ? &*d.train : nullptr, g.threads);
      write_text(out_file(g, "ablation.csv"), dc::ablation_csv(rows));
      ordered_json rep = {{"grid", ab_grid}, {"nodes", d.test.count()}, {"k", cfg.k}, {"seed", cfg.seed}};
      for (const auto& r : rows) rep["rows"][r.name] = metrics_json(r.metrics);
      write_report(g, "ablate.json", rep);
    } else if (*nz) {
      const auto ratios = parse_ratios(nz_ratios);
      const auto d = load_data(g, nz_benchmark, nz_input, nz_train, "noise");
      const auto cfg = resolve(g, d.base);
      const auto rows = dc::run_noise_experiment(cfg, ratios, {dc::attn::Variant::Vanilla, dc::attn::Variant::Diff},
                                                 d.test, d.train ? &*d.train : nullptr, g.threads);
      write_text(out_file(g, "noise.csv"), dc::noise_csv(rows));
      ordered_json rep = {{"nodes", d.test.count()}, {"k", cfg.k}, {"seed", cfg.seed}, {"rows", ordered_json::array()}};
      for (const auto& r : rows)
        rep["rows"].push_back(
            {{"ratio", r.ratio}, {"variant", dc::attn::to_string(r.variant)}, {"metrics", metrics_json(r.metrics)}});
      write_report(g, "noise.json", rep);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
