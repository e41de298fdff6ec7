#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diffcluster/clustering.hpp"
#include "diffcluster/config.hpp"
#include "diffcluster/metrics.hpp"
#include "diffcluster/predictor.hpp"

namespace dc {

/// How the per-node truncation depth k_hat is obtained.
enum class TopKMode {
  Predictor,  // trained boundary model, then round_topk
  Full,       // k_hat = K (plain weighted Jaccard)
  Oracle,     // label_topk on the evaluated graph, then round_topk (needs labels)
};

enum class ClusterMode { Map, Components };

struct PipelineConfig {
  std::size_t k = 80;
  TransformConfig transform;
  PairScoreThreshold eta;
  TopKMode topk_mode = TopKMode::Predictor;
  attn::EncoderConfig encoder;
  TrainConfig train;
  /// Labeled data the predictor is trained on when no checkpoint is given.
  SyntheticSpec train_data;
  std::string predictor_path;
  /// Drop refined edges whose pair-model score is below eta.
  bool pair_filter = false;
  int pair_samples_per_node = 4;
  ClusterMode cluster_mode = ClusterMode::Map;
  /// Minimum refined probability for an edge to reach the partitioner.
  double edge_threshold = 0.0;
  double noise_ratio = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Directory for content-addressed stage artifacts; empty disables caching.
  std::string cache_dir;

  void validate() const;
};

/// Reads every pipeline key from `c` (unknown keys are left for the caller to reject).
PipelineConfig pipeline_config_from(const Config& c, PipelineConfig base = {});
/// Canonical key/value text of every field; the basis of artifact hashes.
std::string pipeline_config_text(const PipelineConfig& cfg);

std::string to_string(TopKMode m);
TopKMode parse_topk_mode(const std::string& s);
std::string to_string(ClusterMode m);
ClusterMode parse_cluster_mode(const std::string& s);
std::string to_string(TransformKind k);
TransformKind parse_transform_kind(const std::string& s);

struct PipelineResult {
  ClusterAssignment partition;
  std::optional<MetricsReport> metrics;
  std::vector<std::int32_t> khat;
  std::vector<RefinedEdge> edges;
  std::vector<double> loss_curve;
  bool predictor_from_cache = false;
};

/// normalize -> kNN -> (noise) -> edge probabilities -> Top-K -> refinement ->
/// (pair filter) -> edge threshold -> partition -> metrics when labels exist.
/// `train_set` overrides cfg.train_data as the predictor's training data.
PipelineResult run_pipeline(const PipelineConfig& cfg, const EmbeddingSet& embeddings,
                            const EmbeddingSet* train_set = nullptr);

/// Trains the boundary predictor on a labeled set under cfg (k, transform, noise).
TrainResult train_boundary_model(const PipelineConfig& cfg, const EmbeddingSet& train_set);
TrainResult train_pair_model(const PipelineConfig& cfg, const EmbeddingSet& train_set);

/// Graph and probability stages shared by the pipeline and the CLI.
std::shared_ptr<const KnnGraph> build_pipeline_graph(const PipelineConfig& cfg, const EmbeddingSet& e,
                                                     std::uint64_t noise_stream);

struct AblationRow {
  std::string name;
  PipelineConfig config;
  MetricsReport metrics;
};

/// Runs every config on the same data. Rows keep the grid order.
std::vector<AblationRow> run_ablation(const std::vector<std::pair<std::string, PipelineConfig>>& grid,
                                      const EmbeddingSet& data, const EmbeddingSet* train_set = nullptr,
                                      unsigned workers = 1);
/// name,transform,delta,variant,jaccard,fp,fb,nmi
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// The distance-transform grid {exp, sigmoid delta in {5, 7.5, 10}}.
std::vector<std::pair<std::string, PipelineConfig>> transform_grid(const PipelineConfig& base);
/// Top-K truncated versus full-K Jaccard.
std::vector<std::pair<std::string, PipelineConfig>> jaccard_grid(const PipelineConfig& base);

struct NoiseRow {
  double ratio;
  attn::Variant variant;
  MetricsReport metrics;
};

/// For each ratio and each variant in `variants`, trains on noisy graphs and runs the pipeline.
std::vector<NoiseRow> run_noise_experiment(const PipelineConfig& cfg, const std::vector<double>& ratios,
                                           const std::vector<attn::Variant>& variants, const EmbeddingSet& data,
                                           const EmbeddingSet* train_set = nullptr, unsigned workers = 1);
/// ratio,variant,fp,fb,nmi
std::string noise_csv(const std::vector<NoiseRow>& rows);

/// Bundled synthetic benchmarks. Each has a test set and an independently
/// seeded training set drawn from the same generator.
struct Benchmark {
  std::string name;
  EmbeddingSet test;
  EmbeddingSet train;
  PipelineConfig config;
};

/// Names: separated, single, topk30, overlapping, distractor, noise.
Benchmark make_benchmark(const std::string& name, std::uint64_t seed);
std::vector<std::string> benchmark_names();

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace dc
