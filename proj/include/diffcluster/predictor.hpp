#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diffcluster/edge_model.hpp"
#include "diffcluster/encoder.hpp"

namespace dc {

/// Per-token features of a center's neighbor sequence:
/// (a_ij, p_hat_ij, jaccard(N_i, N_j), rank / K).
inline constexpr std::size_t kSequenceFeatures = 4;
/// Per-token features of a pair's joint neighborhood:
/// (in N_i, in N_j, a_ih, a_jh, K * p_hat_ih, K * p_hat_jh).
inline constexpr std::size_t kPairFeatures = 6;

struct NeighborSequence {
  std::uint32_t center = 0;
  Matrix tokens;  // K x kSequenceFeatures, token 0 is the center itself
  std::optional<std::int32_t> true_k;
};

struct TrainConfig {
  double lr = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 30;
  int batch_size = 16;
  double clip_norm = 1.0;  // global gradient-norm clip, 0 disables
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct PairScoreThreshold {
  double eta = 0.90;

  void validate() const;
};

/// Ground-truth boundary per node: the prefix length k in [1, K] maximizing F1
/// between the first k neighbors and all same-label nodes in the K list.
/// Ties go to the smallest k.
std::vector<std::int32_t> label_topk(const KnnGraph& g, const std::vector<std::int32_t>& labels);

NeighborSequence encode_sequence(const EdgeProbTable& table, std::size_t i);
/// Every node's sequence; true_k filled when labels are given.
std::vector<NeighborSequence> encode_all(const EdgeProbTable& table,
                                         const std::vector<std::int32_t>* labels = nullptr);

/// Mask prior for the sparse variants of the boundary model: 1 + the rank with
/// the largest similarity drop to its successor, rounded with round_topk.
int sequence_mask_count(const Matrix& tokens);

struct PairSample {
  Matrix tokens;  // joint neighborhood, anchor's prefix first
  int anchor_count = 1;
  double label = 0.0;
};

/// Tokens for the joint set N_i^{khat_i} u N_j^{khat_j}, anchored at i.
PairSample pair_tokens(const EdgeProbTable& table, const TopKVector& khat, std::size_t i, std::size_t j);

enum class HeadKind { Boundary, Pair };

/// Linear token embedding, encoder stack, final layer norm and a scalar head.
/// Boundary head: one logit per token. Pair head: mean-pooled single logit.
struct TokenModel {
  HeadKind head = HeadKind::Boundary;
  std::size_t features = kSequenceFeatures;
  attn::EncoderStack encoder;
  Matrix embed;  // features x dim
  Vector embed_b;
  Vector ln_gain, ln_bias;
  Vector out_w;
  Vector out_b;  // length 1

  static TokenModel random(HeadKind head, std::size_t features, const attn::EncoderConfig& cfg, Rng& rng);
  static TokenModel zeros_like(const TokenModel& like);

  template <typename F>
  void for_each_tensor(F&& f) {
    auto vec = [&](Vector& v) { f(std::span<double>(v.data(), static_cast<std::size_t>(v.size())), 1, v.size()); };
    f(std::span<double>(embed.data(), static_cast<std::size_t>(embed.size())), embed.rows(), embed.cols());
    vec(embed_b);
    encoder.for_each_tensor(f);
    vec(ln_gain);
    vec(ln_bias);
    vec(out_w);
    vec(out_b);
  }

  std::size_t parameter_count() const;
  double parameter_norm() const;
};

/// Raw head output: per-token logits (boundary) or a single logit (pair).
Vector model_logits(const TokenModel& m, const Matrix& tokens, int mask_count);

/// 1 + argmax of the boundary logits; in [1, K].
std::int32_t predict_topk(const TokenModel& m, const NeighborSequence& seq);
std::vector<std::int32_t> predict_topk_all(const TokenModel& m, const std::vector<NeighborSequence>& seqs,
                                           unsigned threads = 1);

double predict_pair_score(const TokenModel& m, const EdgeProbTable& table, const TopKVector& khat, std::size_t i,
                          std::size_t j);

/// Samples for pair training: up to `per_node` neighbors from each node's
/// k_hat prefix plus one random differently-labeled node.
std::vector<PairSample> build_pair_dataset(const EdgeProbTable& table, const TopKVector& khat,
                                           const std::vector<std::int32_t>& labels, int per_node,
                                           std::uint64_t seed);

/// Boundary cross-entropy of one labeled sequence; accumulates dL/dparams into `grad` when given.
double topk_loss(const TokenModel& m, const NeighborSequence& s, TokenModel* grad = nullptr);
/// Binary cross-entropy of one pair sample.
double pair_loss(const TokenModel& m, const PairSample& s, TokenModel* grad = nullptr);

struct TrainResult {
  TokenModel model;
  std::vector<double> loss_curve;  // mean loss per epoch
};

/// Softmax cross-entropy over positions with target true_k - 1.
TrainResult train_topk(TokenModel model, const std::vector<NeighborSequence>& data, const TrainConfig& cfg);
/// Binary cross-entropy on the pooled logit.
TrainResult train_pair(TokenModel model, const std::vector<PairSample>& data, const TrainConfig& cfg);

attn::Checkpoint model_checkpoint(const TokenModel& m);
TokenModel model_from_checkpoint(const attn::Checkpoint& ck);
void save_model(const TokenModel& m, const std::string& path);
TokenModel load_model(const std::string& path);

std::vector<char> encode_sequences(const std::vector<NeighborSequence>& seqs);
std::vector<NeighborSequence> decode_sequences(std::vector<char> bytes);
void save_sequences(const std::vector<NeighborSequence>& seqs, const std::string& path);
std::vector<NeighborSequence> load_sequences(const std::string& path);

}  // namespace dc
