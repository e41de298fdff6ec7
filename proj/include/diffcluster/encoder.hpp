#pragma once

#include <map>
#include <string>
#include <vector>

#include "diffcluster/attention.hpp"

namespace dc::attn {

struct EncoderConfig {
  std::size_t dim = 32;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t ffn_mult = 2;
  Variant variant = Variant::Diff;
  ScaleWidth scale_width = ScaleWidth::Half;
  double lam_init = 0.8;
  int u = 5;

  void validate() const;
};

/// Pre-norm transformer layer:
///   h = x + MHA(LN1(x)),  y = h + FF2(relu(FF1(LN2(h)))).
/// Head h attends over the column slice [h*dh, (h+1)*dh) of LN1(x) with its
/// own parameters; head outputs are concatenated and projected by `wo`.
struct EncoderLayer {
  Vector ln1_gain, ln1_bias;
  std::vector<AttentionParams> heads;
  Matrix wo;
  Vector bo;
  Vector ln2_gain, ln2_bias;
  Matrix ff1;
  Vector ff1_b;
  Matrix ff2;
  Vector ff2_b;

  template <typename F>
  void for_each_tensor(F&& f) {
    auto vec = [&](Vector& v) { f(std::span<double>(v.data(), static_cast<std::size_t>(v.size())), 1, v.size()); };
    auto mat = [&](Matrix& m) { f(std::span<double>(m.data(), static_cast<std::size_t>(m.size())), m.rows(), m.cols()); };
    vec(ln1_gain);
    vec(ln1_bias);
    for (auto& h : heads) h.for_each_tensor(f);
    mat(wo);
    vec(bo);
    vec(ln2_gain);
    vec(ln2_bias);
    mat(ff1);
    vec(ff1_b);
    mat(ff2);
    vec(ff2_b);
  }
};

struct EncoderStack {
  EncoderConfig config;
  std::vector<EncoderLayer> layers;

  static EncoderStack random(const EncoderConfig& cfg, Rng& rng);
  /// Identity-like layers: projection weights are identity, all biases zero.
  static EncoderStack identity_like(const EncoderConfig& cfg);
  static EncoderStack zeros_like(const EncoderStack& like);

  template <typename F>
  void for_each_tensor(F&& f) {
    for (auto& l : layers) l.for_each_tensor(f);
  }
};

struct LayerNormCache {
  Matrix xhat;
  Vector rstd;
};

Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias, LayerNormCache* cache = nullptr);
Matrix layer_norm_backward(const LayerNormCache& c, const Vector& gain, const Matrix& dy, Vector& dgain,
                           Vector& dbias);

struct LayerCache {
  Matrix x;
  LayerNormCache ln1;
  std::vector<AttentionCache> heads;
  Matrix concat;
  Matrix h;
  LayerNormCache ln2;
  Matrix ln2_out;
  Matrix pre_act;
  Matrix act;
};

struct EncoderCache {
  std::vector<AttentionMask> masks;  // referenced by the head caches
  std::vector<LayerCache> layers;
};

/// Runs the stack. `counts` supplies per-row Top-K keep counts for the sparse
/// variants (Sdt: one mask; MoeSdt: masks at k-u, k, k+u). When absent the
/// sparse variants keep every key. Vanilla and Diff ignore `counts`.
Matrix encoder_forward(const Matrix& x, const EncoderStack& stack, const std::vector<int>* counts = nullptr,
                       EncoderCache* cache = nullptr);

/// Backward through the stack; accumulates into `grads`, returns dL/dx.
Matrix encoder_backward(const EncoderCache& cache, const EncoderStack& stack, const Matrix& dout,
                        EncoderStack& grads);

/// Generic checkpoint: a flat key/value config plus tensors in declaration order.
struct Checkpoint {
  std::map<std::string, std::string> config;
  std::vector<Matrix> tensors;
};

std::vector<char> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::vector<char> bytes);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void write_encoder_config(const EncoderConfig& cfg, std::map<std::string, std::string>& out);
EncoderConfig read_encoder_config(const std::map<std::string, std::string>& in);

}  // namespace dc::attn
