#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "diffcluster/common.hpp"

namespace dc::attn {

enum class Variant { Vanilla, Diff, Sdt, MoeSdt };

/// Which key width the logits are scaled by: d/2 (per differential map) or d.
enum class ScaleWidth { Half, Full };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);
ScaleWidth parse_scale_width(const std::string& s);
std::string to_string(ScaleWidth s);

/// Parameters of one attention head of width `dim`.
///
/// The same struct doubles as the gradient container: a backward pass fills
/// a zero-initialized AttentionParams of identical shape.
struct AttentionParams {
  std::size_t dim = 0;
  Matrix wq, wk, wv;
  Vector lam_q1, lam_k1, lam_q2, lam_k2;
  double lam_init = 0.8;
  double alpha = 1.0 / 3.0;
  double beta = 1.0 / 3.0;
  double gamma = 1.0 / 3.0;
  int u = 5;
  ScaleWidth scale_width = ScaleWidth::Half;

  /// Identity-free random init: weights ~ N(0, 1/dim), lambda vectors ~ N(0, 0.1^2).
  static AttentionParams random(std::size_t dim, Rng& rng);
  /// Same shapes as `like`, every learnable entry zero; hyper-parameters copied.
  static AttentionParams zeros_like(const AttentionParams& like);

  void validate() const;

  /// Visits every learnable tensor in declaration order:
  /// wq, wk, wv, lam_q1, lam_k1, lam_q2, lam_k2, alpha, beta, gamma.
  template <typename F>
  void for_each_tensor(F&& f) {
    f(std::span<double>(wq.data(), static_cast<std::size_t>(wq.size())), wq.rows(), wq.cols());
    f(std::span<double>(wk.data(), static_cast<std::size_t>(wk.size())), wk.rows(), wk.cols());
    f(std::span<double>(wv.data(), static_cast<std::size_t>(wv.size())), wv.rows(), wv.cols());
    for (Vector* v : {&lam_q1, &lam_k1, &lam_q2, &lam_k2})
      f(std::span<double>(v->data(), static_cast<std::size_t>(v->size())), 1, v->size());
    f(std::span<double>(&alpha, 1), 1, 1);
    f(std::span<double>(&beta, 1), 1, 1);
    f(std::span<double>(&gamma, 1), 1, 1);
  }

  std::vector<double> to_vector() const;
  void assign(std::span<const double> flat);
};

/// Key-visibility mask over an N x N logit matrix. Keys are assumed to be in
/// relevance order (rank order of the underlying neighbor list).
class AttentionMask {
 public:
  AttentionMask() = default;
  /// Explicit row-major keep matrix (1 = keep).
  AttentionMask(std::size_t n, std::vector<std::uint8_t> keep);

  /// Row r keeps key positions [0, counts[r]) plus the diagonal. Counts are clamped to [1, n].
  static AttentionMask from_counts(std::size_t n, std::span<const int> counts);
  static AttentionMask from_count(std::size_t n, int count);
  static AttentionMask all(std::size_t n);

  std::size_t size() const { return n_; }
  bool keep(std::size_t row, std::size_t col) const { return keep_[row * n_ + col] != 0; }

  /// Same mask with rows and columns reordered: result(a, b) = keep(perm[a], perm[b]).
  AttentionMask permuted(std::span<const std::size_t> perm) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> keep_;
};

/// Row-wise softmax with max subtraction; -inf entries map to exactly 0.
/// Throws DegenerateInput for a row with no finite entry.
Matrix softmax_rows(const Matrix& logits);

struct Projections {
  Matrix q1, q2, k1, k2, v;
};

/// [Q1, Q2] = x Wq, [K1, K2] = x Wk, V = x Wv; split at column d/2.
Projections project_qkv(const Matrix& x, const AttentionParams& p);

/// exp(lam_q1 . lam_k1) - exp(lam_q2 . lam_k2) + lam_init.
double lambda_value(const AttentionParams& p);

/// Forward state retained for the backward pass.
struct AttentionCache {
  Variant variant = Variant::Diff;
  Matrix x;
  Projections proj;
  Matrix q_full, k_full;                // vanilla only
  std::vector<const AttentionMask*> masks;
  std::vector<Matrix> map1, map2;       // softmax maps per arm (map2 unused for vanilla)
  std::vector<double> arm_weight;
  double lambda = 0.0;
  double exp1 = 0.0, exp2 = 0.0;
  double scale = 1.0;
  Matrix out;

  /// Effective coefficient matrix applied to V: sum over arms of w (A1 - lambda A2).
  Matrix coefficients() const;
};

/// Runs one attention head. `arm_masks` must outlive the cache:
///  - Vanilla, Diff: zero or one mask (Diff ignores none; a mask simply restricts keys)
///  - Sdt: exactly one mask
///  - MoeSdt: exactly three masks, mixed with weights alpha, beta, gamma.
AttentionCache attention_forward(Variant variant, const Matrix& x, const AttentionParams& p,
                                 std::span<const AttentionMask* const> arm_masks = {});

/// Reverse-mode pass. Accumulates parameter gradients into `grads` (same shape
/// as the params) and returns dL/dx.
Matrix attention_backward(const AttentionCache& cache, const AttentionParams& p, const Matrix& dout,
                          AttentionParams& grads);

/// softmax(Q K^T / sqrt(d)) V with the full-width (unsplit) projections.
Matrix vanilla_attention(const Matrix& x, const AttentionParams& p, const AttentionMask* mask = nullptr);
/// (softmax(Q1 K1^T s) - lambda softmax(Q2 K2^T s)) V.
Matrix diff_attention(const Matrix& x, const AttentionParams& p);
/// diff_attention with masked logits set to -inf inside both softmaxes.
Matrix sparse_diff_attention(const Matrix& x, const AttentionParams& p, const AttentionMask& mask);
/// alpha SDT(M_{k-u}) + beta SDT(M_k) + gamma SDT(M_{k+u}) with per-row counts k.
Matrix moe_sdt_attention(const Matrix& x, const AttentionParams& p, std::span<const int> topk_row_counts);

/// The three MoE masks for per-row counts k: k-u, k, k+u (each clamped to [1, N]).
std::vector<AttentionMask> moe_masks(std::size_t n, std::span<const int> counts, int u);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Scalar loss at `theta`; when `grad` is non-null it receives dL/dtheta.
using LossFn = std::function<double(std::span<const double> theta, std::vector<double>* grad)>;

/// Central finite differences (step `step`) against the analytic gradient.
/// Relative error per entry is |a - n| / max(|a|, |n|, rel_floor).
/// Throws NumericOverflow if the analytic gradient is non-finite.
GradCheckReport grad_check(const LossFn& f, std::span<const double> point, double tolerance,
                           double step = 1e-5, double rel_floor = 1e-4);

}  // namespace dc::attn
