#include "diffcluster/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dc::attn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void apply_mask(Matrix& logits, const AttentionMask* mask) {
  if (mask == nullptr) return;
  if (mask->size() != static_cast<std::size_t>(logits.rows()))
    throw Error(ErrorKind::Parameter, "attention mask size does not match sequence length");
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      if (!mask->keep(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) logits(r, c) = kNegInf;
}

// dL/dlogits given dL/dA for A = softmax_rows(logits).
Matrix softmax_backward(const Matrix& a, const Matrix& da) {
  const Vector inner = (a.cwiseProduct(da)).rowwise().sum();
  return a.cwiseProduct(da - inner.replicate(1, da.cols()));
}

}  // namespace

Variant parse_variant(const std::string& s) {
  if (s == "vanilla") return Variant::Vanilla;
  if (s == "diff") return Variant::Diff;
  if (s == "sdt") return Variant::Sdt;
  if (s == "moe-sdt") return Variant::MoeSdt;
  throw Error(ErrorKind::Config, "unknown attention variant '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Vanilla: return "vanilla";
    case Variant::Diff: return "diff";
    case Variant::Sdt: return "sdt";
    case Variant::MoeSdt: return "moe-sdt";
  }
  return "?";
}

ScaleWidth parse_scale_width(const std::string& s) {
  if (s == "half") return ScaleWidth::Half;
  if (s == "full") return ScaleWidth::Full;
  throw Error(ErrorKind::Config, "scale_width must be 'half' or 'full', got '" + s + "'");
}

std::string to_string(ScaleWidth s) { return s == ScaleWidth::Half ? "half" : "full"; }

AttentionParams AttentionParams::random(std::size_t dim, Rng& rng) {
  AttentionParams p;
  p.dim = dim;
  const auto d = static_cast<Eigen::Index>(dim);
  const double w_std = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Matrix* m : {&p.wq, &p.wk, &p.wv}) {
    m->resize(d, d);
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = w_std * rng.normal();
  }
  for (Vector* v : {&p.lam_q1, &p.lam_k1, &p.lam_q2, &p.lam_k2}) {
    v->resize(d / 2);
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = 0.1 * rng.normal();
  }
  p.validate();
  return p;
}

AttentionParams AttentionParams::zeros_like(const AttentionParams& like) {
  AttentionParams g = like;
  g.for_each_tensor([](std::span<double> t, auto, auto) { std::fill(t.begin(), t.end(), 0.0); });
  return g;
}

void AttentionParams::validate() const {
  const auto d = static_cast<Eigen::Index>(dim);
  if (dim < 2 || dim % 2 != 0) throw Error(ErrorKind::Parameter, "attention dim must be even and >= 2");
  for (const Matrix* m : {&wq, &wk, &wv})
    if (m->rows() != d || m->cols() != d)
      throw Error(ErrorKind::Parameter, "projection weights must be dim x dim");
  for (const Vector* v : {&lam_q1, &lam_k1, &lam_q2, &lam_k2})
    if (v->size() != d / 2) throw Error(ErrorKind::Parameter, "lambda vectors must have length dim/2");
  if (u < 1) throw Error(ErrorKind::Parameter, "u must be >= 1");
}

std::vector<double> AttentionParams::to_vector() const {
  std::vector<double> flat;
  const_cast<AttentionParams*>(this)->for_each_tensor(
      [&](std::span<double> t, auto, auto) { flat.insert(flat.end(), t.begin(), t.end()); });
  return flat;
}

void AttentionParams::assign(std::span<const double> flat) {
  std::size_t at = 0;
  for_each_tensor([&](std::span<double> t, auto, auto) {
    if (at + t.size() > flat.size()) throw Error(ErrorKind::Parameter, "flat parameter vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(at),
              flat.begin() + static_cast<std::ptrdiff_t>(at + t.size()), t.begin());
    at += t.size();
  });
  if (at != flat.size()) throw Error(ErrorKind::Parameter, "flat parameter vector too long");
}

AttentionMask::AttentionMask(std::size_t n, std::vector<std::uint8_t> keep) : n_(n), keep_(std::move(keep)) {
  if (keep_.size() != n_ * n_) throw Error(ErrorKind::Parameter, "mask must be n x n");
}

AttentionMask AttentionMask::from_counts(std::size_t n, std::span<const int> counts) {
  if (counts.size() != n) throw Error(ErrorKind::Parameter, "one keep-count per row required");
  std::vector<std::uint8_t> keep(n * n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto c = static_cast<std::size_t>(std::clamp<long>(counts[r], 1, static_cast<long>(n)));
    std::fill_n(keep.begin() + static_cast<std::ptrdiff_t>(r * n), c, std::uint8_t{1});
    keep[r * n + r] = 1;
  }
  return AttentionMask(n, std::move(keep));
}

AttentionMask AttentionMask::from_count(std::size_t n, int count) {
  const std::vector<int> counts(n, count);
  return from_counts(n, counts);
}

AttentionMask AttentionMask::all(std::size_t n) { return AttentionMask(n, std::vector<std::uint8_t>(n * n, 1)); }

AttentionMask AttentionMask::permuted(std::span<const std::size_t> perm) const {
  std::vector<std::uint8_t> keep(n_ * n_);
  for (std::size_t a = 0; a < n_; ++a)
    for (std::size_t b = 0; b < n_; ++b) keep[a * n_ + b] = keep_[perm[a] * n_ + perm[b]];
  return AttentionMask(n_, std::move(keep));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    if (!std::isfinite(mx)) {
      if (mx == kNegInf) throw Error(ErrorKind::DegenerateInput, "fully masked attention row " + std::to_string(r));
      throw Error(ErrorKind::DegenerateInput, "non-finite attention logit in row " + std::to_string(r));
    }
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double e = std::exp(logits(r, c) - mx);
      out(r, c) = e;
      sum += e;
    }
    out.row(r) /= sum;
  }
  return out;
}

Projections project_qkv(const Matrix& x, const AttentionParams& p) {
  p.validate();
  if (static_cast<std::size_t>(x.cols()) != p.dim)
    throw Error(ErrorKind::Parameter, "input width " + std::to_string(x.cols()) + " != attention dim " +
                                          std::to_string(p.dim));
  const auto half = static_cast<Eigen::Index>(p.dim / 2);
  const Matrix q = x * p.wq;
  const Matrix k = x * p.wk;
  return {q.leftCols(half), q.rightCols(half), k.leftCols(half), k.rightCols(half), x * p.wv};
}

double lambda_value(const AttentionParams& p) {
  const double a = p.lam_q1.dot(p.lam_k1), b = p.lam_q2.dot(p.lam_k2);
  const double ea = std::exp(a), eb = std::exp(b);
  if (!std::isfinite(ea) || !std::isfinite(eb))
    throw Error(ErrorKind::NumericOverflow, "exp overflow in lambda reparameterization");
  return ea - eb + p.lam_init;
}

Matrix AttentionCache::coefficients() const {
  Matrix c = Matrix::Zero(map1.front().rows(), map1.front().cols());
  for (std::size_t a = 0; a < map1.size(); ++a) {
    if (variant == Variant::Vanilla)
      c += arm_weight[a] * map1[a];
    else
      c += arm_weight[a] * (map1[a] - lambda * map2[a]);
  }
  return c;
}

AttentionCache attention_forward(Variant variant, const Matrix& x, const AttentionParams& p,
                                 std::span<const AttentionMask* const> arm_masks) {
  AttentionCache c;
  c.variant = variant;
  c.x = x;
  c.proj = project_qkv(x, p);
  const auto n = x.rows();

  switch (variant) {
    case Variant::Vanilla:
    case Variant::Diff:
      if (arm_masks.size() > 1) throw Error(ErrorKind::Parameter, "vanilla/diff take at most one mask");
      c.masks = {arm_masks.empty() ? nullptr : arm_masks[0]};
      c.arm_weight = {1.0};
      break;
    case Variant::Sdt:
      if (arm_masks.size() != 1 || arm_masks[0] == nullptr)
        throw Error(ErrorKind::Parameter, "sparse differential attention needs exactly one mask");
      c.masks = {arm_masks[0]};
      c.arm_weight = {1.0};
      break;
    case Variant::MoeSdt:
      if (arm_masks.size() != 3) throw Error(ErrorKind::Parameter, "MoE-SDT needs three masks");
      c.masks.assign(arm_masks.begin(), arm_masks.end());
      c.arm_weight = {p.alpha, p.beta, p.gamma};
      break;
  }

  if (variant == Variant::Vanilla) {
    c.scale = 1.0 / std::sqrt(static_cast<double>(p.dim));
    c.q_full = x * p.wq;
    c.k_full = x * p.wk;
    Matrix logits = c.scale * (c.q_full * c.k_full.transpose());
    apply_mask(logits, c.masks[0]);
    c.map1.push_back(softmax_rows(logits));
    c.out = c.map1[0] * c.proj.v;
    return c;
  }

  const double width = p.scale_width == ScaleWidth::Half ? static_cast<double>(p.dim / 2)
                                                         : static_cast<double>(p.dim);
  c.scale = 1.0 / std::sqrt(width);
  c.lambda = lambda_value(p);
  c.exp1 = std::exp(p.lam_q1.dot(p.lam_k1));
  c.exp2 = std::exp(p.lam_q2.dot(p.lam_k2));
  const Matrix base1 = c.scale * (c.proj.q1 * c.proj.k1.transpose());
  const Matrix base2 = c.scale * (c.proj.q2 * c.proj.k2.transpose());
  c.out = Matrix::Zero(n, static_cast<Eigen::Index>(p.dim));
  for (std::size_t a = 0; a < c.masks.size(); ++a) {
    Matrix l1 = base1, l2 = base2;
    apply_mask(l1, c.masks[a]);
    apply_mask(l2, c.masks[a]);
    c.map1.push_back(softmax_rows(l1));
    c.map2.push_back(softmax_rows(l2));
    const Matrix coef = c.map1[a] - c.lambda * c.map2[a];
    c.out += c.arm_weight[a] * (coef * c.proj.v);
  }
  return c;
}

Matrix attention_backward(const AttentionCache& c, const AttentionParams& p, const Matrix& dout,
                          AttentionParams& grads) {
  const Matrix& x = c.x;
  const Matrix& v = c.proj.v;
  const Matrix gv = dout * v.transpose();  // dL/dC for a unit-weight arm

  if (c.variant == Variant::Vanilla) {
    const Matrix& a = c.map1[0];
    const Matrix dv = a.transpose() * dout;
    const Matrix ds = softmax_backward(a, gv);
    const Matrix dq = c.scale * (ds * c.k_full);
    const Matrix dk = c.scale * (ds.transpose() * c.q_full);
    grads.wq += x.transpose() * dq;
    grads.wk += x.transpose() * dk;
    grads.wv += x.transpose() * dv;
    return dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
  }

  const auto n = x.rows();
  const auto half = static_cast<Eigen::Index>(p.dim / 2);
  Matrix dv = Matrix::Zero(n, static_cast<Eigen::Index>(p.dim));
  Matrix dq1 = Matrix::Zero(n, half), dq2 = dq1, dk1 = dq1, dk2 = dq1;
  double dlambda = 0.0;
  for (std::size_t a = 0; a < c.map1.size(); ++a) {
    const double w = c.arm_weight[a];
    const Matrix& a1 = c.map1[a];
    const Matrix& a2 = c.map2[a];
    const Matrix coef = a1 - c.lambda * a2;
    dv += w * (coef.transpose() * dout);
    if (c.variant == Variant::MoeSdt) {
      const double dw = coef.cwiseProduct(gv).sum();
      (a == 0 ? grads.alpha : a == 1 ? grads.beta : grads.gamma) += dw;
    }
    const Matrix dcoef = w * gv;
    dlambda -= dcoef.cwiseProduct(a2).sum();
    const Matrix ds1 = softmax_backward(a1, dcoef);
    const Matrix ds2 = softmax_backward(a2, -c.lambda * dcoef);
    dq1 += c.scale * (ds1 * c.proj.k1);
    dk1 += c.scale * (ds1.transpose() * c.proj.q1);
    dq2 += c.scale * (ds2 * c.proj.k2);
    dk2 += c.scale * (ds2.transpose() * c.proj.q2);
  }
  Matrix dq(n, static_cast<Eigen::Index>(p.dim)), dk(n, static_cast<Eigen::Index>(p.dim));
  dq << dq1, dq2;
  dk << dk1, dk2;
  grads.wq += x.transpose() * dq;
  grads.wk += x.transpose() * dk;
  grads.wv += x.transpose() * dv;
  grads.lam_q1 += dlambda * c.exp1 * p.lam_k1;
  grads.lam_k1 += dlambda * c.exp1 * p.lam_q1;
  grads.lam_q2 -= dlambda * c.exp2 * p.lam_k2;
  grads.lam_k2 -= dlambda * c.exp2 * p.lam_q2;
  return dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
}

Matrix vanilla_attention(const Matrix& x, const AttentionParams& p, const AttentionMask* mask) {
  const AttentionMask* masks[] = {mask};
  return attention_forward(Variant::Vanilla, x, p, std::span(masks, mask ? 1 : 0)).out;
}

Matrix diff_attention(const Matrix& x, const AttentionParams& p) {
  return attention_forward(Variant::Diff, x, p).out;
}

Matrix sparse_diff_attention(const Matrix& x, const AttentionParams& p, const AttentionMask& mask) {
  const AttentionMask* masks[] = {&mask};
  return attention_forward(Variant::Sdt, x, p, masks).out;
}

std::vector<AttentionMask> moe_masks(std::size_t n, std::span<const int> counts, int u) {
  if (counts.size() != n) throw Error(ErrorKind::Parameter, "one Top-K count per row required");
  std::vector<AttentionMask> masks;
  for (int shift : {-u, 0, u}) {
    std::vector<int> c(counts.begin(), counts.end());
    for (auto& v : c) {
      if (v < 1) throw Error(ErrorKind::Parameter, "Top-K counts must be >= 1");
      v = std::clamp(v + shift, 1, static_cast<int>(n));
    }
    masks.push_back(AttentionMask::from_counts(n, c));
  }
  return masks;
}

Matrix moe_sdt_attention(const Matrix& x, const AttentionParams& p, std::span<const int> topk_row_counts) {
  const auto masks = moe_masks(static_cast<std::size_t>(x.rows()), topk_row_counts, p.u);
  const AttentionMask* ptrs[] = {&masks[0], &masks[1], &masks[2]};
  return attention_forward(Variant::MoeSdt, x, p, ptrs).out;
}

GradCheckReport grad_check(const LossFn& f, std::span<const double> point, double tolerance, double step,
                           double rel_floor) {
  std::vector<double> analytic;
  f(point, &analytic);
  if (analytic.size() != point.size())
    throw Error(ErrorKind::Parameter, "gradient length does not match parameter count");
  for (std::size_t i = 0; i < analytic.size(); ++i)
    if (!std::isfinite(analytic[i]))
      throw Error(ErrorKind::NumericOverflow, "non-finite analytic gradient at index " + std::to_string(i));

  GradCheckReport rep;
  std::vector<double> theta(point.begin(), point.end());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    const double up = f(theta, nullptr);
    theta[i] = saved - step;
    const double down = f(theta, nullptr);
    theta[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double abs_err = std::abs(numeric - analytic[i]);
    const double rel = abs_err / std::max({std::abs(numeric), std::abs(analytic[i]), rel_floor});
    rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_index = i;
    }
  }
  rep.checked = theta.size();
  rep.passed = rep.max_rel_error < tolerance;
  return rep;
}

}  // namespace dc::attn
