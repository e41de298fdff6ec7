#include "diffcluster/encoder.hpp"

#include <cmath>
#include <sstream>

#include "binary_io.hpp"

namespace dc::attn {

namespace {

constexpr double kLnEps = 1e-5;
constexpr std::uint16_t kCheckpointVersion = 1;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double std, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * rng.normal();
  return m;
}

std::vector<AttentionMask> layer_masks(const EncoderConfig& cfg, std::size_t n, const std::vector<int>* counts) {
  std::vector<int> c = counts ? *counts : std::vector<int>(n, static_cast<int>(n));
  if (c.size() != n) throw Error(ErrorKind::Parameter, "Top-K count vector length must equal sequence length");
  switch (cfg.variant) {
    case Variant::Sdt: return {AttentionMask::from_counts(n, c)};
    case Variant::MoeSdt: return moe_masks(n, c, cfg.u);
    default: return {};
  }
}

}  // namespace

void EncoderConfig::validate() const {
  if (heads == 0 || dim % heads != 0) throw Error(ErrorKind::Parameter, "heads must divide dim");
  const std::size_t dh = dim / heads;
  if (dh < 2 || dh % 2 != 0) throw Error(ErrorKind::Parameter, "per-head width dim/heads must be even");
  if (ffn_mult == 0) throw Error(ErrorKind::Parameter, "ffn_mult must be positive");
  if (u < 1) throw Error(ErrorKind::Parameter, "u must be >= 1");
}

EncoderStack EncoderStack::random(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderStack s;
  s.config = cfg;
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const auto f = static_cast<Eigen::Index>(cfg.dim * cfg.ffn_mult);
  const std::size_t dh = cfg.dim / cfg.heads;
  // Residual-branch outputs are down-scaled by the layer count.
  const double branch = 1.0 / std::sqrt(2.0 * static_cast<double>(std::max<std::size_t>(cfg.layers, 1)));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    EncoderLayer layer;
    layer.ln1_gain = Vector::Ones(d);
    layer.ln1_bias = Vector::Zero(d);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      auto p = AttentionParams::random(dh, rng);
      p.lam_init = cfg.lam_init;
      p.u = cfg.u;
      p.scale_width = cfg.scale_width;
      layer.heads.push_back(std::move(p));
    }
    layer.wo = random_matrix(d, d, branch / std::sqrt(static_cast<double>(d)), rng);
    layer.bo = Vector::Zero(d);
    layer.ln2_gain = Vector::Ones(d);
    layer.ln2_bias = Vector::Zero(d);
    layer.ff1 = random_matrix(d, f, std::sqrt(2.0 / static_cast<double>(d)), rng);
    layer.ff1_b = Vector::Zero(f);
    layer.ff2 = random_matrix(f, d, branch / std::sqrt(static_cast<double>(f)), rng);
    layer.ff2_b = Vector::Zero(d);
    s.layers.push_back(std::move(layer));
  }
  return s;
}

EncoderStack EncoderStack::identity_like(const EncoderConfig& cfg) {
  Rng rng(0);
  EncoderStack s = random(cfg, rng);
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  for (auto& l : s.layers) {
    for (auto& h : l.heads) {
      const auto dh = static_cast<Eigen::Index>(h.dim);
      h.wq = h.wk = h.wv = Matrix::Identity(dh, dh);
      h.lam_q1.setZero();
      h.lam_k1.setZero();
      h.lam_q2.setZero();
      h.lam_k2.setZero();
    }
    l.wo = Matrix::Identity(d, d);
    l.ff1 = Matrix::Identity(d, l.ff1.cols());
    l.ff2 = Matrix::Identity(l.ff2.rows(), d);
  }
  return s;
}

EncoderStack EncoderStack::zeros_like(const EncoderStack& like) {
  EncoderStack g = like;
  g.for_each_tensor([](std::span<double> t, auto, auto) { std::fill(t.begin(), t.end(), 0.0); });
  return g;
}

Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias, LayerNormCache* cache) {
  const auto n = x.rows(), d = x.cols();
  Matrix xhat(n, d);
  Vector rstd(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    rstd(r) = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(r) = (x.row(r).array() - mean) * rstd(r);
  }
  Matrix y = (xhat.array().rowwise() * gain.transpose().array()).rowwise() + bias.transpose().array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

Matrix layer_norm_backward(const LayerNormCache& c, const Vector& gain, const Matrix& dy, Vector& dgain,
                           Vector& dbias) {
  dgain += (dy.cwiseProduct(c.xhat)).colwise().sum().transpose();
  dbias += dy.colwise().sum().transpose();
  const Matrix dxhat = dy.array().rowwise() * gain.transpose().array();
  const auto d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).sum() / d;
    const double m2 = dxhat.row(r).dot(c.xhat.row(r)) / d;
    dx.row(r) = c.rstd(r) * (dxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2);
  }
  return dx;
}

Matrix encoder_forward(const Matrix& x, const EncoderStack& stack, const std::vector<int>* counts,
                       EncoderCache* cache) {
  if (stack.layers.empty()) return x;
  const EncoderConfig& cfg = stack.config;
  cfg.validate();
  if (static_cast<std::size_t>(x.cols()) != cfg.dim)
    throw Error(ErrorKind::Parameter, "encoder input width does not match dim");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto dh = static_cast<Eigen::Index>(cfg.dim / cfg.heads);

  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.masks = layer_masks(cfg, n, counts);
  c.layers.clear();
  std::vector<const AttentionMask*> mask_ptrs;
  for (const auto& m : c.masks) mask_ptrs.push_back(&m);

  Matrix cur = x;
  for (const auto& layer : stack.layers) {
    LayerCache lc;
    lc.x = cur;
    const Matrix ln1 = layer_norm(cur, layer.ln1_gain, layer.ln1_bias, &lc.ln1);
    lc.concat.resize(cur.rows(), cur.cols());
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const Matrix slice = ln1.middleCols(static_cast<Eigen::Index>(h) * dh, dh);
      auto hc = attention_forward(cfg.variant, slice, layer.heads[h], mask_ptrs);
      lc.concat.middleCols(static_cast<Eigen::Index>(h) * dh, dh) = hc.out;
      lc.heads.push_back(std::move(hc));
    }
    lc.h = cur + ((lc.concat * layer.wo).rowwise() + layer.bo.transpose());
    lc.ln2_out = layer_norm(lc.h, layer.ln2_gain, layer.ln2_bias, &lc.ln2);
    lc.pre_act = (lc.ln2_out * layer.ff1).rowwise() + layer.ff1_b.transpose();
    lc.act = lc.pre_act.cwiseMax(0.0);
    cur = lc.h + ((lc.act * layer.ff2).rowwise() + layer.ff2_b.transpose());
    c.layers.push_back(std::move(lc));
  }
  return cur;
}

Matrix encoder_backward(const EncoderCache& cache, const EncoderStack& stack, const Matrix& dout,
                        EncoderStack& grads) {
  if (stack.layers.empty()) return dout;
  const EncoderConfig& cfg = stack.config;
  const auto dh = static_cast<Eigen::Index>(cfg.dim / cfg.heads);
  Matrix dy = dout;
  for (std::size_t li = stack.layers.size(); li-- > 0;) {
    const EncoderLayer& layer = stack.layers[li];
    EncoderLayer& g = grads.layers[li];
    const LayerCache& lc = cache.layers[li];

    // Feed-forward branch.
    g.ff2 += lc.act.transpose() * dy;
    g.ff2_b += dy.colwise().sum().transpose();
    Matrix dact = dy * layer.ff2.transpose();
    Matrix dpre = dact.cwiseProduct((lc.pre_act.array() > 0.0).cast<double>().matrix());
    g.ff1 += lc.ln2_out.transpose() * dpre;
    g.ff1_b += dpre.colwise().sum().transpose();
    const Matrix dln2 = dpre * layer.ff1.transpose();
    Matrix dh_total = dy + layer_norm_backward(lc.ln2, layer.ln2_gain, dln2, g.ln2_gain, g.ln2_bias);

    // Attention branch.
    g.wo += lc.concat.transpose() * dh_total;
    g.bo += dh_total.colwise().sum().transpose();
    const Matrix dconcat = dh_total * layer.wo.transpose();
    Matrix dln1(dconcat.rows(), dconcat.cols());
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const Matrix dhead = dconcat.middleCols(static_cast<Eigen::Index>(h) * dh, dh);
      dln1.middleCols(static_cast<Eigen::Index>(h) * dh, dh) =
          attention_backward(lc.heads[h], layer.heads[h], dhead, g.heads[h]);
    }
    dy = dh_total + layer_norm_backward(lc.ln1, layer.ln1_gain, dln1, g.ln1_gain, g.ln1_bias);
  }
  return dy;
}

std::vector<char> encode_checkpoint(const Checkpoint& ck) {
  io::Writer w;
  w.magic("DCAT");
  w.put<std::uint16_t>(kCheckpointVersion);
  std::string cfg;
  for (const auto& [k, v] : ck.config) cfg += k + " = " + v + "\n";
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg.data(), cfg.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.cols()));
  }
  for (const auto& t : ck.tensors)
    for (Eigen::Index i = 0; i < t.size(); ++i) w.put<float>(static_cast<float>(t.data()[i]));
  return w.data();
}

Checkpoint decode_checkpoint(std::vector<char> bytes) {
  io::Reader r(std::move(bytes));
  r.expect_magic("DCAT");
  const std::size_t ver_at = r.offset();
  if (r.get<std::uint16_t>("version") != kCheckpointVersion) throw FormatError("unsupported checkpoint version", ver_at);
  const auto cfg_len = r.get<std::uint32_t>("config length");
  r.need(cfg_len, "config text");
  std::string cfg(cfg_len, '\0');
  for (auto& ch : cfg) ch = r.get<char>("config text");
  Checkpoint ck;
  std::istringstream ss(cfg);
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    ck.config[line.substr(0, eq)] = line.substr(eq + 3);
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(count);
  for (auto& [rows, cols] : shapes) {
    rows = r.get<std::uint32_t>("shape table");
    cols = r.get<std::uint32_t>("shape table");
  }
  for (const auto& [rows, cols] : shapes) {
    r.need(std::size_t{rows} * cols * sizeof(float), "tensor data");
    Matrix t(rows, cols);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<double>(r.get<float>("tensor data"));
    ck.tensors.push_back(std::move(t));
  }
  if (!r.at_end()) throw FormatError("trailing bytes", r.offset());
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  io::Writer w;
  const auto bytes = encode_checkpoint(ck);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

void write_encoder_config(const EncoderConfig& cfg, std::map<std::string, std::string>& out) {
  out["layers"] = std::to_string(cfg.layers);
  out["heads"] = std::to_string(cfg.heads);
  out["dim"] = std::to_string(cfg.dim);
  out["ffn_mult"] = std::to_string(cfg.ffn_mult);
  out["variant"] = to_string(cfg.variant);
  out["u"] = std::to_string(cfg.u);
  std::ostringstream lam;
  lam.precision(17);
  lam << cfg.lam_init;
  out["lam_init"] = lam.str();
  out["scale_width"] = to_string(cfg.scale_width);
}

EncoderConfig read_encoder_config(const std::map<std::string, std::string>& in) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = in.find(key);
    if (it == in.end()) throw Error(ErrorKind::Format, std::string("checkpoint config missing key '") + key + "'");
    return it->second;
  };
  EncoderConfig cfg;
  cfg.layers = std::stoul(get("layers"));
  cfg.heads = std::stoul(get("heads"));
  cfg.dim = std::stoul(get("dim"));
  if (in.count("ffn_mult")) cfg.ffn_mult = std::stoul(in.at("ffn_mult"));
  cfg.variant = parse_variant(get("variant"));
  cfg.u = std::stoi(get("u"));
  cfg.lam_init = std::stod(get("lam_init"));
  cfg.scale_width = parse_scale_width(get("scale_width"));
  cfg.validate();
  return cfg;
}

}  // namespace dc::attn
