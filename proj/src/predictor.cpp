#include "diffcluster/predictor.hpp"

#include <algorithm>
#include <exception>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

#include "binary_io.hpp"

namespace dc {

namespace {

constexpr std::uint16_t kSequenceVersion = 1;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double std, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * rng.normal();
  return m;
}

// Rank of h in i's full list, or -1.
int rank_in(const KnnGraph& g, std::size_t i, std::size_t h) {
  const auto nb = g.neighbors(i);
  for (std::size_t r = 0; r < nb.size(); ++r)
    if (nb[r] == h) return static_cast<int>(r);
  return -1;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct ForwardState {
  Matrix x;
  Matrix e;
  attn::EncoderCache enc;
  Matrix h;
  attn::LayerNormCache ln;
  Matrix z;
  Vector logits;
};

std::vector<int> counts_for(const Matrix& tokens, int mask_count) {
  return std::vector<int>(static_cast<std::size_t>(tokens.rows()), mask_count);
}

Vector forward(const TokenModel& m, const Matrix& tokens, int mask_count, ForwardState* st) {
  if (static_cast<std::size_t>(tokens.cols()) != m.features)
    throw Error(ErrorKind::Parameter, "token width does not match the model's feature count");
  const auto counts = counts_for(tokens, mask_count);
  Matrix e = (tokens * m.embed).rowwise() + m.embed_b.transpose();
  attn::EncoderCache enc;
  Matrix h = attn::encoder_forward(e, m.encoder, &counts, st ? &enc : nullptr);
  attn::LayerNormCache ln;
  Matrix z = attn::layer_norm(h, m.ln_gain, m.ln_bias, st ? &ln : nullptr);
  Vector logits;
  if (m.head == HeadKind::Boundary) {
    logits = (z * m.out_w).array() + m.out_b(0);
  } else {
    logits = Vector::Constant(1, z.colwise().mean().dot(m.out_w.transpose()) + m.out_b(0));
  }
  if (st) {
    st->x = tokens;
    st->e = std::move(e);
    st->enc = std::move(enc);
    st->h = std::move(h);
    st->ln = std::move(ln);
    st->z = std::move(z);
    st->logits = logits;
  }
  return logits;
}

// dL/dlogits -> parameter gradients accumulated into g.
void backward(const TokenModel& m, const ForwardState& st, const Vector& dlogits, TokenModel& g) {
  Matrix dz;
  if (m.head == HeadKind::Boundary) {
    g.out_w += st.z.transpose() * dlogits;
    g.out_b(0) += dlogits.sum();
    dz = dlogits * m.out_w.transpose();
  } else {
    const double dl = dlogits(0);
    const auto n = static_cast<double>(st.z.rows());
    g.out_w += dl * st.z.colwise().mean().transpose();
    g.out_b(0) += dl;
    dz = Matrix::Ones(st.z.rows(), 1) * (dl / n * m.out_w.transpose());
  }
  const Matrix dh = attn::layer_norm_backward(st.ln, m.ln_gain, dz, g.ln_gain, g.ln_bias);
  const Matrix de = attn::encoder_backward(st.enc, m.encoder, dh, g.encoder);
  g.embed += st.x.transpose() * de;
  g.embed_b += de.colwise().sum().transpose();
}

std::vector<std::span<double>> tensor_spans(TokenModel& m) {
  std::vector<std::span<double>> out;
  m.for_each_tensor([&](std::span<double> t, auto, auto) { out.push_back(t); });
  return out;
}

void quantize_f32(TokenModel& m) {
  for (auto t : tensor_spans(m))
    for (double& v : t) v = static_cast<double>(static_cast<float>(v));
}

// Loss and gradient of one sample; returns the loss.
using SampleFn = std::function<double(const TokenModel&, std::size_t, TokenModel&)>;

TrainResult train_generic(TokenModel model, std::size_t count, const TrainConfig& cfg, const SampleFn& sample) {
  cfg.validate();
  if (count == 0) throw Error(ErrorKind::Parameter, "training dataset is empty");
  TrainResult res;
  TokenModel velocity = TokenModel::zeros_like(model);
  Rng rng(mix_seed(cfg.seed, 0x7472));
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  const unsigned threads = std::max(1u, cfg.threads);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < count; start += batch) {
      const std::size_t end = std::min(count, start + batch);
      const std::size_t b = end - start;
      // One gradient buffer per sample, summed in sample order so the result
      // does not depend on the thread count.
      std::vector<TokenModel> grads(b, TokenModel::zeros_like(model));
      std::vector<double> losses(b, 0.0);
      std::vector<std::exception_ptr> failures(b);
      auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) try {
            losses[s] = sample(model, order[start + s], grads[s]);
          } catch (...) {
            failures[s] = std::current_exception();
          }
      };
      if (threads == 1 || b == 1) {
        work(0, b);
      } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (b + threads - 1) / threads;
        for (std::size_t lo = 0; lo < b; lo += chunk) pool.emplace_back(work, lo, std::min(b, lo + chunk));
      }
      for (const auto& f : failures) {
        if (!f) continue;
        try {
          std::rethrow_exception(f);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::NumericOverflow) throw;
          throw Error(ErrorKind::TrainingFailure, "diverged in epoch " + std::to_string(epoch) + ": " + e.what());
        }
      }
      for (std::size_t s = 1; s < b; ++s) {
        auto dst = tensor_spans(grads[0]);
        auto src = tensor_spans(grads[s]);
        for (std::size_t t = 0; t < dst.size(); ++t)
          for (std::size_t k = 0; k < dst[t].size(); ++k) dst[t][k] += src[t][k];
      }
      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      if (!std::isfinite(batch_loss))
        throw Error(ErrorKind::TrainingFailure, "loss became non-finite in epoch " + std::to_string(epoch));
      epoch_loss += batch_loss;

      auto params = tensor_spans(model);
      auto grad = tensor_spans(grads[0]);
      auto vel = tensor_spans(velocity);
      double inv_b = 1.0 / static_cast<double>(b);
      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& t : grad)
          for (double v : t) sq += v * v;
        const double norm = std::sqrt(sq) * inv_b;
        if (norm > cfg.clip_norm) inv_b *= cfg.clip_norm / norm;
      }
      for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t k = 0; k < params[t].size(); ++k) {
          const double gk = grad[t][k] * inv_b + cfg.weight_decay * params[t][k];
          vel[t][k] = cfg.momentum * vel[t][k] + gk;
          params[t][k] -= cfg.lr * vel[t][k];
        }
    }
    const double mean = epoch_loss / static_cast<double>(count);
    if (!std::isfinite(mean))
      throw Error(ErrorKind::TrainingFailure, "loss became non-finite in epoch " + std::to_string(epoch));
    res.loss_curve.push_back(mean);
  }
  // Parameters are kept at checkpoint precision so a reloaded model is identical.
  quantize_f32(model);
  res.model = std::move(model);
  return res;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::Parameter, "lr must be a finite value >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorKind::Parameter, "momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw Error(ErrorKind::Parameter, "weight_decay must be >= 0");
  if (epochs < 0) throw Error(ErrorKind::Parameter, "epochs must be >= 0");
  if (batch_size < 1) throw Error(ErrorKind::Parameter, "batch_size must be >= 1");
  if (!(clip_norm >= 0.0)) throw Error(ErrorKind::Parameter, "clip_norm must be >= 0");
}

void PairScoreThreshold::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorKind::Parameter, "eta must lie in (0, 1)");
}

std::vector<std::int32_t> label_topk(const KnnGraph& g, const std::vector<std::int32_t>& labels) {
  if (labels.size() != g.size()) throw Error(ErrorKind::Parameter, "label count does not match graph size");
  std::vector<std::int32_t> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (labels[i] == kUnlabeled) throw Error(ErrorKind::Parameter, "node " + std::to_string(i) + " is unlabeled");
    const auto nb = g.neighbors(i);
    std::int64_t positives = 0;
    for (auto h : nb) {
      if (labels[h] == kUnlabeled) throw Error(ErrorKind::Parameter, "node " + std::to_string(h) + " is unlabeled");
      positives += labels[h] == labels[i];
    }
    // F1 at prefix k is 2 tp / (k + positives); compare fractions exactly.
    std::int64_t tp = 0, best_num = -1, best_den = 1;
    std::int32_t best_k = 1;
    for (std::size_t k = 1; k <= nb.size(); ++k) {
      tp += labels[nb[k - 1]] == labels[i];
      const std::int64_t num = 2 * tp, den = static_cast<std::int64_t>(k) + positives;
      if (num * best_den > best_num * den) {
        best_num = num;
        best_den = den;
        best_k = static_cast<std::int32_t>(k);
      }
    }
    out[i] = best_k;
  }
  return out;
}

NeighborSequence encode_sequence(const EdgeProbTable& table, std::size_t i) {
  const KnnGraph& g = table.graph();
  if (i >= g.size()) throw Error(ErrorKind::Parameter, "node id out of range");
  const std::size_t k = g.k();
  NeighborSequence s;
  s.center = static_cast<std::uint32_t>(i);
  s.tokens.resize(static_cast<Eigen::Index>(k), kSequenceFeatures);
  const auto ni = g.neighbors(i);
  for (std::size_t r = 0; r < k; ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    s.tokens(row, 0) = g.sim(i, r);
    s.tokens(row, 1) = table.norm()(static_cast<Eigen::Index>(i), row);
    s.tokens(row, 2) = jaccard_basic(ni, g.neighbors(ni[r]));
    s.tokens(row, 3) = static_cast<double>(r) / static_cast<double>(k);
  }
  return s;
}

std::vector<NeighborSequence> encode_all(const EdgeProbTable& table, const std::vector<std::int32_t>* labels) {
  std::vector<std::int32_t> truth;
  if (labels) truth = label_topk(table.graph(), *labels);
  std::vector<NeighborSequence> out;
  out.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    out.push_back(encode_sequence(table, i));
    if (labels) out.back().true_k = truth[i];
  }
  return out;
}

int sequence_mask_count(const Matrix& tokens) {
  const auto k = tokens.rows();
  if (k <= 1) return 1;
  Eigen::Index best = 0;
  double gap = -1.0;
  for (Eigen::Index r = 0; r + 1 < k; ++r) {
    const double d = tokens(r, 0) - tokens(r + 1, 0);
    if (d > gap) {
      gap = d;
      best = r;
    }
  }
  return round_topk(static_cast<std::int32_t>(best + 1), static_cast<std::int32_t>(k));
}

PairSample pair_tokens(const EdgeProbTable& table, const TopKVector& khat, std::size_t i, std::size_t j) {
  const KnnGraph& g = table.graph();
  if (i >= g.size() || j >= g.size()) throw Error(ErrorKind::Parameter, "node id out of range");
  if (khat.khat.size() != g.size()) throw Error(ErrorKind::Parameter, "k_hat vector length does not match node count");
  auto depth = [&](std::size_t n) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, khat.khat[n])), 1, g.k());
  };
  const std::size_t di = depth(i), dj = depth(j);
  const auto ni = g.neighbors(i).first(di), nj = g.neighbors(j).first(dj);
  std::vector<std::uint32_t> nodes(ni.begin(), ni.end());
  for (auto h : nj)
    if (std::find(ni.begin(), ni.end(), h) == ni.end()) nodes.push_back(h);

  const double scale = static_cast<double>(g.k());
  PairSample s;
  s.anchor_count = static_cast<int>(di);
  s.tokens = Matrix::Zero(static_cast<Eigen::Index>(nodes.size()), kPairFeatures);
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    const std::uint32_t h = nodes[t];
    const int ri = rank_in(g, i, h), rj = rank_in(g, j, h);
    s.tokens(row, 0) = ri >= 0 && static_cast<std::size_t>(ri) < di;
    s.tokens(row, 1) = rj >= 0 && static_cast<std::size_t>(rj) < dj;
    if (ri >= 0) {
      s.tokens(row, 2) = g.sim(i, static_cast<std::size_t>(ri));
      s.tokens(row, 4) = scale * table.norm()(static_cast<Eigen::Index>(i), ri);
    }
    if (rj >= 0) {
      s.tokens(row, 3) = g.sim(j, static_cast<std::size_t>(rj));
      s.tokens(row, 5) = scale * table.norm()(static_cast<Eigen::Index>(j), rj);
    }
  }
  return s;
}

TokenModel TokenModel::random(HeadKind head, std::size_t features, const attn::EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  TokenModel m;
  m.head = head;
  m.features = features;
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  m.embed = random_matrix(static_cast<Eigen::Index>(features), d, 1.0 / std::sqrt(static_cast<double>(features)), rng);
  m.embed_b = Vector::Zero(d);
  m.encoder = attn::EncoderStack::random(cfg, rng);
  m.ln_gain = Vector::Ones(d);
  m.ln_bias = Vector::Zero(d);
  m.out_w = random_matrix(d, 1, 1.0 / std::sqrt(static_cast<double>(d)), rng).col(0);
  m.out_b = Vector::Zero(1);
  quantize_f32(m);
  return m;
}

TokenModel TokenModel::zeros_like(const TokenModel& like) {
  TokenModel g = like;
  g.for_each_tensor([](std::span<double> t, auto, auto) { std::fill(t.begin(), t.end(), 0.0); });
  return g;
}

std::size_t TokenModel::parameter_count() const {
  std::size_t n = 0;
  const_cast<TokenModel*>(this)->for_each_tensor([&](std::span<double> t, auto, auto) { n += t.size(); });
  return n;
}

double TokenModel::parameter_norm() const {
  double s = 0.0;
  const_cast<TokenModel*>(this)->for_each_tensor([&](std::span<double> t, auto, auto) {
    for (double v : t) s += v * v;
  });
  return std::sqrt(s);
}

Vector model_logits(const TokenModel& m, const Matrix& tokens, int mask_count) {
  return forward(m, tokens, mask_count, nullptr);
}

std::int32_t predict_topk(const TokenModel& m, const NeighborSequence& seq) {
  if (m.head != HeadKind::Boundary) throw Error(ErrorKind::Parameter, "predict_topk needs a boundary model");
  const Vector z = forward(m, seq.tokens, sequence_mask_count(seq.tokens), nullptr);
  Eigen::Index best = 0;
  for (Eigen::Index r = 1; r < z.size(); ++r)
    if (z(r) > z(best)) best = r;
  return static_cast<std::int32_t>(best + 1);
}

std::vector<std::int32_t> predict_topk_all(const TokenModel& m, const std::vector<NeighborSequence>& seqs,
                                           unsigned threads) {
  std::vector<std::int32_t> out(seqs.size());
  std::vector<std::exception_ptr> failures(seqs.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) try {
        out[i] = predict_topk(m, seqs[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
  };
  threads = std::max(1u, threads);
  if (threads == 1 || seqs.size() < 2) {
    work(0, seqs.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (seqs.size() + threads - 1) / threads;
    for (std::size_t lo = 0; lo < seqs.size(); lo += chunk) pool.emplace_back(work, lo, std::min(seqs.size(), lo + chunk));
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

double predict_pair_score(const TokenModel& m, const EdgeProbTable& table, const TopKVector& khat, std::size_t i,
                          std::size_t j) {
  if (m.head != HeadKind::Pair) throw Error(ErrorKind::Parameter, "predict_pair_score needs a pair model");
  const PairSample s = pair_tokens(table, khat, i, j);
  const double z = forward(m, s.tokens, s.anchor_count, nullptr)(0);
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<PairSample> build_pair_dataset(const EdgeProbTable& table, const TopKVector& khat,
                                           const std::vector<std::int32_t>& labels, int per_node,
                                           std::uint64_t seed) {
  const KnnGraph& g = table.graph();
  if (labels.size() != g.size()) throw Error(ErrorKind::Parameter, "label count does not match graph size");
  Rng rng(mix_seed(seed, 0x7061));
  std::vector<PairSample> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t depth = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, khat.khat[i])), 1, g.k());
    std::vector<std::uint32_t> cand(g.neighbors(i).begin() + 1, g.neighbors(i).begin() + static_cast<long>(depth));
    for (int t = 0; t < per_node && !cand.empty(); ++t) {
      const auto pick = rng.below(cand.size());
      const std::uint32_t j = cand[pick];
      cand.erase(cand.begin() + static_cast<long>(pick));
      PairSample s = pair_tokens(table, khat, i, j);
      s.label = labels[i] == labels[j] ? 1.0 : 0.0;
      out.push_back(std::move(s));
    }
    // One differently-labeled node drawn from the whole set, when one exists.
    for (int attempt = 0; attempt < 16; ++attempt) {
      const auto j = static_cast<std::size_t>(rng.below(g.size()));
      if (labels[j] == labels[i]) continue;
      PairSample s = pair_tokens(table, khat, i, j);
      s.label = 0.0;
      out.push_back(std::move(s));
      break;
    }
  }
  return out;
}

double topk_loss(const TokenModel& m, const NeighborSequence& s, TokenModel* grad) {
  if (!s.true_k || *s.true_k < 1 || *s.true_k > s.tokens.rows())
    throw Error(ErrorKind::Parameter, "training sequences need a true_k in [1, K]");
  ForwardState st;
  const Vector z = forward(m, s.tokens, sequence_mask_count(s.tokens), grad ? &st : nullptr);
  const double mx = z.maxCoeff();
  const Vector e = (z.array() - mx).exp();
  const double zsum = e.sum();
  const auto target = static_cast<Eigen::Index>(*s.true_k - 1);
  const double loss = -(z(target) - mx - std::log(zsum));
  if (grad) {
    Vector dz = e / zsum;
    dz(target) -= 1.0;
    backward(m, st, dz, *grad);
  }
  return loss;
}

double pair_loss(const TokenModel& m, const PairSample& s, TokenModel* grad) {
  ForwardState st;
  const double z = forward(m, s.tokens, s.anchor_count, grad ? &st : nullptr)(0);
  // BCE in logit form: y softplus(-z) + (1 - y) softplus(z).
  const double loss = s.label * softplus(-z) + (1.0 - s.label) * softplus(z);
  if (grad) backward(m, st, Vector::Constant(1, 1.0 / (1.0 + std::exp(-z)) - s.label), *grad);
  return loss;
}

TrainResult train_topk(TokenModel model, const std::vector<NeighborSequence>& data, const TrainConfig& cfg) {
  if (model.head != HeadKind::Boundary) throw Error(ErrorKind::Parameter, "train_topk needs a boundary model");
  for (const auto& s : data)
    if (!s.true_k || *s.true_k < 1 || *s.true_k > s.tokens.rows())
      throw Error(ErrorKind::Parameter, "every training sequence needs a true_k in [1, K]");
  return train_generic(std::move(model), data.size(), cfg,
                       [&](const TokenModel& m, std::size_t i, TokenModel& g) { return topk_loss(m, data[i], &g); });
}

TrainResult train_pair(TokenModel model, const std::vector<PairSample>& data, const TrainConfig& cfg) {
  if (model.head != HeadKind::Pair) throw Error(ErrorKind::Parameter, "train_pair needs a pair model");
  return train_generic(std::move(model), data.size(), cfg,
                       [&](const TokenModel& m, std::size_t i, TokenModel& g) { return pair_loss(m, data[i], &g); });
}

attn::Checkpoint model_checkpoint(const TokenModel& m) {
  attn::Checkpoint ck;
  attn::write_encoder_config(m.encoder.config, ck.config);
  ck.config["head"] = m.head == HeadKind::Boundary ? "boundary" : "pair";
  ck.config["features"] = std::to_string(m.features);
  const_cast<TokenModel&>(m).for_each_tensor([&](std::span<double> t, auto rows, auto cols) {
    Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::copy(t.begin(), t.end(), x.data());
    ck.tensors.push_back(std::move(x));
  });
  return ck;
}

TokenModel model_from_checkpoint(const attn::Checkpoint& ck) {
  const auto cfg = attn::read_encoder_config(ck.config);
  auto get = [&](const char* key) -> const std::string& {
    auto it = ck.config.find(key);
    if (it == ck.config.end()) throw Error(ErrorKind::Format, std::string("checkpoint config missing key '") + key + "'");
    return it->second;
  };
  const std::string& head = get("head");
  if (head != "boundary" && head != "pair") throw Error(ErrorKind::Format, "unknown head kind '" + head + "'");
  Rng rng(0);
  TokenModel m = TokenModel::random(head == "boundary" ? HeadKind::Boundary : HeadKind::Pair,
                                    std::stoul(get("features")), cfg, rng);
  std::size_t idx = 0;
  m.for_each_tensor([&](std::span<double> t, auto rows, auto cols) {
    if (idx >= ck.tensors.size()) throw Error(ErrorKind::Format, "checkpoint has too few tensors");
    const Matrix& src = ck.tensors[idx++];
    if (src.rows() != static_cast<Eigen::Index>(rows) || src.cols() != static_cast<Eigen::Index>(cols))
      throw Error(ErrorKind::Format, "checkpoint tensor " + std::to_string(idx - 1) + " has the wrong shape");
    std::copy(src.data(), src.data() + src.size(), t.begin());
  });
  if (idx != ck.tensors.size()) throw Error(ErrorKind::Format, "checkpoint has too many tensors");
  return m;
}

void save_model(const TokenModel& m, const std::string& path) { attn::save_checkpoint(model_checkpoint(m), path); }

TokenModel load_model(const std::string& path) { return model_from_checkpoint(attn::load_checkpoint(path)); }

std::vector<char> encode_sequences(const std::vector<NeighborSequence>& seqs) {
  io::Writer w;
  w.magic("DCSQ");
  w.put<std::uint16_t>(kSequenceVersion);
  w.put<std::uint64_t>(seqs.size());
  const std::uint32_t k = seqs.empty() ? 0 : static_cast<std::uint32_t>(seqs[0].tokens.rows());
  const std::uint32_t t = seqs.empty() ? 0 : static_cast<std::uint32_t>(seqs[0].tokens.cols());
  w.put<std::uint32_t>(k);
  w.put<std::uint32_t>(t);
  for (const auto& s : seqs) {
    if (s.tokens.rows() != k || s.tokens.cols() != t)
      throw Error(ErrorKind::Parameter, "all sequences must share one token shape");
    w.put<std::uint32_t>(s.center);
    w.put<std::int32_t>(s.true_k.value_or(-1));
    for (Eigen::Index i = 0; i < s.tokens.size(); ++i) w.put<float>(static_cast<float>(s.tokens.data()[i]));
  }
  return w.data();
}

std::vector<NeighborSequence> decode_sequences(std::vector<char> bytes) {
  io::Reader r(std::move(bytes));
  r.expect_magic("DCSQ");
  const std::size_t ver_at = r.offset();
  if (r.get<std::uint16_t>("version") != kSequenceVersion) throw FormatError("unsupported sequence version", ver_at);
  const auto count = r.get<std::uint64_t>("sequence count");
  const auto k = r.get<std::uint32_t>("token count");
  const auto t = r.get<std::uint32_t>("feature count");
  std::vector<NeighborSequence> out;
  for (std::uint64_t n = 0; n < count; ++n) {
    NeighborSequence s;
    s.center = r.get<std::uint32_t>("sequence center");
    const auto tk = r.get<std::int32_t>("sequence label");
    if (tk >= 0) s.true_k = tk;
    r.need(std::size_t{k} * t * sizeof(float), "sequence tokens");
    s.tokens.resize(k, t);
    for (Eigen::Index i = 0; i < s.tokens.size(); ++i) s.tokens.data()[i] = r.get<float>("sequence tokens");
    out.push_back(std::move(s));
  }
  if (!r.at_end()) throw FormatError("trailing bytes", r.offset());
  return out;
}

void save_sequences(const std::vector<NeighborSequence>& seqs, const std::string& path) {
  io::Writer w;
  const auto b = encode_sequences(seqs);
  w.bytes(b.data(), b.size());
  w.save(path);
}

std::vector<NeighborSequence> load_sequences(const std::string& path) {
  return decode_sequences(io::read_file(path));
}

}  // namespace dc
