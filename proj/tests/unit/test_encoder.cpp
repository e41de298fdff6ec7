#include <cmath>
#include <filesystem>

#include "diffcluster/encoder.hpp"
#include "doctest.h"

using namespace dc;
using namespace dc::attn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::vector<double> flatten(EncoderStack& s) {
  std::vector<double> v;
  s.for_each_tensor([&](std::span<double> t, auto, auto) { v.insert(v.end(), t.begin(), t.end()); });
  return v;
}

void assign(EncoderStack& s, std::span<const double> v) {
  std::size_t at = 0;
  s.for_each_tensor([&](std::span<double> t, auto, auto) {
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(at), v.begin() + static_cast<std::ptrdiff_t>(at + t.size()), t.begin());
    at += t.size();
  });
}

EncoderConfig small(Variant v) {
  EncoderConfig c;
  c.dim = 8;
  c.heads = 2;
  c.layers = 2;
  c.variant = v;
  c.u = 1;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig c;
  c.dim = 10;
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c.heads = 5;  // per-head width 2 is fine
  CHECK_NOTHROW(c.validate());
  c.dim = 12;
  c.heads = 4;  // width 3 cannot split into two halves
  CHECK_THROWS_AS(c.validate(), Error);
  c = EncoderConfig{};
  c.ffn_mult = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("zero layers is the identity") {
  EncoderConfig c = small(Variant::Diff);
  c.layers = 0;
  Rng rng(1);
  const auto s = EncoderStack::random(c, rng);
  const Matrix x = random_matrix(5, 8, rng);
  CHECK(encoder_forward(x, s) == x);
}

TEST_CASE("identity-like stack maps zero to zero") {
  for (auto v : {Variant::Vanilla, Variant::Diff, Variant::Sdt, Variant::MoeSdt}) {
    const auto s = EncoderStack::identity_like(small(v));
    const Matrix y = encoder_forward(Matrix::Zero(6, 8), s);
    CHECK(y.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("input width must match") {
  Rng rng(2);
  const auto s = EncoderStack::random(small(Variant::Diff), rng);
  CHECK_THROWS_AS(encoder_forward(Matrix::Zero(3, 6), s), Error);
}

TEST_CASE("forward is deterministic and row-permutation equivariant without masks") {
  Rng rng(3);
  const auto s = EncoderStack::random(small(Variant::Diff), rng);
  const Matrix x = random_matrix(7, 8, rng);
  const Matrix a = encoder_forward(x, s);
  CHECK(a == encoder_forward(x, s));
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(7);
  perm.indices() << 3, 0, 6, 1, 5, 2, 4;
  const Matrix px = perm * x;
  const Matrix pa = perm * a;
  CHECK((encoder_forward(px, s) - pa).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("layer norm rows have zero mean and unit variance") {
  Rng rng(4);
  const Matrix x = random_matrix(4, 16, rng) * 3.0;
  const Matrix y = layer_norm(x, Vector::Ones(16), Vector::Zero(16));
  for (Eigen::Index r = 0; r < 4; ++r) {
    CHECK(std::abs(y.row(r).mean()) < 1e-12);
    const double var = (y.row(r).array() - y.row(r).mean()).square().mean();
    // eps = 1e-5 inside the square root
    CHECK(var == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("encoder gradients match finite differences") {
  for (auto v : {Variant::Vanilla, Variant::Diff, Variant::Sdt, Variant::MoeSdt}) {
    CAPTURE(to_string(v));
    Rng rng(10 + static_cast<int>(v));
    EncoderStack s = EncoderStack::random(small(v), rng);
    const Matrix x = random_matrix(6, 8, rng);
    const Matrix w = random_matrix(6, 8, rng);
    const std::vector<int> counts{1, 2, 3, 4, 5, 6};
    const auto* cnt = (v == Variant::Sdt || v == Variant::MoeSdt) ? &counts : nullptr;

    const auto theta = flatten(s);
    LossFn f = [&](std::span<const double> t, std::vector<double>* grad) {
      EncoderStack p = s;
      assign(p, t);
      EncoderCache cache;
      const Matrix y = encoder_forward(x, p, cnt, grad ? &cache : nullptr);
      if (grad) {
        EncoderStack g = EncoderStack::zeros_like(p);
        encoder_backward(cache, p, w, g);
        *grad = flatten(g);
      }
      return y.cwiseProduct(w).sum();
    };
    const auto rep = grad_check(f, theta, 1e-4);
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-4);

    // Input gradient.
    std::vector<double> xv(x.data(), x.data() + x.size());
    LossFn fx = [&](std::span<const double> t, std::vector<double>* grad) {
      Matrix xx = Eigen::Map<const Matrix>(t.data(), 6, 8);
      EncoderCache cache;
      const Matrix y = encoder_forward(xx, s, cnt, grad ? &cache : nullptr);
      if (grad) {
        EncoderStack g = EncoderStack::zeros_like(s);
        const Matrix dx = encoder_backward(cache, s, w, g);
        grad->assign(dx.data(), dx.data() + dx.size());
      }
      return y.cwiseProduct(w).sum();
    };
    CHECK(grad_check(fx, xv, 1e-4).passed);
  }
}

TEST_CASE("checkpoint round trip") {
  Rng rng(5);
  Checkpoint ck;
  write_encoder_config(small(Variant::MoeSdt), ck.config);
  ck.tensors.push_back(random_matrix(3, 4, rng).cast<float>().cast<double>());
  ck.tensors.push_back(Matrix::Zero(1, 1));
  const auto bytes = encode_checkpoint(ck);
  const auto back = decode_checkpoint(bytes);
  CHECK(back.config == ck.config);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0] == ck.tensors[0]);
  CHECK(back.tensors[1] == ck.tensors[1]);
  const auto cfg = read_encoder_config(back.config);
  CHECK(cfg.variant == Variant::MoeSdt);
  CHECK(cfg.dim == 8);
  CHECK(cfg.u == 1);
  CHECK(cfg.lam_init == 0.8);

  const auto path = (std::filesystem::temp_directory_path() / "dc_test_ck.bin").string();
  save_checkpoint(ck, path);
  CHECK(load_checkpoint(path).tensors[0] == ck.tensors[0]);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint decode errors") {
  Checkpoint ck;
  write_encoder_config(small(Variant::Diff), ck.config);
  ck.tensors.push_back(Matrix::Ones(2, 2));
  const auto good = encode_checkpoint(ck);

  auto bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);

  auto ver = good;
  ver[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(ver), FormatError);

  auto cut = good;
  cut.resize(cut.size() - 1);
  CHECK_THROWS_AS(decode_checkpoint(cut), FormatError);

  auto extra = good;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(extra), FormatError);

  auto missing = ck.config;
  missing.erase("dim");
  CHECK_THROWS_AS(read_encoder_config(missing), Error);
}
