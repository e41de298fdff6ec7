#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "diffcluster/embeddings.hpp"
#include "doctest.h"

using namespace dc;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool bit_equal(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.count() != b.count() || a.dim() != b.dim() || a.labels() != b.labels()) return false;
  return std::memcmp(a.rows().data(), b.rows().data(), sizeof(double) * a.count() * a.dim()) == 0;
}

}  // namespace

TEST_CASE("generate_synthetic with zero spread collapses onto the center") {
  const auto e = generate_synthetic({.num_clusters = 1, .points_per_cluster = 3, .dim = 8,
                                     .intra_spread = 0.0, .seed = 3});
  REQUIRE(e.count() == 3);
  for (int i = 1; i < 3; ++i) CHECK((e.rows().row(i) - e.rows().row(0)).norm() == 0.0);
  CHECK(e.rows().row(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (auto l : *e.labels()) CHECK(l == 0);
}

TEST_CASE("generate_synthetic is a pure function of its spec") {
  const SyntheticSpec spec{.num_clusters = 2, .points_per_cluster = 5, .dim = 16,
                           .intra_spread = 0.1, .seed = 7};
  CHECK(bit_equal(generate_synthetic(spec), generate_synthetic(spec)));
  auto other = spec;
  other.seed = 8;
  CHECK_FALSE(bit_equal(generate_synthetic(spec), generate_synthetic(other)));
}

TEST_CASE("generate_synthetic: nearest-centroid oracle recovers every label at spread 0.15") {
  const auto e = generate_synthetic({.num_clusters = 20, .points_per_cluster = 50, .dim = 64,
                                     .intra_spread = 0.15, .seed = 11});
  REQUIRE(e.count() == 1000);
  const auto& labels = *e.labels();
  Matrix centroids = Matrix::Zero(20, 64);
  for (std::size_t i = 0; i < e.count(); ++i) centroids.row(labels[i]) += e.rows().row(i);
  for (int c = 0; c < 20; ++c) centroids.row(c).normalize();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < e.count(); ++i) {
    Eigen::Index best;
    (centroids * e.rows().row(i).transpose()).maxCoeff(&best);
    correct += (best == labels[i]);
  }
  CHECK(correct == e.count());
}

TEST_CASE("generate_synthetic rejects dim < 2") {
  CHECK_THROWS_AS(generate_synthetic({.num_clusters = 1, .points_per_cluster = 1, .dim = 1}), Error);
}

TEST_CASE("l2_normalize") {
  Matrix m(2, 2);
  m << 3, 4, 0.6, 0.8;
  const auto n = l2_normalize(EmbeddingSet(m));
  CHECK(n.normalized());
  CHECK(n.rows()(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n.rows()(0, 1) == doctest::Approx(0.8).epsilon(1e-15));

  SUBCASE("idempotent") {
    const auto twice = l2_normalize(n);
    CHECK((twice.rows() - n.rows()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("zero row names its index") {
    Matrix z(3, 2);
    z << 1, 0, 0, 0, 0, 1;
    try {
      l2_normalize(EmbeddingSet(z));
      FAIL("expected an error");
    } catch (const Error& err) {
      CHECK(err.kind() == ErrorKind::DegenerateInput);
      CHECK(std::string(err.what()).find("row 1") != std::string::npos);
    }
  }
  SUBCASE("random rows land on the unit sphere") {
    Rng rng(5);
    Matrix r(50, 7);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal() * 10;
    const auto u = l2_normalize(EmbeddingSet(r));
    for (Eigen::Index i = 0; i < r.rows(); ++i) CHECK(std::abs(u.rows().row(i).norm() - 1.0) <= 1e-9);
  }
}

TEST_CASE("embedding file round trip") {
  Matrix m(3, 2);
  m << 1.5, -2.25, 0.125, 3.0, -7.0, 1e-3f;
  const EmbeddingSet e(m, std::vector<std::int32_t>{0, -1, 4});
  const auto path = temp_path("dc_emb_roundtrip.bin");
  save_embeddings(e, path);
  CHECK(bit_equal(load_embeddings(path), e));

  // Property: any f32-representable matrix survives exactly.
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rows = 1 + rng.below(30), cols = 1 + rng.below(12);
    Matrix r(rows, cols);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = static_cast<float>(rng.normal() * 100);
    const EmbeddingSet x(r);
    CHECK(bit_equal(decode_embeddings(encode_embeddings(x)), x));
  }
}

TEST_CASE("normalized flag survives and rows stay unit norm after load") {
  const auto e = generate_synthetic({.num_clusters = 3, .points_per_cluster = 4, .dim = 9,
                                     .intra_spread = 0.3, .seed = 1});
  const auto back = decode_embeddings(encode_embeddings(e));
  CHECK(back.normalized());
  CHECK(back.labels() == e.labels());
  for (std::size_t i = 0; i < back.count(); ++i)
    CHECK(std::abs(back.rows().row(static_cast<Eigen::Index>(i)).norm() - 1.0) <= 1e-9);
  CHECK((back.rows() - e.rows()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("embedding file format errors") {
  Matrix m(10, 2);
  m.setOnes();
  auto bytes = encode_embeddings(EmbeddingSet(m));

  SUBCASE("wrong magic") {
    auto bad = bytes;
    bad[0] = 'X';
    try {
      decode_embeddings(bad);
      FAIL("expected an error");
    } catch (const FormatError& err) {
      CHECK(err.offset() == 0);
    }
  }
  SUBCASE("header claims 10 rows but only 9 are present") {
    auto bad = bytes;
    bad.resize(bad.size() - 2 * sizeof(float));
    try {
      decode_embeddings(bad);
      FAIL("expected an error");
    } catch (const FormatError& err) {
      CHECK(std::string(err.what()).find("truncated") != std::string::npos);
      CHECK(err.offset() == 20 + 9 * 2 * sizeof(float));
    }
  }
  SUBCASE("trailing bytes signal a dimension mismatch") {
    auto bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_embeddings(bad), FormatError);
  }
}

TEST_CASE("labels text file") {
  const auto path = temp_path("dc_labels.txt");
  {
    std::ofstream out(path);
    out << "3\n-1\n\n7\n";
  }
  CHECK(load_labels_text(path) == std::vector<std::int32_t>{3, -1, 7});
  {
    std::ofstream out(path);
    out << "3\nabc\n";
  }
  CHECK_THROWS_AS(load_labels_text(path), Error);
}
