#include <algorithm>
#include <cmath>
#include <numeric>

#include "diffcluster/common.hpp"
#include "diffcluster/metrics.hpp"
#include "doctest.h"
#include "oracles/cluster_oracles.hpp"

using namespace dc;

namespace {

std::vector<std::int32_t> random_partition(std::size_t n, std::uint64_t k, Rng& rng) {
  std::vector<std::int32_t> p(n);
  for (auto& v : p) v = static_cast<std::int32_t>(rng.below(k));
  return p;
}

}  // namespace

TEST_CASE("pairwise hand cases") {
  const std::vector<std::int32_t> truth{0, 0, 1, 1};
  auto s = pairwise_f(truth, truth);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
  CHECK(s.f == 1.0);

  s = pairwise_f({0, 1, 2, 3}, truth);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f == 0.0);

  // pred {a,b|c,d}, truth {a,b,c|d}
  s = pairwise_f({0, 0, 1, 1}, {0, 0, 0, 1});
  CHECK(s.precision == 0.5);
  CHECK(s.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s.f == doctest::Approx(0.4).epsilon(1e-15));

  // No true pairs at all.
  s = pairwise_f({0, 0, 1}, {0, 1, 2});
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 1.0);
}

TEST_CASE("bcubed hand cases") {
  const std::vector<std::int32_t> truth{0, 0, 1, 1};
  auto s = bcubed_f(truth, truth);
  CHECK(s.f == 1.0);
  s = bcubed_f({0, 1, 2, 3}, truth);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 0.5);
  CHECK(s.f == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  s = bcubed_f({0, 0, 0, 0}, truth);
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 1.0);
  CHECK(s.f == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("nmi hand cases") {
  CHECK(nmi({0, 0, 1, 1}, {5, 5, 2, 2}) == 1.0);
  CHECK(nmi({0, 1, 2, 3}, {3, 2, 1, 0}) == 1.0);
  CHECK(nmi({0, 0, 0, 0}, {0, 0, 0, 0}) == 1.0);
  CHECK(nmi({0, 0, 0, 0}, {0, 0, 1, 1}) == 0.0);
  CHECK(std::abs(nmi({0, 0, 1, 1}, {0, 1, 0, 1})) < 1e-15);
}

TEST_CASE("length mismatch") {
  CHECK_THROWS_AS(pairwise_f({0, 1}, {0}), Error);
  CHECK_THROWS_AS(bcubed_f({0, 1}, {0}), Error);
  CHECK_THROWS_AS(nmi({0, 1}, {0}), Error);
}

TEST_CASE("agreement with brute force on random partitions") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(100);
    const auto pred = random_partition(n, 1 + rng.below(12), rng);
    const auto truth = random_partition(n, 1 + rng.below(12), rng);
    const auto m = evaluate_partition(pred, truth);
    const auto pw = oracle::pairwise(pred, truth);
    const auto bc = oracle::bcubed(pred, truth);
    CHECK(std::abs(m.pairwise.precision - pw.p) < 1e-12);
    CHECK(std::abs(m.pairwise.recall - pw.r) < 1e-12);
    CHECK(std::abs(m.pairwise.f - pw.f) < 1e-12);
    CHECK(std::abs(m.bcubed.precision - bc.p) < 1e-12);
    CHECK(std::abs(m.bcubed.recall - bc.r) < 1e-12);
    CHECK(std::abs(m.bcubed.f - bc.f) < 1e-12);
    CHECK(std::abs(m.nmi - oracle::nmi(pred, truth)) < 1e-12);
    for (double v : {m.pairwise.precision, m.pairwise.recall, m.pairwise.f, m.bcubed.precision, m.bcubed.recall,
                     m.bcubed.f, m.nmi}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(m.pairwise.f <= (m.pairwise.precision + m.pairwise.recall) / 2 + 1e-15);
    CHECK(m.bcubed.f <= (m.bcubed.precision + m.bcubed.recall) / 2 + 1e-15);
  }
}

TEST_CASE("relabeling either argument changes nothing") {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(60);
    const auto pred = random_partition(n, 6, rng);
    const auto truth = random_partition(n, 4, rng);
    std::vector<std::int32_t> perm(6);
    std::iota(perm.begin(), perm.end(), 100);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<std::int32_t> p2;
    for (auto v : pred) p2.push_back(perm[static_cast<std::size_t>(v)]);
    const auto a = evaluate_partition(pred, truth), b = evaluate_partition(p2, truth), c = evaluate_partition(truth, p2);
    CHECK(a.pairwise.f == b.pairwise.f);
    CHECK(std::abs(a.bcubed.f - b.bcubed.f) < 1e-12);  // cell summation order follows the labels
    CHECK(std::abs(a.nmi - b.nmi) < 1e-12);
    // Swapping roles swaps precision and recall.
    CHECK(std::abs(a.pairwise.precision - c.pairwise.recall) < 1e-12);
    CHECK(std::abs(a.bcubed.precision - c.bcubed.recall) < 1e-12);
  }
}

TEST_CASE("pair counts do not overflow") {
  // 200000 nodes in one cluster: about 2e10 pairs.
  const std::vector<std::int32_t> big(200000, 0);
  const auto s = pairwise_f(big, big);
  CHECK(s.f == 1.0);
}

TEST_CASE("json report") {
  MetricsReport m;
  m.pairwise = {0.5, 1.0 / 3.0, 0.4};
  m.bcubed = {1.0, 0.5, 2.0 / 3.0};
  m.nmi = 0.1234567;
  CHECK(metrics_to_json(m) ==
        R"({"pairwise":{"p":0.500000,"r":0.333333,"f":0.400000},"bcubed":{"p":1.000000,"r":0.500000,"f":0.666667},"nmi":0.123457})");
}
