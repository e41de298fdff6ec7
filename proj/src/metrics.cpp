#include "diffcluster/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "diffcluster/common.hpp"

namespace dc {

namespace {

using Count = unsigned __int128;

void check_lengths(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth) {
  if (pred.size() != truth.size())
    throw Error(ErrorKind::Parameter, "partition lengths differ: " + std::to_string(pred.size()) + " vs " +
                                          std::to_string(truth.size()));
}

struct Contingency {
  std::map<std::pair<std::int32_t, std::int32_t>, std::uint64_t> cells;
  std::map<std::int32_t, std::uint64_t> rows;  // pred cluster sizes
  std::map<std::int32_t, std::uint64_t> cols;  // truth cluster sizes
};

Contingency contingency(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth) {
  Contingency c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++c.cells[{pred[i], truth[i]}];
    ++c.rows[pred[i]];
    ++c.cols[truth[i]];
  }
  return c;
}

Count pairs(std::uint64_t n) { return static_cast<Count>(n) * (n - (n > 0 ? 1 : 0)) / 2; }

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

double entropy(const std::map<std::int32_t, std::uint64_t>& sizes, double n) {
  double h = 0.0;
  for (const auto& [id, c] : sizes) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

PrfScore pairwise_f(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth) {
  check_lengths(pred, truth);
  const auto c = contingency(pred, truth);
  Count tp = 0, pred_pos = 0, true_pos = 0;
  for (const auto& [k, n] : c.cells) tp += pairs(n);
  for (const auto& [k, n] : c.rows) pred_pos += pairs(n);
  for (const auto& [k, n] : c.cols) true_pos += pairs(n);
  PrfScore s;
  s.precision = pred_pos == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(pred_pos);
  s.recall = true_pos == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(true_pos);
  s.f = harmonic(s.precision, s.recall);
  return s;
}

PrfScore bcubed_f(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth) {
  check_lengths(pred, truth);
  PrfScore s;
  if (pred.empty()) return {1.0, 1.0, 1.0};
  const auto c = contingency(pred, truth);
  // Node i contributes |C_i n T_i| / |C_i| to precision; summed per cell.
  double p = 0.0, r = 0.0;
  for (const auto& [k, n] : c.cells) {
    const double nn = static_cast<double>(n);
    p += nn * nn / static_cast<double>(c.rows.at(k.first));
    r += nn * nn / static_cast<double>(c.cols.at(k.second));
  }
  const double total = static_cast<double>(pred.size());
  s.precision = p / total;
  s.recall = r / total;
  s.f = harmonic(s.precision, s.recall);
  return s;
}

double nmi(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth) {
  check_lengths(pred, truth);
  if (pred.empty()) return 1.0;
  const auto c = contingency(pred, truth);
  // Identical up to relabeling: every cell is a whole row and a whole column.
  bool same = c.rows.size() == c.cols.size() && c.cells.size() == c.rows.size();
  if (same)
    for (const auto& [k, n] : c.cells) same = same && c.rows.at(k.first) == n && c.cols.at(k.second) == n;
  if (same) return 1.0;
  const double n = static_cast<double>(pred.size());
  const double hp = entropy(c.rows, n), ht = entropy(c.cols, n);
  if (hp <= 0.0 || ht <= 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [k, cnt] : c.cells) {
    const double pij = static_cast<double>(cnt) / n;
    const double pi = static_cast<double>(c.rows.at(k.first)) / n;
    const double pj = static_cast<double>(c.cols.at(k.second)) / n;
    mi += pij * std::log(pij / (pi * pj));
  }
  return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

MetricsReport evaluate_partition(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth) {
  return {pairwise_f(pred, truth), bcubed_f(pred, truth), nmi(pred, truth)};
}

std::string metrics_to_json(const MetricsReport& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "{\"pairwise\":{\"p\":%.6f,\"r\":%.6f,\"f\":%.6f},\"bcubed\":{\"p\":%.6f,\"r\":%.6f,\"f\":%.6f},"
                "\"nmi\":%.6f}",
                m.pairwise.precision, m.pairwise.recall, m.pairwise.f, m.bcubed.precision, m.bcubed.recall,
                m.bcubed.f, m.nmi);
  return buf;
}

}  // namespace dc
