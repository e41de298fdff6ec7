#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dc {

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct MetricsReport {
  PrfScore pairwise;
  PrfScore bcubed;
  double nmi = 0.0;
};

/// Precision / recall over unordered same-cluster pairs. With no predicted
/// positive pair, precision is 1.
PrfScore pairwise_f(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth);
/// Per-node precision / recall averaged over nodes; f from the averages.
PrfScore bcubed_f(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth);
/// I / sqrt(H(pred) H(truth)). 1 for identical partitions, 0 when one entropy is 0 otherwise.
double nmi(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth);

MetricsReport evaluate_partition(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth);

/// {"pairwise":{"p":..,"r":..,"f":..},"bcubed":{...},"nmi":..} with 6 decimals.
std::string metrics_to_json(const MetricsReport& m);

}  // namespace dc
