#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rpc {

struct EvalResult {
  double mse_nu = 0.0;
  double mse_theta = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// Mean squared elementwise error.
double mse_nu(std::span<const double> estimated, std::span<const double> truth);

enum class Matching { greedy, optimal };

/// Estimated cluster index matched to each true cluster.
std::vector<std::size_t>
match_clusters(const std::vector<std::vector<double>> &estimated,
               const std::vector<std::vector<double>> &truth,
               const std::vector<bool> &mask = {}, Matching how = Matching::greedy);

/// Mean squared error between each true kernel and its matched estimate.
/// `mask` (per element, optional) restricts the comparison. Throws if a true
/// cluster has no estimate left to match.
double mse_theta(const std::vector<std::vector<double>> &estimated,
                 const std::vector<std::vector<double>> &truth,
                 const std::vector<bool> &mask = {},
                 Matching how = Matching::greedy);

struct PairAgreement {
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// Pair-counting agreement over unordered subject pairs. Subjects whose true
/// label is negative are skipped. A side with no pairs scores 1.
PairAgreement sensitivity_specificity(std::span<const int> predicted,
                                      std::span<const int> truth);

} // namespace rpc
