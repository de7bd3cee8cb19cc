#include "rpc/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace rpc {

double mse_nu(std::span<const double> estimated, std::span<const double> truth) {
  if (estimated.size() != truth.size())
    throw std::invalid_argument("mse_nu: dimension mismatch");
  if (truth.empty())
    throw std::invalid_argument("mse_nu: empty input");
  double acc = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double d = estimated[k] - truth[k];
    acc += d * d;
  }
  return acc / static_cast<double>(truth.size());
}

namespace {

double pair_mse(const std::vector<double> &a, const std::vector<double> &b,
                const std::vector<bool> &mask) {
  if (a.size() != b.size())
    throw std::invalid_argument("mse_theta: kernel size mismatch");
  if (!mask.empty() && mask.size() != a.size())
    throw std::invalid_argument("mse_theta: mask size mismatch");
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t e = 0; e < a.size(); ++e) {
    if (!mask.empty() && !mask[e])
      continue;
    const double d = a[e] - b[e];
    acc += d * d;
    ++used;
  }
  if (used == 0)
    throw std::invalid_argument("mse_theta: mask selects nothing");
  return acc / static_cast<double>(used);
}

// Optimal assignment (Hungarian method) on a rows <= cols
// cost matrix; returns the column for each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>> &cost) {
  const std::size_t n = cost.size(), m = cost[0].size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), way_cost(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(way_cost.begin(), way_cost.end(), inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j])
          continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < way_cost[j]) {
          way_cost[j] = cur;
          way[j] = j0;
        }
        if (way_cost[j] < delta) {
          delta = way_cost[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          way_cost[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> out(n);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0)
      out[p[j] - 1] = j - 1;
  return out;
}

} // namespace

std::vector<std::size_t>
match_clusters(const std::vector<std::vector<double>> &estimated,
               const std::vector<std::vector<double>> &truth,
               const std::vector<bool> &mask, Matching how) {
  if (truth.empty())
    throw std::invalid_argument("mse_theta: no true clusters");
  if (estimated.size() < truth.size())
    throw std::invalid_argument("mse_theta: unmatched true cluster (" +
                                std::to_string(truth.size()) + " true, " +
                                std::to_string(estimated.size()) +
                                " estimated)");
  std::vector<std::vector<double>> cost(truth.size(),
                                        std::vector<double>(estimated.size()));
  for (std::size_t t = 0; t < truth.size(); ++t)
    for (std::size_t e = 0; e < estimated.size(); ++e)
      cost[t][e] = pair_mse(estimated[e], truth[t], mask);

  if (how == Matching::optimal)
    return hungarian(cost);

  // Greedy: repeatedly take the cheapest remaining (true, estimate) pair.
  std::vector<std::size_t> out(truth.size());
  std::vector<char> t_used(truth.size(), 0), e_used(estimated.size(), 0);
  for (std::size_t step = 0; step < truth.size(); ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bt = 0, be = 0;
    for (std::size_t t = 0; t < truth.size(); ++t)
      for (std::size_t e = 0; e < estimated.size(); ++e)
        if (!t_used[t] && !e_used[e] && cost[t][e] < best) {
          best = cost[t][e];
          bt = t;
          be = e;
        }
    t_used[bt] = 1;
    e_used[be] = 1;
    out[bt] = be;
  }
  return out;
}

double mse_theta(const std::vector<std::vector<double>> &estimated,
                 const std::vector<std::vector<double>> &truth,
                 const std::vector<bool> &mask, Matching how) {
  const auto match = match_clusters(estimated, truth, mask, how);
  double acc = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t)
    acc += pair_mse(estimated[match[t]], truth[t], mask);
  return acc / static_cast<double>(truth.size());
}

PairAgreement sensitivity_specificity(std::span<const int> predicted,
                                      std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("sensitivity: length mismatch");
  // Contingency counts over (truth, predicted) label pairs.
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> by_truth, by_pred;
  double n = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0)
      continue;
    joint[{truth[i], predicted[i]}] += 1.0;
    by_truth[truth[i]] += 1.0;
    by_pred[predicted[i]] += 1.0;
    n += 1.0;
  }
  const auto pairs = [](double c) { return c * (c - 1.0) / 2.0; };
  double both = 0.0, same_truth = 0.0, same_pred = 0.0;
  for (const auto &[k, c] : joint)
    both += pairs(c);
  for (const auto &[k, c] : by_truth)
    same_truth += pairs(c);
  for (const auto &[k, c] : by_pred)
    same_pred += pairs(c);
  const double total = pairs(n);
  const double diff_truth = total - same_truth;
  const double diff_both = total - same_truth - same_pred + both;
  return {same_truth > 0 ? both / same_truth : 1.0,
          diff_truth > 0 ? diff_both / diff_truth : 1.0};
}

} // namespace rpc
