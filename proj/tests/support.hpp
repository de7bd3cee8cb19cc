#pragma once

#include "rpc/dataset.hpp"
#include "rpc/random.hpp"
#include "rpc/state.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace rpc::test {

/// Categorical dataset from one-based codes, d levels per item.
inline Dataset categorical(std::size_t p, std::vector<int> codes1,
                           std::vector<int> subpop, int d) {
  const std::size_t n = subpop.size();
  for (int &c : codes1)
    c -= 1;
  return Dataset::categorical(n, p, std::move(codes1), std::move(subpop),
                              std::vector<int>(p, d));
}

/// Every kernel of every bank set to `probs`.
inline void fill_kernels(ChainState &st, const std::vector<double> &probs) {
  auto fill = [&](KernelBank &bank) {
    for (std::size_t h = 0; h < bank.clusters(); ++h)
      for (std::size_t j = 0; j < bank.items(); ++j) {
        auto out = bank.probs(h, j);
        std::copy(probs.begin(), probs.begin() + out.size(), out.begin());
      }
  };
  fill(st.theta0);
  for (auto &b : st.theta1)
    fill(b);
}

/// Asymptotic Kolmogorov p-value for statistic d over n samples.
inline double kolmogorov_p(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double t = (sn + 0.12 + 0.11 / sn) * d;
  if (t < 0.2)
    return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16)
      break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// One-sample KS test of `x` against `cdf`.
inline double ks_p(std::vector<double> x, const std::function<double(double)> &cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double f = cdf(x[k]);
    d = std::max({d, (k + 1) / n - f, f - k / n});
  }
  return kolmogorov_p(d, x.size());
}

/// Pearson chi-square goodness of fit of category counts.
inline double chi_square_p(const std::vector<double> &counts,
                           const std::vector<double> &probs) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double stat = 0.0;
  int df = -1;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (probs[k] <= 0.0)
      continue;
    const double e = total * probs[k];
    stat += (counts[k] - e) * (counts[k] - e) / e;
    ++df;
  }
  if (df < 1)
    return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

inline Rng test_rng(std::uint64_t k) { return substream(2024, k, 99); }

} // namespace rpc::test
