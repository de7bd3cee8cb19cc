#include "rpc/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rpc {

Rng substream(std::uint64_t seed, std::uint64_t iteration,
              std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration),
                    static_cast<std::uint32_t>(iteration >> 32),
                    static_cast<std::uint32_t>(stream), 0x52504331u};
  return Rng(seq);
}

double uniform01(Rng &rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double draw_normal(Rng &rng, double mean, double sd) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

double draw_gamma(Rng &rng, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw std::invalid_argument("gamma: shape and scale must be positive");
  return std::gamma_distribution<double>(shape, scale)(rng);
}

double draw_log_gamma(Rng &rng, double shape) {
  if (shape >= 1.0)
    return std::log(draw_gamma(rng, shape, 1.0));
  // Gamma(a) = Gamma(a + 1) * U^(1/a)
  if (!(shape > 0.0))
    throw std::invalid_argument("gamma: shape must be positive");
  const double g = draw_gamma(rng, shape + 1.0, 1.0);
  double u = uniform01(rng);
  while (u <= 0.0)
    u = uniform01(rng);
  return std::log(g) + std::log(u) / shape;
}

double draw_beta(Rng &rng, double a, double b) {
  return draw_beta_log1m(rng, a, b).value;
}

BetaDraw draw_beta_log1m(Rng &rng, double a, double b) {
  const double lx = draw_log_gamma(rng, a);
  const double ly = draw_log_gamma(rng, b);
  const double d = ly - lx;
  // log(1 - x) = d - log(1 + e^d)
  const double l1m = d < 0.0 ? d - std::log1p(std::exp(d))
                             : -std::log1p(std::exp(-d));
  return {1.0 / (1.0 + std::exp(d)), l1m};
}

bool draw_bernoulli(Rng &rng, double prob) {
  if (prob >= 1.0)
    return true;
  if (prob <= 0.0)
    return false;
  return uniform01(rng) < prob;
}

void draw_dirichlet(Rng &rng, std::span<const double> alpha,
                    std::span<double> out) {
  if (alpha.size() != out.size() || alpha.empty())
    throw std::invalid_argument("dirichlet: size mismatch");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    out[k] = draw_log_gamma(rng, alpha[k]);
    m = std::max(m, out[k]);
  }
  double total = 0.0;
  for (double &v : out) {
    v = std::exp(v - m);
    total += v;
  }
  constexpr double floor = std::numeric_limits<double>::min();
  for (double &v : out)
    v = std::max(v / total, floor);
}

std::vector<double> draw_dirichlet(Rng &rng, std::span<const double> alpha) {
  std::vector<double> out(alpha.size());
  draw_dirichlet(rng, alpha, out);
  return out;
}

int draw_log_categorical(Rng &rng, std::span<const double> logw,
                         std::span<double> scratch) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logw)
    m = std::max(m, v);
  if (m == -std::numeric_limits<double>::infinity())
    return -1;
  double total = 0.0;
  for (std::size_t k = 0; k < logw.size(); ++k) {
    total += std::exp(logw[k] - m);
    scratch[k] = total;
  }
  return draw_from_cumulative(rng, scratch.first(logw.size()));
}

int draw_from_cumulative(Rng &rng, std::span<const double> cumulative) {
  const double target = uniform01(rng) * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) {
    // rounding put target on the total; take the last slot with width
    --it;
    while (it != cumulative.begin() && *it == *(it - 1))
      --it;
  }
  return static_cast<int>(it - cumulative.begin());
}

} // namespace rpc
