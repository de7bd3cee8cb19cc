#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rpc {

using Rng = std::mt19937_64;

/// Independent generator for one (iteration, stream) slot of a chain.
///
/// Every update step of every sweep draws from its own generator, so
/// disabling one step never shifts the random numbers another step sees.
Rng substream(std::uint64_t seed, std::uint64_t iteration,
              std::uint64_t stream);

double uniform01(Rng &rng);
double draw_normal(Rng &rng, double mean, double sd);
/// Gamma with shape and scale.
double draw_gamma(Rng &rng, double shape, double scale);
/// log of a Gamma(shape, 1) draw; accurate for shapes far below 1.
double draw_log_gamma(Rng &rng, double shape);
double draw_beta(Rng &rng, double a, double b);
/// Beta draw together with log(1 - x), which stays exact when x rounds to 1.
struct BetaDraw {
  double value;
  double log1m;
};
BetaDraw draw_beta_log1m(Rng &rng, double a, double b);
bool draw_bernoulli(Rng &rng, double prob);

/// Dirichlet draw written into `out`. Entries are floored at the smallest
/// normal double so logs stay finite.
void draw_dirichlet(Rng &rng, std::span<const double> alpha,
                    std::span<double> out);
std::vector<double> draw_dirichlet(Rng &rng, std::span<const double> alpha);

/// Index drawn with probability proportional to exp(logw). `scratch` must
/// have logw.size() entries. Returns -1 if every weight is zero.
int draw_log_categorical(Rng &rng, std::span<const double> logw,
                         std::span<double> scratch);

/// Index drawn from a non-decreasing cumulative weight vector.
int draw_from_cumulative(Rng &rng, std::span<const double> cumulative);

} // namespace rpc
