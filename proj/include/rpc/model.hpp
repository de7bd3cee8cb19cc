#pragma once

#include "rpc/dataset.hpp"
#include "rpc/state.hpp"

#include <span>
#include <vector>

namespace rpc {

/// Upper clamp applied to nu before taking log(1 - nu).
inline constexpr double kNuClamp = 1.0 - 1e-12;

/// log(1 - min(nu, kNuClamp)).
double log1m_clamped(double nu);

/// log(sum(exp(x))); -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> x);

/// Same value for every ordering of x: terms are summed in sorted order.
double log_sum_exp_sorted(std::vector<double> x);
double sum_sorted(std::vector<double> x);

enum class ModelKind {
  rpc,         ///< global + local levels with beta-Bernoulli deviations
  global_only  ///< plain finite mixture; G pinned to 1
};

/// log f(y_i | pi, lambda, theta, G) with C_i and L_i. marginalised out.
/// Throws std::invalid_argument on shape mismatch and NumericUnderflow when
/// either mixture has zero total mass.
double subject_log_marginal(const ChainState &state, const Dataset &data,
                            std::size_t i);

/// Log joint density of data, latents and parameters with normalised priors.
/// Exactly invariant under label permutations.
double log_joint(const ChainState &state, const Dataset &data,
                 const Hyperparams &hyper, ModelKind kind = ModelKind::rpc);

} // namespace rpc
