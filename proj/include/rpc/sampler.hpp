#pragma once

#include "rpc/dataset.hpp"
#include "rpc/model.hpp"
#include "rpc/random.hpp"
#include "rpc/state.hpp"
#include "rpc/trace.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

namespace rpc {

struct ChainConfig {
  int n_iterations = 20000;
  int burn_in = 5000;
  int thin = 1;
  std::uint64_t seed = 1;
  bool permute_labels = true;
  /// Resample beta^(s); when off beta stays at its initial value 1.
  bool update_beta = true;
  /// Pin nu to this value and skip the nu/beta updates.
  std::optional<double> fixed_nu;
  /// Upper bound on stored kernel snapshots; 0 stores none.
  int max_kernel_snapshots = 500;

  void validate() const;
  int stored_snapshots() const { return (n_iterations - burn_in) / thin; }
};

/// Random stream identifiers, one per update step.
enum class Stream : std::uint64_t {
  init_global = 1,
  init_local,
  deviation,   // G
  global_index,
  local_index,
  global_weights,
  local_weights,
  global_kernels,
  local_kernels,
  nu,
  beta,
  permute_global,
  permute_local,
};

Rng stream_rng(const ChainConfig &config, std::int64_t iteration, Stream s);

// ---- conditional updates (sampler steps 1-8) -------------------------------
// Each redraws its block in place given everything else.

void update_G(ChainState &state, const Dataset &data, Rng &rng);
void update_C(ChainState &state, const Dataset &data, Rng &rng);
void update_L(ChainState &state, const Dataset &data, Rng &rng);
void update_pi(ChainState &state, const Hyperparams &hyper, Rng &rng);
void update_lambda(ChainState &state, const Dataset &data,
                   const Hyperparams &hyper, Rng &rng);

/// Global-level kernels given C and G (categorical or Gaussian).
void update_global_kernels(ChainState &state, const Dataset &data,
                           const Hyperparams &hyper, Rng &rng);
/// Local-level kernels given L and G.
void update_local_kernels(ChainState &state, const Dataset &data,
                          const Hyperparams &hyper, Rng &rng);
/// Both levels, categorical family only.
void update_theta(ChainState &state, const Dataset &data,
                  const Hyperparams &hyper, Rng &rng);
/// Both levels, Gaussian family only. Means get a N(0, tau) prior and
/// precisions a Gamma(shape, scale) prior.
void update_theta_gaussian(ChainState &state, const Dataset &data,
                           const Hyperparams &hyper, Rng &rng);

void update_nu(ChainState &state, const Dataset &data, Rng &rng);
/// beta^(s) ~ Ga(a + p, rate = b - sum_j log(1 - nu_j^(s))).
void update_beta(ChainState &state, const Hyperparams &hyper, Rng &rng);

// ---- label switching -------------------------------------------------------

/// Relabel global clusters: label h becomes perm[h] in pi, theta0 and C.
void apply_global_permutation(ChainState &state, std::span<const int> perm);
/// Relabel local clusters of subpopulation s in lambda, theta1 and L.
void apply_local_permutation(ChainState &state, const Dataset &data,
                             std::size_t s, std::span<const int> perm);
std::vector<int> random_permutation(std::size_t K, Rng &rng);

/// Random permutation sampler move: one uniform permutation of the global
/// labels and an independent one per subpopulation.
void permute_labels(ChainState &state, const Dataset &data, Rng &global_rng,
                    Rng &local_rng);

// ---- chain driver ----------------------------------------------------------

/// Starting point: pi, lambda and theta from their priors, nu ~ Be(1, 1) (or
/// the pinned value), then C, L and G drawn from those; beta = 1.
ChainState initialize(const Dataset &data, const Hyperparams &hyper,
                      const ChainConfig &config,
                      ModelKind kind = ModelKind::rpc);

/// One full sweep (steps 1-8, then the permutation move).
void sweep(ChainState &state, const Dataset &data, const Hyperparams &hyper,
           const ChainConfig &config, std::int64_t iteration,
           ModelKind kind = ModelKind::rpc);

using SweepObserver =
    std::function<void(std::int64_t iteration, const ChainState &state)>;

ChainTrace run_chain(const Dataset &data, const Hyperparams &hyper,
                     const ChainConfig &config,
                     ModelKind kind = ModelKind::rpc,
                     const SweepObserver &observer = {});

enum class Baseline { lca4, ofmm };

Baseline baseline_from_string(const std::string &s);

/// Plain finite mixture fits: G pinned to 1 and every local-level update
/// skipped. lca4 uses K = 4, ofmm uses hyper.K; both put 1/K on the weights.
ChainTrace fit_baseline(const Dataset &data, Hyperparams hyper,
                        const ChainConfig &config, Baseline mode);

} // namespace rpc
