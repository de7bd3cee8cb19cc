#pragma once

#include "rpc/dataset.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rpc::sim {

/// How nu_j^(s) is chosen for the items a subpopulation may deviate on.
struct NuRule {
  enum class Kind { fixed, beta21, uniform, probit, cauchy };
  Kind kind = Kind::fixed;
  double value = 1.0; // used by Kind::fixed
};

struct SubpopDesign {
  NuRule nu;
  /// Items that may be drawn locally; all other items have nu = 1.
  std::vector<bool> deviable;
  /// Local profiles: one-based modal level per item (0 where undefined).
  std::vector<std::vector<int>> local_modes;
  /// Gaussian family: local profile means per item.
  std::vector<std::vector<double>> local_means;
};

/// A block of subjects sharing subpopulation and generating profiles.
struct CellDesign {
  int subpop = 0;
  int count = 0;
  int global_profile = -1;          ///< -1: no global profile
  std::vector<int> local_profiles;  ///< assigned round-robin inside the cell
  std::optional<double> nu;         ///< overrides the subpop rule if set
};

/// Declarative description of one simulation scenario.
struct SimSpec {
  int case_id = 1;
  char variant = 'a'; ///< Case 7 sub-case
  Family family = Family::categorical;
  std::size_t p = 50;
  int d = 4;
  double sigma = 0.1;
  std::uint64_t seed = 1;
  /// Global profiles: one-based modal level per item.
  std::vector<std::vector<int>> global_modes;
  std::vector<std::vector<double>> global_means;
  std::vector<SubpopDesign> subpops;
  std::vector<CellDesign> cells;

  /// Built-in design for cases 1-7. `cell_size` = 0 keeps the default
  /// (400 subjects per cell; 750 for case 7, giving 1500 per subpopulation).
  static SimSpec for_case(int case_id, char variant = 'a',
                          int cell_size = 0, std::uint64_t seed = 1);

  std::size_t n() const;
  void validate() const;
};

struct GroundTruth {
  std::vector<int> C;          ///< global profile per subject, -1 if none
  std::vector<std::uint8_t> G; ///< n x p
  std::vector<int> L;          ///< local profile per (i, j), -1 if global
  std::vector<double> nu;      ///< S x p generating probabilities
  /// Categorical: profile x p x d kernels. Gaussian: profile x p means.
  std::vector<std::vector<double>> global_kernels;
  /// Per subpopulation, per local profile, flattened like global_kernels.
  std::vector<std::vector<std::vector<double>>> local_kernels;
  /// Items global in every subpopulation (nu = 1 everywhere).
  std::vector<bool> always_global;

  bool operator==(const GroundTruth &) const = default;
};

struct Simulated {
  Dataset data;
  GroundTruth truth;
};

/// 0.7 on the modal level, 0.1 elsewhere; defined only for d = 4.
std::vector<double> theta_from_mode(int mode, int d);

Simulated generate(const SimSpec &spec);

/// Modal-level tables used by the built-in designs.
const std::vector<std::array<int, 3>> &global_mode_table();
const std::vector<std::array<int, 8>> &local_mode_table();
const std::vector<std::array<int, 13>> &mock_local_mode_table();

/// Map nu draws into [0, 1] (Cauchy draws are clamped).
double clamp_nu(double x);

} // namespace rpc::sim
