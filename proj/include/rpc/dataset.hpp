#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rpc {

enum class Family { categorical, gaussian };

std::string to_string(Family f);
Family family_from_string(const std::string &s);

/// Observation matrix with known subpopulation membership.
///
/// Indices are zero-based throughout the library: subpopulations run over
/// 0..S-1 and categorical levels over 0..d_j-1. The CSV layer converts to
/// and from the one-based codes users see.
class Dataset {
public:
  Dataset() = default;

  /// Categorical data. `codes` is row-major n x p with levels in 0..d_j-1.
  static Dataset categorical(std::size_t n, std::size_t p,
                             std::vector<int> codes, std::vector<int> subpop,
                             std::vector<int> levels);

  /// Real-valued data, row-major n x p.
  static Dataset gaussian(std::size_t n, std::size_t p,
                          std::vector<double> values, std::vector<int> subpop);

  Family family() const noexcept { return family_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t p() const noexcept { return p_; }
  std::size_t S() const noexcept { return S_; }

  int code(std::size_t i, std::size_t j) const { return codes_[i * p_ + j]; }
  double value(std::size_t i, std::size_t j) const {
    return values_[i * p_ + j];
  }
  int subpop(std::size_t i) const { return subpop_[i]; }

  const std::vector<int> &codes() const noexcept { return codes_; }
  const std::vector<double> &values() const noexcept { return values_; }
  const std::vector<int> &subpops() const noexcept { return subpop_; }

  /// Category count d_j per item; empty for the Gaussian family.
  const std::vector<int> &levels() const noexcept { return levels_; }
  /// Start of item j within a flattened per-cluster level vector.
  const std::vector<std::size_t> &level_offsets() const noexcept {
    return offsets_;
  }
  std::size_t total_levels() const noexcept { return total_levels_; }

  /// Number of subjects in each subpopulation.
  std::vector<std::size_t> subpop_sizes() const;

  bool operator==(const Dataset &other) const = default;

private:
  void finish();

  Family family_ = Family::categorical;
  std::size_t n_ = 0, p_ = 0, S_ = 0;
  std::vector<int> codes_;
  std::vector<double> values_;
  std::vector<int> subpop_;
  std::vector<int> levels_;
  std::vector<std::size_t> offsets_;
  std::size_t total_levels_ = 0;
};

/// Prior settings. A non-positive `dirichlet_weight` means 1/K.
struct Hyperparams {
  int K = 50;
  double dirichlet_weight = 0.0;
  double eta = 1.0;
  double a = 1.0;
  double b = 1.0; // rate
  double tau = 10.0; // prior variance of Gaussian means
  double gamma_shape = 0.1;
  double gamma_scale = 10.0;

  double weight_prior() const {
    return dirichlet_weight > 0.0 ? dirichlet_weight : 1.0 / K;
  }
  void validate() const;
};

} // namespace rpc
