#pragma once

#include "rpc/dataset.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace rpc {

/// Probability of `level` under a categorical kernel.
/// Throws std::invalid_argument when the level is out of range.
double categorical_mass(std::span<const double> probs, int level);

/// Normal density at y for the given mean and precision.
double gaussian_density(double mean, double precision, double y);
double gaussian_log_density(double mean, double precision, double y);

/// Item-wise kernels for a set of clusters.
///
/// Categorical banks hold, per cluster, one probability vector per item laid
/// out back to back (item j starts at offsets[j]). Gaussian banks hold one
/// (mean, precision) pair per cluster and item.
class KernelBank {
public:
  KernelBank() = default;
  KernelBank(const Dataset &data, std::size_t clusters);

  Family family() const noexcept { return family_; }
  std::size_t clusters() const noexcept { return clusters_; }
  std::size_t items() const noexcept { return items_; }
  std::size_t width() const noexcept { return width_; }

  /// Categorical kernel of cluster h for item j.
  std::span<double> probs(std::size_t h, std::size_t j) {
    return {prob_.data() + h * width_ + offsets_[j],
            static_cast<std::size_t>(levels_[j])};
  }
  std::span<const double> probs(std::size_t h, std::size_t j) const {
    return {prob_.data() + h * width_ + offsets_[j],
            static_cast<std::size_t>(levels_[j])};
  }
  /// All level probabilities of cluster h, items concatenated.
  std::span<const double> cluster_row(std::size_t h) const {
    return {prob_.data() + h * width_, width_};
  }

  double &mean(std::size_t h, std::size_t j) { return mean_[h * items_ + j]; }
  double mean(std::size_t h, std::size_t j) const {
    return mean_[h * items_ + j];
  }
  double &precision(std::size_t h, std::size_t j) {
    return prec_[h * items_ + j];
  }
  double precision(std::size_t h, std::size_t j) const {
    return prec_[h * items_ + j];
  }

  /// Mass (categorical) or density (Gaussian) of subject i's item j.
  double mass(const Dataset &data, std::size_t h, std::size_t i,
              std::size_t j) const;
  double log_mass(const Dataset &data, std::size_t h, std::size_t i,
                  std::size_t j) const;

  /// Relabel clusters: cluster h moves to position perm[h].
  void permute(std::span<const int> perm);

  const std::vector<double> &prob_data() const noexcept { return prob_; }
  std::vector<double> &prob_data() noexcept { return prob_; }
  const std::vector<double> &mean_data() const noexcept { return mean_; }
  const std::vector<double> &precision_data() const noexcept { return prec_; }
  const std::vector<std::size_t> &offsets() const noexcept { return offsets_; }
  const std::vector<int> &levels() const noexcept { return levels_; }

  bool operator==(const KernelBank &) const = default;

private:
  Family family_ = Family::categorical;
  std::size_t clusters_ = 0, items_ = 0, width_ = 0;
  std::vector<int> levels_;
  std::vector<std::size_t> offsets_;
  std::vector<double> prob_;
  std::vector<double> mean_, prec_;
};

} // namespace rpc
