#include "rpc/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rpc {

double categorical_mass(std::span<const double> probs, int level) {
  if (level < 0 || static_cast<std::size_t>(level) >= probs.size())
    throw std::invalid_argument("category " + std::to_string(level) +
                                " outside kernel of size " +
                                std::to_string(probs.size()));
  return probs[static_cast<std::size_t>(level)];
}

double gaussian_log_density(double mean, double precision, double y) {
  const double z = y - mean;
  return 0.5 * (std::log(precision) - std::log(2.0 * std::numbers::pi)) -
         0.5 * precision * z * z;
}

double gaussian_density(double mean, double precision, double y) {
  return std::exp(gaussian_log_density(mean, precision, y));
}

KernelBank::KernelBank(const Dataset &data, std::size_t clusters)
    : family_(data.family()), clusters_(clusters), items_(data.p()) {
  if (family_ == Family::categorical) {
    levels_ = data.levels();
    offsets_ = data.level_offsets();
    width_ = data.total_levels();
    prob_.assign(clusters_ * width_, 0.0);
  } else {
    mean_.assign(clusters_ * items_, 0.0);
    prec_.assign(clusters_ * items_, 1.0);
  }
}

double KernelBank::mass(const Dataset &data, std::size_t h, std::size_t i,
                        std::size_t j) const {
  if (family_ == Family::categorical)
    return categorical_mass(probs(h, j), data.code(i, j));
  return gaussian_density(mean(h, j), precision(h, j), data.value(i, j));
}

double KernelBank::log_mass(const Dataset &data, std::size_t h, std::size_t i,
                            std::size_t j) const {
  if (family_ == Family::categorical)
    return std::log(categorical_mass(probs(h, j), data.code(i, j)));
  return gaussian_log_density(mean(h, j), precision(h, j), data.value(i, j));
}

void KernelBank::permute(std::span<const int> perm) {
  if (perm.size() != clusters_)
    throw std::invalid_argument("permutation size does not match clusters");
  auto move_rows = [&](std::vector<double> &v, std::size_t row) {
    if (v.empty())
      return;
    std::vector<double> out(v.size());
    for (std::size_t h = 0; h < clusters_; ++h)
      std::copy_n(v.begin() + h * row, row,
                  out.begin() + static_cast<std::size_t>(perm[h]) * row);
    v.swap(out);
  };
  move_rows(prob_, width_);
  move_rows(mean_, items_);
  move_rows(prec_, items_);
}

} // namespace rpc
