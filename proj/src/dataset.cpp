#include "rpc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rpc {

std::string to_string(Family f) {
  return f == Family::categorical ? "categorical" : "gaussian";
}

Family family_from_string(const std::string &s) {
  if (s == "categorical")
    return Family::categorical;
  if (s == "gaussian")
    return Family::gaussian;
  throw std::invalid_argument("unknown family '" + s + "'");
}

Dataset Dataset::categorical(std::size_t n, std::size_t p,
                             std::vector<int> codes, std::vector<int> subpop,
                             std::vector<int> levels) {
  Dataset d;
  d.family_ = Family::categorical;
  d.n_ = n;
  d.p_ = p;
  d.codes_ = std::move(codes);
  d.subpop_ = std::move(subpop);
  d.levels_ = std::move(levels);
  if (d.codes_.size() != n * p)
    throw std::invalid_argument("code matrix size does not match n x p");
  if (d.levels_.size() != p)
    throw std::invalid_argument("need one category count per item");
  for (int lv : d.levels_)
    if (lv < 2)
      throw std::invalid_argument("every item needs at least 2 categories");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      int c = d.codes_[i * p + j];
      if (c < 0 || c >= d.levels_[j])
        throw std::invalid_argument(
            "category code out of range at subject " + std::to_string(i + 1) +
            ", item " + std::to_string(j + 1));
    }
  d.finish();
  return d;
}

Dataset Dataset::gaussian(std::size_t n, std::size_t p,
                          std::vector<double> values,
                          std::vector<int> subpop) {
  Dataset d;
  d.family_ = Family::gaussian;
  d.n_ = n;
  d.p_ = p;
  d.values_ = std::move(values);
  d.subpop_ = std::move(subpop);
  if (d.values_.size() != n * p)
    throw std::invalid_argument("value matrix size does not match n x p");
  for (double v : d.values_)
    if (!std::isfinite(v))
      throw std::invalid_argument("non-finite observation");
  d.finish();
  return d;
}

void Dataset::finish() {
  if (n_ < 1 || p_ < 1)
    throw std::invalid_argument("dataset needs n >= 1 and p >= 1");
  if (subpop_.size() != n_)
    throw std::invalid_argument("need one subpopulation index per subject");
  int max_s = -1;
  for (int s : subpop_) {
    if (s < 0)
      throw std::invalid_argument("negative subpopulation index");
    max_s = std::max(max_s, s);
  }
  S_ = static_cast<std::size_t>(max_s) + 1;
  std::vector<bool> seen(S_, false);
  for (int s : subpop_)
    seen[s] = true;
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
    throw std::invalid_argument("every subpopulation must have a subject");

  offsets_.assign(p_, 0);
  total_levels_ = 0;
  if (family_ == Family::categorical) {
    for (std::size_t j = 0; j < p_; ++j) {
      offsets_[j] = total_levels_;
      total_levels_ += static_cast<std::size_t>(levels_[j]);
    }
  }
}

std::vector<std::size_t> Dataset::subpop_sizes() const {
  std::vector<std::size_t> sizes(S_, 0);
  for (int s : subpop_)
    ++sizes[s];
  return sizes;
}

void Hyperparams::validate() const {
  if (K < 2)
    throw std::invalid_argument("K must be at least 2");
  if (K > 65535)
    throw std::invalid_argument("K must fit in 16 bits");
  if (!(weight_prior() > 0 && eta > 0 && a > 0 && b > 0 && tau > 0 &&
        gamma_shape > 0 && gamma_scale > 0))
    throw std::invalid_argument("hyperparameters must be strictly positive");
}

} // namespace rpc
