#pragma once

#include "rpc/dataset.hpp"
#include "rpc/kernels.hpp"

#include <cstdint>
#include <vector>

namespace rpc {

/// One full assignment of every latent variable and parameter.
///
/// C is n, G and L are n x p row-major, lambda is S x K, nu is S x p.
/// theta1 holds one bank per subpopulation.
struct ChainState {
  std::vector<int> C;
  std::vector<std::uint8_t> G;
  std::vector<int> L;
  std::vector<double> pi;
  std::vector<double> lambda;
  KernelBank theta0;
  std::vector<KernelBank> theta1;
  std::vector<double> nu;
  /// log(1 - nu) as drawn; consulted only where nu rounds to one.
  std::vector<double> log1m_nu;
  std::vector<double> beta;

  std::size_t K() const noexcept { return pi.size(); }

  double lambda_at(std::size_t s, std::size_t l) const {
    return lambda[s * K() + l];
  }
  double nu_at(std::size_t s, std::size_t j, std::size_t p) const {
    return nu[s * p + j];
  }

  /// log(1 - nu[k]), exact for draws that round to one.
  double log1m_nu_at(std::size_t k) const;

  /// Empty state sized for `data` with K clusters.
  static ChainState shaped(const Dataset &data, int K);

  /// Throws std::invalid_argument on any dimension, range or simplex
  /// violation.
  void validate(const Dataset &data) const;

  bool operator==(const ChainState &) const = default;
};

} // namespace rpc
