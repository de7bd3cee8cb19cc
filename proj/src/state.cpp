#include "rpc/state.hpp"

#include "rpc/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rpc {

ChainState ChainState::shaped(const Dataset &data, int K) {
  const std::size_t n = data.n(), p = data.p(), S = data.S();
  const auto k = static_cast<std::size_t>(K);
  ChainState st;
  st.C.assign(n, 0);
  st.G.assign(n * p, 1);
  st.L.assign(n * p, 0);
  st.pi.assign(k, 1.0 / K);
  st.lambda.assign(S * k, 1.0 / K);
  st.theta0 = KernelBank(data, k);
  st.theta1.assign(S, KernelBank(data, k));
  st.nu.assign(S * p, 0.5);
  st.beta.assign(S, 1.0);
  return st;
}

double ChainState::log1m_nu_at(std::size_t k) const {
  if (nu[k] >= kNuClamp && log1m_nu.size() == nu.size() &&
      log1m_nu[k] < std::log1p(-kNuClamp))
    return log1m_nu[k];
  return log1m_clamped(nu[k]);
}

namespace {

void check_simplex(std::span<const double> w, const char *what) {
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0))
      throw std::invalid_argument(std::string(what) + " has a negative entry");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw std::invalid_argument(std::string(what) + " does not sum to 1");
}

void check_bank(const KernelBank &bank, const Dataset &data, std::size_t K) {
  if (bank.family() != data.family() || bank.clusters() != K ||
      bank.items() != data.p())
    throw std::invalid_argument("kernel bank shape mismatch");
  for (std::size_t h = 0; h < K; ++h)
    for (std::size_t j = 0; j < data.p(); ++j) {
      if (data.family() == Family::categorical) {
        if (bank.levels() != data.levels())
          throw std::invalid_argument("kernel levels differ from data");
        check_simplex(bank.probs(h, j), "categorical kernel");
      } else if (!(bank.precision(h, j) > 0.0) ||
                 !std::isfinite(bank.mean(h, j))) {
        throw std::invalid_argument("invalid Gaussian kernel");
      }
    }
}

} // namespace

void ChainState::validate(const Dataset &data) const {
  const std::size_t n = data.n(), p = data.p(), S = data.S(), k = K();
  if (k < 1)
    throw std::invalid_argument("state has no clusters");
  if (C.size() != n || G.size() != n * p || L.size() != n * p ||
      lambda.size() != S * k || nu.size() != S * p || beta.size() != S ||
      (!log1m_nu.empty() && log1m_nu.size() != S * p) ||
      theta1.size() != S)
    throw std::invalid_argument("state dimensions do not match data");
  for (int c : C)
    if (c < 0 || static_cast<std::size_t>(c) >= k)
      throw std::invalid_argument("global index out of range");
  for (int l : L)
    if (l < 0 || static_cast<std::size_t>(l) >= k)
      throw std::invalid_argument("local index out of range");
  for (auto g : G)
    if (g > 1)
      throw std::invalid_argument("deviation indicator not binary");
  check_simplex(pi, "pi");
  for (std::size_t s = 0; s < S; ++s)
    check_simplex(std::span<const double>(lambda).subspan(s * k, k),
                  "lambda row");
  for (double v : nu)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("nu outside [0,1]");
  for (double b : beta)
    if (!(b > 0.0))
      throw std::invalid_argument("beta must be positive");
  check_bank(theta0, data, k);
  for (const auto &bank : theta1)
    check_bank(bank, data, k);
}

} // namespace rpc
