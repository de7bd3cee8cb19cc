#include "rpc/model.hpp"
#include "rpc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rpc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log1m_clamped(double nu) { return std::log1p(-std::min(nu, kNuClamp)); }

double log_sum_exp(std::span<const double> x) {
  double m = kNegInf;
  for (double v : x)
    m = std::max(m, v);
  if (m == kNegInf)
    return kNegInf;
  double acc = 0.0;
  for (double v : x)
    acc += std::exp(v - m);
  return m + std::log(acc);
}

double log_sum_exp_sorted(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  return log_sum_exp(x);
}

double sum_sorted(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  double acc = 0.0;
  for (double v : x)
    acc += v;
  return acc;
}

double subject_log_marginal(const ChainState &state, const Dataset &data,
                            std::size_t i) {
  const std::size_t p = data.p(), K = state.K();
  if (i >= data.n())
    throw std::invalid_argument("subject index out of range");
  if (state.G.size() != data.n() * p || state.theta0.items() != p ||
      state.theta0.clusters() != K || state.theta1.size() != data.S() ||
      state.lambda.size() != data.S() * K)
    throw std::invalid_argument("state does not match data dimensions");

  const auto s = static_cast<std::size_t>(data.subpop(i));
  std::vector<double> terms(K);
  for (std::size_t h = 0; h < K; ++h) {
    double acc = std::log(state.pi[h]);
    for (std::size_t j = 0; j < p && acc != kNegInf; ++j)
      if (state.G[i * p + j])
        acc += state.theta0.log_mass(data, h, i, j);
    terms[h] = acc;
  }
  double total = log_sum_exp_sorted(terms);
  if (total == kNegInf)
    throw NumericUnderflow("global mixture has zero mass for subject " +
                           std::to_string(i));

  for (std::size_t j = 0; j < p; ++j) {
    if (state.G[i * p + j])
      continue;
    for (std::size_t l = 0; l < K; ++l)
      terms[l] = std::log(state.lambda_at(s, l)) +
                 state.theta1[s].log_mass(data, l, i, j);
    double item = log_sum_exp_sorted(terms);
    if (item == kNegInf)
      throw NumericUnderflow("local mixture has zero mass for subject " +
                             std::to_string(i) + ", item " +
                             std::to_string(j));
    total += item;
  }
  return total;
}

namespace {

// (alpha - 1) * sum(log w) for a symmetric Dirichlet, summed order-free.
double dirichlet_log_density(std::span<const double> w, double alpha) {
  const double K = static_cast<double>(w.size());
  double out = std::lgamma(K * alpha) - K * std::lgamma(alpha);
  if (alpha != 1.0) {
    std::vector<double> t(w.size());
    for (std::size_t h = 0; h < w.size(); ++h)
      t[h] = (alpha - 1.0) * std::log(w[h]);
    out += sum_sorted(std::move(t));
  }
  return out;
}

// Prior mass of every cluster in a bank; one term per cluster, sorted sum.
double bank_log_prior(const KernelBank &bank, const Hyperparams &hyper) {
  std::vector<double> per_cluster(bank.clusters(), 0.0);
  for (std::size_t h = 0; h < bank.clusters(); ++h) {
    double acc = 0.0;
    for (std::size_t j = 0; j < bank.items(); ++j) {
      if (bank.family() == Family::categorical) {
        acc += dirichlet_log_density(bank.probs(h, j), hyper.eta);
      } else {
        const double mu = bank.mean(h, j), prec = bank.precision(h, j);
        acc += -0.5 * std::log(2.0 * std::numbers::pi * hyper.tau) -
               0.5 * mu * mu / hyper.tau;
        acc += (hyper.gamma_shape - 1.0) * std::log(prec) -
               prec / hyper.gamma_scale - std::lgamma(hyper.gamma_shape) -
               hyper.gamma_shape * std::log(hyper.gamma_scale);
      }
    }
    per_cluster[h] = acc;
  }
  return sum_sorted(std::move(per_cluster));
}

} // namespace

double log_joint(const ChainState &state, const Dataset &data,
                 const Hyperparams &hyper, ModelKind kind) {
  const std::size_t n = data.n(), p = data.p(), S = data.S(), K = state.K();
  const double alpha = hyper.weight_prior();
  const bool local = kind == ModelKind::rpc;

  double lik = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(data.subpop(i));
    const auto c = static_cast<std::size_t>(state.C[i]);
    lik += std::log(state.pi[c]);
    for (std::size_t j = 0; j < p; ++j) {
      if (!local || state.G[i * p + j]) {
        lik += state.theta0.log_mass(data, c, i, j);
      } else {
        lik += state.theta1[s].log_mass(data, state.L[i * p + j], i, j);
      }
      if (local)
        lik += std::log(state.lambda_at(s, state.L[i * p + j]));
    }
  }

  double prior = dirichlet_log_density(state.pi, alpha);
  prior += bank_log_prior(state.theta0, hyper);
  if (!local)
    return lik + prior;

  // deviation indicators, grouped per (s, j)
  std::vector<double> ones(S * p, 0.0), zeros(S * p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(data.subpop(i));
    for (std::size_t j = 0; j < p; ++j)
      (state.G[i * p + j] ? ones : zeros)[s * p + j] += 1.0;
  }
  double dev = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    const double beta = state.beta[s];
    for (std::size_t j = 0; j < p; ++j) {
      const double nu = state.nu[s * p + j];
      const double l1m = state.log1m_nu_at(s * p + j);
      if (ones[s * p + j] > 0)
        dev += ones[s * p + j] * std::log(nu);
      if (zeros[s * p + j] > 0)
        dev += zeros[s * p + j] * l1m;
      dev += std::log(beta) + (beta - 1.0) * l1m;
    }
    dev += hyper.a * std::log(hyper.b) - std::lgamma(hyper.a) +
           (hyper.a - 1.0) * std::log(beta) - hyper.b * beta;
    prior += dirichlet_log_density(
        std::span<const double>(state.lambda).subspan(s * K, K), alpha);
    prior += bank_log_prior(state.theta1[s], hyper);
  }
  return lik + prior + dev;
}

} // namespace rpc
