#include "rpc/sampler.hpp"
#include "rpc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace rpc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log theta for one bank, transposed to [level][cluster] so the C update can
// add a contiguous K-vector per observed item.
std::vector<double> log_table_by_level(const KernelBank &bank) {
  const std::size_t K = bank.clusters(), W = bank.width();
  std::vector<double> out(W * K);
  const auto &prob = bank.prob_data();
  for (std::size_t h = 0; h < K; ++h)
    for (std::size_t w = 0; w < W; ++w)
      out[w * K + h] = std::log(prob[h * W + w]);
  return out;
}

// 0.5 * log(prec / 2pi) per (cluster, item)
std::vector<double> gaussian_norm_terms(const KernelBank &bank) {
  std::vector<double> out(bank.precision_data().size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = 0.5 * (std::log(bank.precision_data()[k]) -
                    std::log(2.0 * std::numbers::pi));
  return out;
}

void require(bool ok, const char *what) {
  if (!ok)
    throw std::invalid_argument(what);
}

} // namespace

void ChainConfig::validate() const {
  require(n_iterations > 0, "n_iterations must be positive");
  require(burn_in >= 0 && burn_in < n_iterations,
          "burn_in must be in [0, n_iterations)");
  require(thin >= 1, "thin must be at least 1");
  require(max_kernel_snapshots >= 0, "max_kernel_snapshots must be >= 0");
  if (fixed_nu)
    require(*fixed_nu >= 0.0 && *fixed_nu <= 1.0, "fixed nu outside [0,1]");
}

Rng stream_rng(const ChainConfig &config, std::int64_t iteration, Stream s) {
  return substream(config.seed, static_cast<std::uint64_t>(iteration + 1),
                   static_cast<std::uint64_t>(s));
}

// ---------------------------------------------------------------------------
// Step 1

void update_G(ChainState &state, const Dataset &data, Rng &rng) {
  const std::size_t n = data.n(), p = data.p();
  if (data.family() == Family::categorical) {
    // Single-item masses are at least DBL_MIN, so the ratio needs no logs.
    const auto &off = data.level_offsets();
    const std::size_t W = data.total_levels();
    const auto &p0 = state.theta0.prob_data();
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(data.subpop(i));
      const auto c = static_cast<std::size_t>(state.C[i]);
      const auto &p1 = state.theta1[s].prob_data();
      for (std::size_t j = 0; j < p; ++j) {
        const double nu = state.nu[s * p + j];
        const std::size_t w = off[j] + static_cast<std::size_t>(data.code(i, j));
        const double a = nu * p0[c * W + w];
        const double b =
            (1.0 - nu) *
            p1[static_cast<std::size_t>(state.L[i * p + j]) * W + w];
        if (!(a + b > 0.0))
          throw NumericUnderflow("both kernels vanish at subject " +
                                 std::to_string(i) + ", item " +
                                 std::to_string(j));
        state.G[i * p + j] = draw_bernoulli(rng, a / (a + b)) ? 1 : 0;
      }
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(data.subpop(i));
    const auto c = static_cast<std::size_t>(state.C[i]);
    for (std::size_t j = 0; j < p; ++j) {
      const double nu = state.nu[s * p + j];
      const double a =
          std::log(nu) + state.theta0.log_mass(data, c, i, j);
      const double b = std::log1p(-nu) +
                       state.theta1[s].log_mass(data, state.L[i * p + j], i, j);
      if (a == kNegInf && b == kNegInf)
        throw NumericUnderflow("both kernels vanish at subject " +
                               std::to_string(i) + ", item " +
                               std::to_string(j));
      const double prob = 1.0 / (1.0 + std::exp(b - a));
      state.G[i * p + j] = draw_bernoulli(rng, prob) ? 1 : 0;
    }
  }
}

// ---------------------------------------------------------------------------
// Step 2

void update_C(ChainState &state, const Dataset &data, Rng &rng) {
  const std::size_t n = data.n(), p = data.p(), K = state.K();
  std::vector<double> logw(K), scratch(K), logpi(K);
  for (std::size_t h = 0; h < K; ++h)
    logpi[h] = std::log(state.pi[h]);

  const bool cat = data.family() == Family::categorical;
  std::vector<double> table, norm;
  if (cat)
    table = log_table_by_level(state.theta0);
  else
    norm = gaussian_norm_terms(state.theta0);
  const auto &offsets = data.level_offsets();

  for (std::size_t i = 0; i < n; ++i) {
    std::copy(logpi.begin(), logpi.end(), logw.begin());
    for (std::size_t j = 0; j < p; ++j) {
      if (!state.G[i * p + j])
        continue;
      if (cat) {
        const double *row =
            table.data() + (offsets[j] + data.code(i, j)) * K;
        for (std::size_t h = 0; h < K; ++h)
          logw[h] += row[h];
      } else {
        const double y = data.value(i, j);
        for (std::size_t h = 0; h < K; ++h) {
          const double z = y - state.theta0.mean(h, j);
          logw[h] += norm[h * p + j] -
                     0.5 * state.theta0.precision(h, j) * z * z;
        }
      }
    }
    const int c = draw_log_categorical(rng, logw, scratch);
    if (c < 0)
      throw NumericUnderflow("global allocation has zero mass for subject " +
                             std::to_string(i));
    state.C[i] = c;
  }
}

// ---------------------------------------------------------------------------
// Step 3

void update_L(ChainState &state, const Dataset &data, Rng &rng) {
  const std::size_t n = data.n(), p = data.p(), S = data.S(), K = state.K();
  const bool cat = data.family() == Family::categorical;
  const auto &offsets = data.level_offsets();
  const std::size_t W = data.total_levels();

  // prior cumulative weights per subpopulation (used when G_ij = 1)
  std::vector<double> prior_cum(S * K);
  for (std::size_t s = 0; s < S; ++s) {
    double acc = 0.0;
    for (std::size_t l = 0; l < K; ++l) {
      acc += state.lambda[s * K + l];
      prior_cum[s * K + l] = acc;
    }
  }

  // categorical: cumulative lambda_l * theta1_l(r) for every (s, level)
  std::vector<double> post_cum;
  if (cat) {
    post_cum.resize(S * W * K);
    for (std::size_t s = 0; s < S; ++s) {
      const auto &prob = state.theta1[s].prob_data();
      for (std::size_t w = 0; w < W; ++w) {
        double acc = 0.0;
        double *out = post_cum.data() + (s * W + w) * K;
        for (std::size_t l = 0; l < K; ++l) {
          acc += state.lambda[s * K + l] * prob[l * W + w];
          out[l] = acc;
        }
      }
    }
  }

  std::vector<double> logw(K), scratch(K), loglam(S * K);
  std::vector<std::vector<double>> norm(S);
  if (!cat) {
    for (std::size_t s = 0; s < S; ++s)
      norm[s] = gaussian_norm_terms(state.theta1[s]);
    for (std::size_t k = 0; k < S * K; ++k)
      loglam[k] = std::log(state.lambda[k]);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(data.subpop(i));
    for (std::size_t j = 0; j < p; ++j) {
      int l;
      if (state.G[i * p + j]) {
        l = draw_from_cumulative(
            rng, std::span<const double>(prior_cum).subspan(s * K, K));
      } else if (cat) {
        std::span<const double> cum(
            post_cum.data() + (s * W + offsets[j] + data.code(i, j)) * K, K);
        if (!(cum.back() > 0.0))
          throw NumericUnderflow("local allocation has zero mass");
        l = draw_from_cumulative(rng, cum);
      } else {
        const double y = data.value(i, j);
        const auto &bank = state.theta1[s];
        for (std::size_t h = 0; h < K; ++h) {
          const double z = y - bank.mean(h, j);
          logw[h] = loglam[s * K + h] + norm[s][h * p + j] -
                    0.5 * bank.precision(h, j) * z * z;
        }
        l = draw_log_categorical(rng, logw, scratch);
        if (l < 0)
          throw NumericUnderflow("local allocation has zero mass");
      }
      state.L[i * p + j] = l;
    }
  }
}

// ---------------------------------------------------------------------------
// Steps 4-5

void update_pi(ChainState &state, const Hyperparams &hyper, Rng &rng) {
  const std::size_t K = state.K();
  std::vector<double> alpha(K, hyper.weight_prior());
  for (int c : state.C)
    alpha[static_cast<std::size_t>(c)] += 1.0;
  draw_dirichlet(rng, alpha, state.pi);
}

void update_lambda(ChainState &state, const Dataset &data,
                   const Hyperparams &hyper, Rng &rng) {
  const std::size_t n = data.n(), p = data.p(), S = data.S(), K = state.K();
  std::vector<double> alpha(S * K, hyper.weight_prior());
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(data.subpop(i));
    for (std::size_t j = 0; j < p; ++j)
      alpha[s * K + static_cast<std::size_t>(state.L[i * p + j])] += 1.0;
  }
  for (std::size_t s = 0; s < S; ++s)
    draw_dirichlet(rng, std::span<const double>(alpha).subspan(s * K, K),
                   std::span<double>(state.lambda).subspan(s * K, K));
}

// ---------------------------------------------------------------------------
// Step 6

namespace {

// Categorical: counts laid out like the bank (cluster x total levels).
void redraw_categorical(KernelBank &bank, const std::vector<double> &counts,
                        double eta, Rng &rng) {
  const std::size_t K = bank.clusters(), W = bank.width();
  std::vector<double> alpha;
  for (std::size_t h = 0; h < K; ++h)
    for (std::size_t j = 0; j < bank.items(); ++j) {
      auto out = bank.probs(h, j);
      alpha.assign(out.size(), eta);
      const std::size_t base = h * W + bank.offsets()[j];
      for (std::size_t r = 0; r < out.size(); ++r)
        alpha[r] += counts[base + r];
      draw_dirichlet(rng, alpha, out);
    }
}

struct GaussStats {
  std::vector<double> count, sum, sumsq; // cluster x item
  explicit GaussStats(std::size_t size)
      : count(size, 0.0), sum(size, 0.0), sumsq(size, 0.0) {}
  void add(std::size_t k, double y) {
    count[k] += 1.0;
    sum[k] += y;
    sumsq[k] += y * y;
  }
};

// Mean | precision, then precision | new mean.
void redraw_gaussian(KernelBank &bank, const GaussStats &st,
                     const Hyperparams &hyper, Rng &rng) {
  const std::size_t K = bank.clusters(), p = bank.items();
  for (std::size_t h = 0; h < K; ++h)
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t k = h * p + j;
      const double m = st.count[k];
      const double prec = bank.precision(h, j);
      const double var = 1.0 / (1.0 / hyper.tau + m * prec);
      const double mu = draw_normal(rng, var * prec * st.sum[k], std::sqrt(var));
      bank.mean(h, j) = mu;
      const double ss =
          std::max(0.0, st.sumsq[k] - 2.0 * mu * st.sum[k] + m * mu * mu);
      const double shape = hyper.gamma_shape + 0.5 * m;
      const double rate = 1.0 / hyper.gamma_scale + 0.5 * ss;
      const double draw = std::exp(draw_log_gamma(rng, shape)) / rate;
      bank.precision(h, j) =
          std::max(draw, std::numeric_limits<double>::min());
    }
}

} // namespace

void update_global_kernels(ChainState &state, const Dataset &data,
                           const Hyperparams &hyper, Rng &rng) {
  const std::size_t n = data.n(), p = data.p();
  if (data.family() == Family::categorical) {
    const std::size_t W = data.total_levels();
    const auto &off = data.level_offsets();
    std::vector<double> counts(state.K() * W, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(state.C[i]);
      for (std::size_t j = 0; j < p; ++j)
        if (state.G[i * p + j])
          counts[c * W + off[j] + data.code(i, j)] += 1.0;
    }
    redraw_categorical(state.theta0, counts, hyper.eta, rng);
  } else {
    GaussStats st(state.K() * p);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(state.C[i]);
      for (std::size_t j = 0; j < p; ++j)
        if (state.G[i * p + j])
          st.add(c * p + j, data.value(i, j));
    }
    redraw_gaussian(state.theta0, st, hyper, rng);
  }
}

void update_local_kernels(ChainState &state, const Dataset &data,
                          const Hyperparams &hyper, Rng &rng) {
  const std::size_t n = data.n(), p = data.p(), S = data.S(), K = state.K();
  if (data.family() == Family::categorical) {
    const std::size_t W = data.total_levels();
    const auto &off = data.level_offsets();
    std::vector<std::vector<double>> counts(S,
                                            std::vector<double>(K * W, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      auto &cs = counts[static_cast<std::size_t>(data.subpop(i))];
      for (std::size_t j = 0; j < p; ++j)
        if (!state.G[i * p + j])
          cs[static_cast<std::size_t>(state.L[i * p + j]) * W + off[j] +
             data.code(i, j)] += 1.0;
    }
    for (std::size_t s = 0; s < S; ++s)
      redraw_categorical(state.theta1[s], counts[s], hyper.eta, rng);
  } else {
    std::vector<GaussStats> st(S, GaussStats(K * p));
    for (std::size_t i = 0; i < n; ++i) {
      auto &ss = st[static_cast<std::size_t>(data.subpop(i))];
      for (std::size_t j = 0; j < p; ++j)
        if (!state.G[i * p + j])
          ss.add(static_cast<std::size_t>(state.L[i * p + j]) * p + j,
                 data.value(i, j));
    }
    for (std::size_t s = 0; s < S; ++s)
      redraw_gaussian(state.theta1[s], st[s], hyper, rng);
  }
}

void update_theta(ChainState &state, const Dataset &data,
                  const Hyperparams &hyper, Rng &rng) {
  require(data.family() == Family::categorical,
          "update_theta needs categorical data");
  update_global_kernels(state, data, hyper, rng);
  update_local_kernels(state, data, hyper, rng);
}

void update_theta_gaussian(ChainState &state, const Dataset &data,
                           const Hyperparams &hyper, Rng &rng) {
  require(data.family() == Family::gaussian,
          "update_theta_gaussian needs Gaussian data");
  update_global_kernels(state, data, hyper, rng);
  update_local_kernels(state, data, hyper, rng);
}

// ---------------------------------------------------------------------------
// Steps 7-8

void update_nu(ChainState &state, const Dataset &data, Rng &rng) {
  const std::size_t n = data.n(), p = data.p(), S = data.S();
  std::vector<double> ones(S * p, 0.0), zeros(S * p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(data.subpop(i));
    for (std::size_t j = 0; j < p; ++j)
      (state.G[i * p + j] ? ones : zeros)[s * p + j] += 1.0;
  }
  state.log1m_nu.resize(S * p);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t j = 0; j < p; ++j) {
      const auto d = draw_beta_log1m(rng, 1.0 + ones[s * p + j],
                                     state.beta[s] + zeros[s * p + j]);
      state.nu[s * p + j] = d.value;
      state.log1m_nu[s * p + j] = d.log1m;
    }
}

void update_beta(ChainState &state, const Hyperparams &hyper, Rng &rng) {
  const std::size_t S = state.beta.size();
  const std::size_t p = S ? state.nu.size() / S : 0;
  for (std::size_t s = 0; s < S; ++s) {
    double rate = hyper.b;
    for (std::size_t j = 0; j < p; ++j)
      rate -= state.log1m_nu_at(s * p + j);
    state.beta[s] = draw_gamma(rng, hyper.a + static_cast<double>(p),
                               1.0 / rate);
  }
}

// ---------------------------------------------------------------------------
// Label switching

std::vector<int> random_permutation(std::size_t K, Rng &rng) {
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

void apply_global_permutation(ChainState &state, std::span<const int> perm) {
  const std::size_t K = state.K();
  require(perm.size() == K, "permutation size mismatch");
  std::vector<double> pi(K);
  for (std::size_t h = 0; h < K; ++h)
    pi[static_cast<std::size_t>(perm[h])] = state.pi[h];
  state.pi.swap(pi);
  state.theta0.permute(perm);
  for (int &c : state.C)
    c = perm[static_cast<std::size_t>(c)];
}

void apply_local_permutation(ChainState &state, const Dataset &data,
                             std::size_t s, std::span<const int> perm) {
  const std::size_t K = state.K(), p = data.p();
  require(perm.size() == K, "permutation size mismatch");
  std::vector<double> lam(K);
  for (std::size_t l = 0; l < K; ++l)
    lam[static_cast<std::size_t>(perm[l])] = state.lambda[s * K + l];
  std::copy(lam.begin(), lam.end(), state.lambda.begin() + s * K);
  state.theta1[s].permute(perm);
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (static_cast<std::size_t>(data.subpop(i)) != s)
      continue;
    for (std::size_t j = 0; j < p; ++j)
      state.L[i * p + j] = perm[static_cast<std::size_t>(state.L[i * p + j])];
  }
}

void permute_labels(ChainState &state, const Dataset &data, Rng &global_rng,
                    Rng &local_rng) {
  apply_global_permutation(state, random_permutation(state.K(), global_rng));
  for (std::size_t s = 0; s < data.S(); ++s)
    apply_local_permutation(state, data, s,
                            random_permutation(state.K(), local_rng));
}

// ---------------------------------------------------------------------------
// Driver

namespace {

void draw_prior_bank(KernelBank &bank, const Hyperparams &hyper, Rng &rng) {
  for (std::size_t h = 0; h < bank.clusters(); ++h)
    for (std::size_t j = 0; j < bank.items(); ++j) {
      if (bank.family() == Family::categorical) {
        auto out = bank.probs(h, j);
        std::vector<double> alpha(out.size(), hyper.eta);
        draw_dirichlet(rng, alpha, out);
      } else {
        bank.mean(h, j) = draw_normal(rng, 0.0, std::sqrt(hyper.tau));
        bank.precision(h, j) =
            std::max(std::exp(draw_log_gamma(rng, hyper.gamma_shape)) *
                         hyper.gamma_scale,
                     std::numeric_limits<double>::min());
      }
    }
}

} // namespace

ChainState initialize(const Dataset &data, const Hyperparams &hyper,
                      const ChainConfig &config, ModelKind kind) {
  hyper.validate();
  const std::size_t S = data.S();
  const auto K = static_cast<std::size_t>(hyper.K);
  ChainState st = ChainState::shaped(data, hyper.K);
  std::vector<double> alpha(K, hyper.weight_prior());

  // Weights first, then allocations drawn from them.
  Rng g = stream_rng(config, -1, Stream::init_global);
  draw_dirichlet(g, alpha, st.pi);
  std::vector<double> cum(K);
  std::partial_sum(st.pi.begin(), st.pi.end(), cum.begin());
  for (auto &c : st.C)
    c = draw_from_cumulative(g, cum);
  draw_prior_bank(st.theta0, hyper, g);

  Rng l = stream_rng(config, -1, Stream::init_local);
  const std::size_t p = data.p();
  for (std::size_t s = 0; s < S; ++s) {
    draw_dirichlet(l, alpha, std::span<double>(st.lambda).subspan(s * K, K));
    draw_prior_bank(st.theta1[s], hyper, l);
  }
  st.log1m_nu.resize(st.nu.size());
  for (std::size_t k = 0; k < st.nu.size(); ++k) {
    const auto d = config.fixed_nu
                       ? BetaDraw{*config.fixed_nu, log1m_clamped(*config.fixed_nu)}
                       : draw_beta_log1m(l, 1.0, 1.0);
    st.nu[k] = d.value;
    st.log1m_nu[k] = d.log1m;
  }
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto s = static_cast<std::size_t>(data.subpop(i));
    std::partial_sum(st.lambda.begin() + static_cast<std::ptrdiff_t>(s * K),
                     st.lambda.begin() + static_cast<std::ptrdiff_t>((s + 1) * K),
                     cum.begin());
    for (std::size_t j = 0; j < p; ++j) {
      st.G[i * p + j] = draw_bernoulli(l, st.nu[s * p + j]) ? 1 : 0;
      st.L[i * p + j] = draw_from_cumulative(l, cum);
    }
  }
  std::fill(st.beta.begin(), st.beta.end(), 1.0);

  if (kind == ModelKind::global_only) {
    std::fill(st.G.begin(), st.G.end(), std::uint8_t{1});
    std::fill(st.nu.begin(), st.nu.end(), 1.0);
    st.log1m_nu.clear();
  }
  return st;
}

void sweep(ChainState &state, const Dataset &data, const Hyperparams &hyper,
           const ChainConfig &config, std::int64_t it, ModelKind kind) {
  const bool local = kind == ModelKind::rpc;
  auto rng = [&](Stream s) { return stream_rng(config, it, s); };

  if (local) {
    Rng r = rng(Stream::deviation);
    update_G(state, data, r);
  }
  {
    Rng r = rng(Stream::global_index);
    update_C(state, data, r);
  }
  if (local) {
    Rng r = rng(Stream::local_index);
    update_L(state, data, r);
  }
  {
    Rng r = rng(Stream::global_weights);
    update_pi(state, hyper, r);
  }
  if (local) {
    Rng r = rng(Stream::local_weights);
    update_lambda(state, data, hyper, r);
  }
  {
    Rng r = rng(Stream::global_kernels);
    update_global_kernels(state, data, hyper, r);
  }
  if (local) {
    Rng r = rng(Stream::local_kernels);
    update_local_kernels(state, data, hyper, r);
    if (!config.fixed_nu) {
      Rng rn = rng(Stream::nu);
      update_nu(state, data, rn);
      if (config.update_beta) {
        Rng rb = rng(Stream::beta);
        update_beta(state, hyper, rb);
      }
    }
  }
  if (config.permute_labels) {
    Rng rg = rng(Stream::permute_global);
    apply_global_permutation(state, random_permutation(state.K(), rg));
    if (local) {
      Rng rl = rng(Stream::permute_local);
      for (std::size_t s = 0; s < data.S(); ++s)
        apply_local_permutation(state, data, s,
                                random_permutation(state.K(), rl));
    }
  }
}

namespace {

void append_bank(std::vector<float> &out, const KernelBank &bank) {
  if (bank.family() == Family::categorical) {
    for (double v : bank.prob_data())
      out.push_back(static_cast<float>(v));
  } else {
    for (double v : bank.mean_data())
      out.push_back(static_cast<float>(v));
    for (double v : bank.precision_data())
      out.push_back(static_cast<float>(v));
  }
}

} // namespace

ChainTrace run_chain(const Dataset &data, const Hyperparams &hyper,
                     const ChainConfig &config, ModelKind kind,
                     const SweepObserver &observer) {
  config.validate();
  hyper.validate();
  const std::size_t n = data.n(), p = data.p(), S = data.S();

  ChainTrace tr;
  tr.family = data.family();
  tr.kind = kind;
  tr.n = n;
  tr.p = p;
  tr.S = S;
  tr.K = static_cast<std::size_t>(hyper.K);
  tr.levels = data.levels();
  tr.subpops = data.subpops();
  tr.g_mean.assign(n * p, 0.0);

  const int stored = config.stored_snapshots();
  const int kstride =
      config.max_kernel_snapshots > 0
          ? std::max(1, (stored + config.max_kernel_snapshots - 1) /
                            config.max_kernel_snapshots)
          : 0;
  tr.log_joint.reserve(static_cast<std::size_t>(config.n_iterations));
  tr.iterations.reserve(static_cast<std::size_t>(stored));
  tr.C.reserve(static_cast<std::size_t>(stored) * n);

  ChainState state = initialize(data, hyper, config, kind);
  for (std::int64_t it = 0; it < config.n_iterations; ++it) {
    sweep(state, data, hyper, config, it, kind);
    const double lj = log_joint(state, data, hyper, kind);
    if (std::isnan(lj) || lj == std::numeric_limits<double>::infinity())
      throw ChainDiverged("log joint is not finite at sweep " +
                          std::to_string(it));
    tr.log_joint.push_back(lj);
    if (observer)
      observer(it, state);

    const std::int64_t past = it - config.burn_in;
    if (past < 0 || (past + 1) % config.thin != 0)
      continue;
    if (static_cast<int>(tr.iterations.size()) >= stored)
      continue;
    const auto snap = static_cast<std::int64_t>(tr.iterations.size());
    tr.iterations.push_back(it);
    tr.pi.insert(tr.pi.end(), state.pi.begin(), state.pi.end());
    tr.lambda.insert(tr.lambda.end(), state.lambda.begin(),
                     state.lambda.end());
    tr.nu.insert(tr.nu.end(), state.nu.begin(), state.nu.end());
    tr.beta.insert(tr.beta.end(), state.beta.begin(), state.beta.end());
    for (int c : state.C)
      tr.C.push_back(static_cast<std::uint16_t>(c));
    for (std::size_t k = 0; k < n * p; ++k)
      tr.g_mean[k] += state.G[k];
    if (kstride > 0 && snap % kstride == 0) {
      tr.kernel_snapshots.push_back(snap);
      append_bank(tr.theta0, state.theta0);
      for (const auto &bank : state.theta1)
        append_bank(tr.theta1, bank);
    }
  }
  if (tr.snapshots() > 0)
    for (double &g : tr.g_mean)
      g /= static_cast<double>(tr.snapshots());
  return tr;
}

Baseline baseline_from_string(const std::string &s) {
  if (s == "lca4")
    return Baseline::lca4;
  if (s == "ofmm")
    return Baseline::ofmm;
  throw std::invalid_argument("unknown baseline '" + s + "'");
}

ChainTrace fit_baseline(const Dataset &data, Hyperparams hyper,
                        const ChainConfig &config, Baseline mode) {
  require(data.family() == Family::categorical,
          "baselines need categorical data");
  if (mode == Baseline::lca4)
    hyper.K = 4;
  hyper.dirichlet_weight = 1.0 / hyper.K;
  return run_chain(data, hyper, config, ModelKind::global_only);
}

} // namespace rpc
