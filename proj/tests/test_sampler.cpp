#include "support.hpp"

#include "rpc/errors.hpp"
#include "rpc/model.hpp"
#include "rpc/sampler.hpp"
#include "rpc/simgen.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rpc;

namespace {

constexpr int kDraws = 20000;

// Frequency of an event over repeated conditional draws.
template <class Update, class Event>
double frequency(Update update, Event event) {
  int hits = 0;
  for (int k = 0; k < kDraws; ++k) {
    Rng r = test::test_rng(static_cast<std::uint64_t>(k));
    update(r);
    hits += event() ? 1 : 0;
  }
  return static_cast<double>(hits) / kDraws;
}

// Within 5 binomial standard errors.
void check_rate(double observed, double expected) {
  const double se = std::sqrt(std::max(expected * (1 - expected), 1e-12) / kDraws);
  CHECK(std::abs(observed - expected) <= 5 * se + 1e-12);
}

// One subject, one item, K = 2, d = 4, observed level 1 (zero-based 0).
struct Tiny {
  Dataset data = test::categorical(1, {1}, {0}, 4);
  ChainState st = ChainState::shaped(data, 2);
  Tiny() {
    test::fill_kernels(st, {0.25, 0.25, 0.25, 0.25});
    set(st.theta0, 0, {0.7, 0.1, 0.1, 0.1});
    set(st.theta0, 1, {0.1, 0.7, 0.1, 0.1});
    set(st.theta1[0], 0, {0.7, 0.1, 0.1, 0.1});
    set(st.theta1[0], 1, {0.1, 0.7, 0.1, 0.1});
    st.pi = {0.5, 0.5};
    st.lambda = {0.5, 0.5};
  }
  static void set(KernelBank &b, std::size_t h, std::vector<double> v) {
    auto out = b.probs(h, 0);
    std::copy(v.begin(), v.end(), out.begin());
  }
};

std::string file_bytes(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_SUITE("sampler") {

TEST_CASE("deviation indicator conditional") {
  Tiny t;
  t.st.C = {0};
  t.st.L = {1};
  SUBCASE("mixing probability from kernel masses") {
    t.st.nu = {0.5};
    check_rate(frequency([&](Rng &r) { update_G(t.st, t.data, r); },
                         [&] { return t.st.G[0] == 1; }),
               0.875);
  }
  SUBCASE("nu = 1 pins the item to the global level") {
    t.st.nu = {1.0};
    CHECK(frequency([&](Rng &r) { update_G(t.st, t.data, r); },
                    [&] { return t.st.G[0] == 1; }) == 1.0);
  }
  SUBCASE("equal masses fall back to nu") {
    t.st.L = {0};
    t.st.nu = {0.3};
    check_rate(frequency([&](Rng &r) { update_G(t.st, t.data, r); },
                         [&] { return t.st.G[0] == 1; }),
               0.3);
  }
  SUBCASE("both kernels vanishing is an error") {
    Tiny::set(t.st.theta0, 0, {0.0, 0.5, 0.5, 0.0});
    Tiny::set(t.st.theta1[0], 1, {0.0, 0.5, 0.5, 0.0});
    Rng r = test::test_rng(1);
    CHECK_THROWS_AS(update_G(t.st, t.data, r), NumericUnderflow);
  }
}

TEST_CASE("global allocation conditional") {
  Tiny t;
  SUBCASE("kernel masses weight the prior") {
    t.st.G = {1};
    check_rate(frequency([&](Rng &r) { update_C(t.st, t.data, r); },
                         [&] { return t.st.C[0] == 0; }),
               0.875);
  }
  SUBCASE("no global items leaves the prior") {
    t.st.G = {0};
    t.st.pi = {0.3, 0.7};
    check_rate(frequency([&](Rng &r) { update_C(t.st, t.data, r); },
                         [&] { return t.st.C[0] == 0; }),
               0.3);
  }
  SUBCASE("degenerate weights") {
    t.st.pi = {1.0, 0.0};
    CHECK(frequency([&](Rng &r) { update_C(t.st, t.data, r); },
                    [&] { return t.st.C[0] == 0; }) == 1.0);
  }
}

TEST_CASE("local allocation conditional") {
  Tiny t;
  SUBCASE("global items draw from lambda") {
    t.st.G = {1};
    t.st.lambda = {0.2, 0.8};
    check_rate(frequency([&](Rng &r) { update_L(t.st, t.data, r); },
                         [&] { return t.st.L[0] == 0; }),
               0.2);
  }
  SUBCASE("deviated items weight lambda by kernel masses") {
    t.st.G = {0};
    check_rate(frequency([&](Rng &r) { update_L(t.st, t.data, r); },
                         [&] { return t.st.L[0] == 0; }),
               0.875);
  }
  SUBCASE("degenerate lambda") {
    t.st.G = {0};
    t.st.lambda = {0.0, 1.0};
    CHECK(frequency([&](Rng &r) { update_L(t.st, t.data, r); },
                    [&] { return t.st.L[0] == 1; }) == 1.0);
  }
}

TEST_CASE("weight updates follow Dirichlet posterior means") {
  SUBCASE("global weights with counts (10, 5, 0)") {
    std::vector<int> sub(15, 0);
    auto data = test::categorical(1, std::vector<int>(15, 1), sub, 2);
    auto st = ChainState::shaped(data, 3);
    for (int i = 0; i < 15; ++i)
      st.C[static_cast<std::size_t>(i)] = i < 10 ? 0 : 1;
    Hyperparams h;
    h.K = 3;
    double mean = 0.0;
    for (int k = 0; k < kDraws; ++k) {
      Rng r = test::test_rng(static_cast<std::uint64_t>(k));
      update_pi(st, h, r);
      mean += st.pi[2];
    }
    mean /= kDraws;
    const double a = 1.0 / 3, a0 = 16.0;
    const double sd = std::sqrt(a / a0 * (1 - a / a0) / (a0 + 1));
    CHECK(std::abs(mean - a / a0) < 5 * sd / std::sqrt(kDraws));
  }
  SUBCASE("local weights count every item") {
    // 2 subjects x 3 items, all L = 0; the posterior holds n_s * p = 6 counts
    auto data = test::categorical(3, std::vector<int>(6, 1), {0, 0}, 2);
    auto st = ChainState::shaped(data, 2);
    std::fill(st.G.begin(), st.G.end(), std::uint8_t{1});
    Hyperparams h;
    h.K = 2;
    double mean = 0.0;
    for (int k = 0; k < kDraws; ++k) {
      Rng r = test::test_rng(static_cast<std::uint64_t>(k));
      update_lambda(st, data, h, r);
      mean += st.lambda[1];
    }
    mean /= kDraws;
    const double a = 0.5, a0 = 7.0;
    const double sd = std::sqrt(a / a0 * (1 - a / a0) / (a0 + 1));
    CHECK(std::abs(mean - a / a0) < 5 * sd / std::sqrt(kDraws));
  }
}

TEST_CASE("categorical kernel update") {
  // 7 subjects with level 1 in cluster 0, none in cluster 1
  auto data = test::categorical(1, std::vector<int>(7, 1), std::vector<int>(7, 0), 4);
  auto st = ChainState::shaped(data, 2);
  test::fill_kernels(st, {0.25, 0.25, 0.25, 0.25});
  Hyperparams h;
  h.K = 2;
  std::vector<double> m0(4, 0.0), m1(4, 0.0);
  for (int k = 0; k < kDraws; ++k) {
    Rng r = test::test_rng(static_cast<std::uint64_t>(k));
    update_theta(st, data, h, r);
    for (std::size_t l = 0; l < 4; ++l) {
      m0[l] += st.theta0.probs(0, 0)[l] / kDraws;
      m1[l] += st.theta0.probs(1, 0)[l] / kDraws;
    }
  }
  CHECK(m0[0] == doctest::Approx(8.0 / 11).epsilon(0.01));
  CHECK(m0[1] == doctest::Approx(1.0 / 11).epsilon(0.03));
  for (double v : m1)
    CHECK(v == doctest::Approx(0.25).epsilon(0.03));
  Rng r = test::test_rng(1);
  CHECK_THROWS_AS(update_theta_gaussian(st, data, h, r), std::invalid_argument);
}

TEST_CASE("gaussian kernel update") {
  Hyperparams h;
  h.K = 2;
  SUBCASE("data pulls the mean") {
    Rng g = test::test_rng(77);
    std::vector<double> y(1000);
    for (double &v : y)
      v = 5.0 + draw_normal(g, 0.0, 0.1);
    auto data = Dataset::gaussian(1000, 1, y, std::vector<int>(1000, 0));
    auto st = ChainState::shaped(data, 2);
    Rng r = test::test_rng(3);
    for (int k = 0; k < 50; ++k)
      update_theta_gaussian(st, data, h, r);
    CHECK(std::abs(st.theta0.mean(0, 0) - 5.0) < 0.05);
    CHECK(1.0 / std::sqrt(st.theta0.precision(0, 0)) == doctest::Approx(0.1).epsilon(0.15));
  }
  SUBCASE("empty clusters draw from the prior") {
    auto data = Dataset::gaussian(1, 1, {0.0}, {0});
    auto st = ChainState::shaped(data, 2);
    double sum = 0.0, sumsq = 0.0, prec = 0.0;
    for (int k = 0; k < kDraws; ++k) {
      Rng r = test::test_rng(static_cast<std::uint64_t>(k));
      update_theta_gaussian(st, data, h, r);
      sum += st.theta0.mean(1, 0);
      sumsq += st.theta0.mean(1, 0) * st.theta0.mean(1, 0);
      prec += st.theta0.precision(1, 0);
    }
    const double mean = sum / kDraws, var = sumsq / kDraws - mean * mean;
    CHECK(std::abs(mean) < 5 * std::sqrt(10.0 / kDraws));
    CHECK(var == doctest::Approx(10.0).epsilon(0.05));
    // Gamma(0.1, scale 10) has mean 1 and sd sqrt(10)
    CHECK(std::abs(prec / kDraws - 1.0) < 5 * std::sqrt(10.0 / kDraws));
  }
}

TEST_CASE("deviation probability and concentration updates") {
  std::vector<int> sub(100, 0);
  auto data = test::categorical(1, std::vector<int>(100, 1), sub, 2);
  auto st = ChainState::shaped(data, 2);
  st.beta = {1.0};
  auto mean_nu = [&] {
    double m = 0.0;
    for (int k = 0; k < kDraws; ++k) {
      Rng r = test::test_rng(static_cast<std::uint64_t>(k));
      update_nu(st, data, r);
      m += st.nu[0];
    }
    return m / kDraws;
  };
  SUBCASE("all global") {
    std::fill(st.G.begin(), st.G.end(), std::uint8_t{1});
    CHECK(mean_nu() == doctest::Approx(101.0 / 102).epsilon(1e-3));
  }
  SUBCASE("all local") {
    std::fill(st.G.begin(), st.G.end(), std::uint8_t{0});
    CHECK(mean_nu() == doctest::Approx(1.0 / 102).epsilon(0.02));
  }
  SUBCASE("beta with every nu at zero") {
    Hyperparams h;
    auto st50 = st;
    st50.nu.assign(50, 0.0);
    double m = 0.0;
    for (int k = 0; k < kDraws; ++k) {
      Rng r = test::test_rng(static_cast<std::uint64_t>(k));
      update_beta(st50, h, r);
      m += st50.beta[0];
    }
    // Ga(a + p, rate b): mean 51, sd sqrt(51)
    CHECK(std::abs(m / kDraws - 51.0) < 5 * std::sqrt(51.0 / kDraws));
  }
  SUBCASE("nu at one stays finite") {
    Hyperparams h;
    st.nu = {1.0};
    Rng r = test::test_rng(5);
    update_beta(st, h, r);
    CHECK(std::isfinite(st.beta[0]));
    CHECK(st.beta[0] > 0.0);
  }
}

TEST_CASE("label permutations") {
  auto sim = sim::generate(sim::SimSpec::for_case(3, 'a', 5, 4));
  Hyperparams h;
  h.K = 5;
  ChainConfig c;
  c.seed = 11;
  auto st = initialize(sim.data, h, c);
  SUBCASE("identity leaves the state unchanged") {
    auto copy = st;
    const std::vector<int> id{0, 1, 2, 3, 4};
    apply_global_permutation(copy, id);
    for (std::size_t s = 0; s < sim.data.S(); ++s)
      apply_local_permutation(copy, sim.data, s, id);
    CHECK(copy == st);
  }
  SUBCASE("a swap applied twice is the identity") {
    auto copy = st;
    const std::vector<int> swap{1, 0, 2, 3, 4};
    apply_global_permutation(copy, swap);
    apply_local_permutation(copy, sim.data, 2, swap);
    CHECK_FALSE(copy == st);
    apply_global_permutation(copy, swap);
    apply_local_permutation(copy, sim.data, 2, swap);
    CHECK(copy == st);
  }
  SUBCASE("random relabeling keeps the log joint") {
    const double before = log_joint(st, sim.data, h);
    for (std::uint64_t k = 0; k < 10; ++k) {
      Rng a = test::test_rng(k), b = test::test_rng(k + 100);
      permute_labels(st, sim.data, a, b);
      CHECK(std::abs(log_joint(st, sim.data, h) - before) <= 1e-12);
      CHECK_NOTHROW(st.validate(sim.data));
    }
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_AS(apply_global_permutation(st, std::vector<int>{0, 1}),
                    std::invalid_argument);
  }
}

TEST_CASE("chain driver") {
  auto sim = sim::generate(sim::SimSpec::for_case(3, 'a', 4, 9));
  Hyperparams h;
  h.K = 6;
  ChainConfig c;
  c.n_iterations = 60;
  c.burn_in = 20;
  c.thin = 3;
  c.seed = 17;
  c.max_kernel_snapshots = 5;

  SUBCASE("snapshot bookkeeping") {
    auto tr = run_chain(sim.data, h, c);
    CHECK(tr.snapshots() == static_cast<std::size_t>((60 - 20) / 3));
    CHECK(tr.log_joint.size() == 60);
    CHECK(tr.C.size() == tr.snapshots() * sim.data.n());
    CHECK(tr.kernel_snapshots.size() <= 5);
    CHECK(tr.theta0.size() == tr.kernel_snapshots.size() * tr.kernel_block());
    for (double g : tr.g_mean)
      CHECK((g >= 0.0 && g <= 1.0));
  }
  SUBCASE("equal seeds give byte-identical traces") {
    const auto dir = std::filesystem::temp_directory_path() / "rpc_repro_test";
    std::filesystem::create_directories(dir);
    write_trace(run_chain(sim.data, h, c), dir / "a.bin");
    write_trace(run_chain(sim.data, h, c), dir / "b.bin");
    CHECK(file_bytes(dir / "a.bin") == file_bytes(dir / "b.bin"));
    c.seed = 18;
    write_trace(run_chain(sim.data, h, c), dir / "c.bin");
    CHECK(file_bytes(dir / "a.bin") != file_bytes(dir / "c.bin"));
    std::filesystem::remove_all(dir);
  }
  SUBCASE("oFMM equals the full model with nu pinned at one") {
    h.dirichlet_weight = 1.0 / h.K;
    auto base = fit_baseline(sim.data, h, c, Baseline::ofmm);
    c.fixed_nu = 1.0;
    auto full = run_chain(sim.data, h, c);
    CHECK(base.C == full.C);
    CHECK(base.pi == full.pi);
    for (double v : full.nu)
      CHECK(v == 1.0);
  }
  SUBCASE("lca4 uses four classes") {
    auto tr = fit_baseline(sim.data, h, c, Baseline::lca4);
    CHECK(tr.K == 4);
    CHECK(tr.kind == ModelKind::global_only);
  }
  SUBCASE("invalid configurations") {
    c.burn_in = 60;
    CHECK_THROWS_AS(run_chain(sim.data, h, c), std::invalid_argument);
    c.burn_in = 0;
    c.thin = 0;
    CHECK_THROWS_AS(run_chain(sim.data, h, c), std::invalid_argument);
    CHECK_THROWS_AS(baseline_from_string("dpm"), std::invalid_argument);
  }
}

TEST_CASE("random helpers") {
  Rng r = test::test_rng(1);
  CHECK_THROWS_AS(draw_gamma(r, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(draw_gamma(r, 1.0, -1.0), std::invalid_argument);
  const std::vector<double> tiny{1e-3, 1e-3, 1e-3};
  auto w = draw_dirichlet(r, tiny);
  for (double v : w)
    CHECK(v > 0.0);
  const std::vector<double> zeros{-INFINITY, -INFINITY};
  std::vector<double> scratch(2);
  CHECK(draw_log_categorical(r, zeros, scratch) == -1);
  const std::vector<double> cum{0.0, 0.0, 1.0};
  CHECK(draw_from_cumulative(r, cum) == 2);

  // log(1 - x) agrees with x where x is representable, stays exact past it
  for (int k = 0; k < 200; ++k) {
    const auto d = draw_beta_log1m(r, 2.0, 0.01);
    CHECK(std::isfinite(d.log1m));
    if (d.value < 0.999)
      CHECK(d.log1m == doctest::Approx(std::log1p(-d.value)).epsilon(1e-9));
    if (d.value == 1.0)
      CHECK(d.log1m < std::log(1e-15));
  }
}

} // TEST_SUITE
