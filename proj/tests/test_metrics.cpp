#include "support.hpp"

#include "rpc/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>

using namespace rpc;

TEST_SUITE("metrics") {

TEST_CASE("mean squared error of nu") {
  const std::vector<double> a{0.2, 0.4, 1.0}, b{1.2, 1.4, 0.0};
  CHECK(mse_nu(a, a) == 0.0);
  CHECK(mse_nu(a, b) == doctest::Approx(1.0));
  CHECK(mse_nu(a, b) == mse_nu(b, a));
  CHECK_THROWS_AS(mse_nu(a, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("kernel error under matching") {
  const std::vector<double> mode3{0.1, 0.1, 0.7, 0.1};
  const std::vector<double> mode1{0.7, 0.1, 0.1, 0.1};
  const std::vector<double> flat(4, 0.25);
  SUBCASE("exact recovery") {
    CHECK(mse_theta({mode3, mode1}, {mode1, mode3}) == 0.0);
  }
  SUBCASE("uniform estimate") {
    CHECK(mse_theta({flat}, {mode3}) == doctest::Approx(0.0675));
  }
  SUBCASE("extra estimates are ignored") {
    CHECK(mse_theta({flat, mode3, mode1}, {mode3}) == 0.0);
  }
  SUBCASE("too few estimates") {
    CHECK_THROWS_AS(mse_theta({mode3}, {mode3, mode1}), std::invalid_argument);
  }
  SUBCASE("symmetric when counts match") {
    const std::vector<std::vector<double>> a{mode3, flat}, b{mode1, mode3};
    CHECK(mse_theta(a, b) == doctest::Approx(mse_theta(b, a)));
  }
  SUBCASE("invariant to estimate order") {
    const std::vector<std::vector<double>> est{flat, mode1, mode3};
    auto rev = est;
    std::reverse(rev.begin(), rev.end());
    CHECK(mse_theta(est, {mode3, mode1}) == mse_theta(rev, {mode3, mode1}));
  }
  SUBCASE("mask restricts the comparison") {
    const std::vector<bool> mask{true, false, false, false};
    CHECK(mse_theta({flat}, {mode3}, mask) == doctest::Approx(0.15 * 0.15));
  }
}

TEST_CASE("optimal matching beats greedy on a crafted instance") {
  // greedy takes the cheapest pair first (truth 0 <-> est 0) and pays for it
  const std::vector<std::vector<double>> truth{{0.0}, {1.0}};
  const std::vector<std::vector<double>> est{{0.1}, {-1.0}};
  auto g = match_clusters(est, truth, {}, Matching::greedy);
  auto o = match_clusters(est, truth, {}, Matching::optimal);
  CHECK(g == std::vector<std::size_t>{0, 1});
  CHECK(o == std::vector<std::size_t>{1, 0});
  CHECK(mse_theta(est, truth, {}, Matching::optimal) <=
        mse_theta(est, truth, {}, Matching::greedy));
}

TEST_CASE("optimal matching equals brute force") {
  Rng r = test::test_rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t nt = 3, ne = 5;
    std::vector<std::vector<double>> truth(nt, std::vector<double>(3)),
        est(ne, std::vector<double>(3));
    for (auto &v : truth)
      for (double &x : v)
        x = uniform01(r);
    for (auto &v : est)
      for (double &x : v)
        x = uniform01(r);
    std::vector<std::size_t> idx(ne);
    std::iota(idx.begin(), idx.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double total = 0.0;
      for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t e = 0; e < 3; ++e)
          total += std::pow(truth[t][e] - est[idx[t]][e], 2);
      best = std::min(best, total / (nt * 3));
    } while (std::next_permutation(idx.begin(), idx.end()));
    CHECK(mse_theta(est, truth, {}, Matching::optimal) == doctest::Approx(best));
  }
}

TEST_CASE("pair-counting agreement") {
  const std::vector<int> truth{0, 0, 1, 1, 2};
  SUBCASE("identical partitions") {
    auto a = sensitivity_specificity(truth, truth);
    CHECK(a.sensitivity == 1.0);
    CHECK(a.specificity == 1.0);
  }
  SUBCASE("one cluster") {
    auto a = sensitivity_specificity(std::vector<int>(5, 3), truth);
    CHECK(a.sensitivity == 1.0);
    CHECK(a.specificity == 0.0);
  }
  SUBCASE("relabeling the prediction changes nothing") {
    const std::vector<int> pred{0, 1, 1, 1, 2}, relabeled{7, 4, 4, 4, 9};
    auto a = sensitivity_specificity(pred, truth);
    auto b = sensitivity_specificity(relabeled, truth);
    CHECK(a.sensitivity == b.sensitivity);
    CHECK(a.specificity == b.specificity);
    // together pairs: (0,1), (2,3); kept: (2,3)
    CHECK(a.sensitivity == doctest::Approx(0.5));
  }
  SUBCASE("negative truth labels are skipped") {
    const std::vector<int> t{0, 0, -1, -1}, pred{0, 0, 0, 1};
    auto a = sensitivity_specificity(pred, t);
    CHECK(a.sensitivity == 1.0);
    CHECK(a.specificity == 1.0);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(sensitivity_specificity(std::vector<int>{0}, truth),
                    std::invalid_argument);
  }
}

} // TEST_SUITE
