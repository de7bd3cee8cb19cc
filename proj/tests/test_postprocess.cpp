#include "support.hpp"

#include "rpc/postprocess.hpp"
#include "rpc/sampler.hpp"
#include "rpc/simgen.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

using namespace rpc;

namespace {

SimilarityMatrix from_distances(const std::vector<std::vector<double>> &d) {
  SimilarityMatrix s(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j)
      s(i, j) = static_cast<float>(1.0 - d[i][j]);
  return s;
}

// Naive complete linkage: O(n^3), lowest (a, b) among equal heights, the
// merged group keeps the lower index.
std::vector<std::vector<int>> naive_partitions(const SimilarityMatrix &sim) {
  const std::size_t n = sim.n();
  std::vector<std::vector<int>> groups(n);
  for (std::size_t i = 0; i < n; ++i)
    groups[i] = {static_cast<int>(i)};
  auto dist = [&](const std::vector<int> &a, const std::vector<int> &b) {
    double m = 0.0;
    for (int x : a)
      for (int y : b)
        m = std::max(m, 1.0 - static_cast<double>(sim(static_cast<std::size_t>(x),
                                                      static_cast<std::size_t>(y))));
    return m;
  };
  // partitions[k] = labels for k groups
  std::vector<std::vector<int>> partitions(n + 1);
  auto record = [&] {
    std::vector<int> label(n);
    std::vector<std::pair<int, std::size_t>> order;
    for (std::size_t g = 0; g < groups.size(); ++g)
      if (!groups[g].empty())
        order.push_back({*std::min_element(groups[g].begin(), groups[g].end()), g});
    std::sort(order.begin(), order.end());
    for (std::size_t r = 0; r < order.size(); ++r)
      for (int x : groups[order[r].second])
        label[static_cast<std::size_t>(x)] = static_cast<int>(r);
    partitions[order.size()] = label;
  };
  record();
  for (std::size_t step = 1; step < n; ++step) {
    double best = 2.0;
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        if (groups[a].empty() || groups[b].empty())
          continue;
        const double d = dist(groups[a], groups[b]);
        if (d < best) {
          best = d;
          ba = a;
          bb = b;
        }
      }
    groups[ba].insert(groups[ba].end(), groups[bb].begin(), groups[bb].end());
    groups[bb].clear();
    record();
  }
  return partitions;
}

// Two-group trace: subjects 0-3 share a label, 4-5 share another, with the
// labels permuted every sweep. One item with two levels.
ChainTrace synthetic_trace() {
  ChainTrace t;
  t.n = 6;
  t.p = 1;
  t.S = 1;
  t.K = 3;
  t.levels = {2};
  t.subpops.assign(6, 0);
  const std::size_t m = 8;
  for (std::size_t s = 0; s < m; ++s) {
    t.iterations.push_back(static_cast<std::int64_t>(s));
    const int a = static_cast<int>(s % 3), b = static_cast<int>((s + 1) % 3),
              e = static_cast<int>((s + 2) % 3);
    std::vector<double> pi(3);
    pi[static_cast<std::size_t>(a)] = 0.6;
    pi[static_cast<std::size_t>(b)] = 0.395;
    pi[static_cast<std::size_t>(e)] = 0.005;
    t.pi.insert(t.pi.end(), pi.begin(), pi.end());
    for (int i = 0; i < 6; ++i)
      t.C.push_back(static_cast<std::uint16_t>(i < 4 ? a : b));
    t.lambda.insert(t.lambda.end(), {0.5, 0.3, 0.2});
    t.nu.push_back(0.9);
    t.beta.push_back(0.2);
    t.kernel_snapshots.push_back(static_cast<std::int64_t>(s));
    std::vector<float> bank(6);
    bank[static_cast<std::size_t>(a) * 2] = 0.8f;
    bank[static_cast<std::size_t>(a) * 2 + 1] = 0.2f;
    bank[static_cast<std::size_t>(b) * 2] = 0.3f;
    bank[static_cast<std::size_t>(b) * 2 + 1] = 0.7f;
    bank[static_cast<std::size_t>(e) * 2] = 0.5f;
    bank[static_cast<std::size_t>(e) * 2 + 1] = 0.5f;
    t.theta0.insert(t.theta0.end(), bank.begin(), bank.end());
    t.theta1.insert(t.theta1.end(), bank.begin(), bank.end());
  }
  t.g_mean.assign(6, 0.9);
  return t;
}

} // namespace

TEST_SUITE("postprocess") {

TEST_CASE("similarity counts co-clustering frequency") {
  // 4 sweeps, 3 subjects: (0,1) always together, (0,2) never, (1,2) never;
  // subject 3 joins 0 in 3 of 4 sweeps
  const std::vector<std::uint16_t> C{0, 0, 1, 0, //
                                     2, 2, 0, 2, //
                                     1, 1, 2, 1, //
                                     0, 0, 1, 1};
  auto s = similarity(C, 4);
  CHECK(s(0, 1) == 1.0f);
  CHECK(s(0, 2) == 0.0f);
  CHECK(s(0, 3) == 0.75f);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s(i, i) == 1.0f);
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(s(i, j) == s(j, i));
  }
}

TEST_CASE("similarity depends only on the partition") {
  Rng r = test::test_rng(3);
  const std::size_t n = 20, m = 30, K = 5;
  std::vector<std::uint16_t> C(m * n), relabeled(m * n);
  for (std::size_t s = 0; s < m; ++s) {
    auto perm = random_permutation(K, r);
    for (std::size_t i = 0; i < n; ++i) {
      C[s * n + i] = static_cast<std::uint16_t>(r() % K);
      relabeled[s * n + i] = static_cast<std::uint16_t>(perm[C[s * n + i]]);
    }
  }
  auto a = similarity(C, n), b = similarity(relabeled, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      CHECK(a(i, j) == b(i, j));
}

TEST_CASE("complete linkage on a worked 4-point example") {
  const std::vector<std::vector<double>> d{{0.0, 0.1, 0.5, 0.6},
                                           {0.1, 0.0, 0.4, 0.7},
                                           {0.5, 0.4, 0.0, 0.2},
                                           {0.6, 0.7, 0.2, 0.0}};
  auto tree = complete_linkage_tree(from_distances(d));
  REQUIRE(tree.merges.size() == 3);
  CHECK(tree.merges[0].a == 0);
  CHECK(tree.merges[0].b == 1);
  CHECK(tree.merges[0].height == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(tree.merges[1].a == 2);
  CHECK(tree.merges[1].b == 3);
  CHECK(tree.merges[1].height == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(tree.merges[2].a == 0);
  CHECK(tree.merges[2].b == 2);
  CHECK(tree.merges[2].height == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(tree.cut(2) == std::vector<int>{0, 0, 1, 1});
  CHECK(tree.cut(4) == std::vector<int>{0, 1, 2, 3});
  CHECK(tree.cut(1) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("complete linkage agrees with a naive implementation") {
  Rng r = test::test_rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 12, m = 16;
    std::vector<std::uint16_t> C(m * n);
    for (auto &c : C)
      c = static_cast<std::uint16_t>(r() % 4);
    auto sim = similarity(C, n);
    auto expect = naive_partitions(sim);
    auto tree = complete_linkage_tree(sim);
    for (std::size_t k = 1; k <= n; ++k)
      CHECK(tree.cut(k) == expect[k]);
  }
}

TEST_CASE("block structure and dendrogram nesting") {
  SUBCASE("two perfect blocks") {
    std::vector<std::uint16_t> C{0, 0, 0, 1, 1, 2, 2, 2, 5, 5};
    auto groups = complete_linkage(similarity(C, 5), 2);
    CHECK(groups == std::vector<int>{0, 0, 0, 1, 1});
  }
  SUBCASE("k groups refine k - 1 groups") {
    Rng r = test::test_rng(12);
    const std::size_t n = 40, m = 25;
    std::vector<std::uint16_t> C(m * n);
    for (auto &c : C)
      c = static_cast<std::uint16_t>(r() % 6);
    auto tree = complete_linkage_tree(similarity(C, n));
    for (std::size_t k = 2; k <= n; ++k) {
      auto fine = tree.cut(k), coarse = tree.cut(k - 1);
      CHECK(std::set<int>(fine.begin(), fine.end()).size() == k);
      // every fine group sits inside one coarse group
      std::vector<int> parent(k, -1);
      bool nested = true;
      for (std::size_t i = 0; i < n; ++i) {
        auto &p = parent[static_cast<std::size_t>(fine[i])];
        if (p == -1)
          p = coarse[i];
        nested = nested && p == coarse[i];
      }
      CHECK(nested);
    }
  }
}

TEST_CASE("nonempty counts") {
  const std::vector<double> w{0.5, 0.49, 0.005, 0.005};
  CHECK(nonempty_count(w, 0.01) == 2);
  CHECK(nonempty_count(w, 0.495) == 1);
  auto t = synthetic_trace();
  CHECK(nonempty_count(t, 0.01) == 2);
  CHECK(nonempty_count(t, 0.5) == 1);
}

TEST_CASE("modal responses") {
  auto a = modal_response(std::vector<double>{0.1, 0.1, 0.7, 0.1});
  CHECK(a.level == 2);
  CHECK_FALSE(a.tie);
  auto b = modal_response(std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(b.level == 0);
  CHECK(b.tie);
  auto c = modal_response(std::vector<double>{0.5, 0.5, 0.0, 0.0});
  CHECK(c.level == 0);
  CHECK(c.tie);
  auto d = modal_response(std::vector<double>{0.3, 0.3, 0.4});
  CHECK(d.level == 2);
  CHECK_FALSE(d.tie);
}

TEST_CASE("quantiles and intervals") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  auto iv = interval(x);
  CHECK(iv.median == doctest::Approx(50.5));
  CHECK(iv.lower == doctest::Approx(3.475));
  CHECK(iv.upper == doctest::Approx(97.525));
  std::vector<double> flat(10, 0.3);
  auto f = interval(flat);
  CHECK(f.median == 0.3);
  CHECK(f.lower == f.upper);
  CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.5), std::invalid_argument);
}

TEST_CASE("report from a synthetic trace") {
  auto t = synthetic_trace();
  auto rep = build_report(t);
  CHECK(rep.cut == 2);
  CHECK(rep.K0 == 2);
  CHECK(rep.assignments == std::vector<int>{0, 0, 0, 0, 1, 1});
  REQUIRE(rep.clusters.size() == 2);
  CHECK(rep.clusters[0].weight == doctest::Approx(0.6));
  CHECK(rep.clusters[1].weight == doctest::Approx(0.395));
  CHECK(rep.clusters[0].size == 4);
  CHECK(rep.clusters[0].theta[0] == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(rep.clusters[1].modes[0].level == 1);
  CHECK(rep.modal_patterns() == std::vector<std::vector<int>>{{1}, {2}});
  for (double a : rep.allocation_probabilities)
    CHECK(a == 1.0);

  PostprocessConfig strict;
  strict.size_filter = 0.5;
  auto filtered = build_report(t, strict);
  CHECK(filtered.K0 == 1);
}

TEST_CASE("summaries are constant on a constant trace") {
  auto t = synthetic_trace();
  auto sum = summarize(t);
  CHECK(sum.nu[0].median == 0.9);
  CHECK(sum.nu[0].lower == sum.nu[0].upper);
  CHECK(sum.beta[0].median == 0.2);
  CHECK(sum.pi_ranked[0].median == doctest::Approx(0.6));
  CHECK(sum.pi_ranked[2].median == doctest::Approx(0.005));
}

TEST_CASE("redundancy removal") {
  ClusterReport rep;
  rep.K = 4;
  auto cluster = [](int id, std::vector<int> levels, double w) {
    ClusterSummary c;
    c.id = id;
    c.size = 10;
    c.weight = w;
    c.nonempty = true;
    for (int l : levels)
      c.modes.push_back({l, 0.7, false});
    return c;
  };
  rep.clusters = {cluster(0, {0, 1, 2}, 0.4), cluster(1, {3, 1, 2}, 0.3),
                  cluster(2, {0, 1, 2}, 0.2), cluster(3, {3, 1, 1}, 0.1)};
  rep.assignments = {0, 1, 2, 3, 2};
  rep.K0 = rep.unique_count = 4;

  SUBCASE("identical patterns merge into the lowest index") {
    auto out = remove_redundant(rep);
    CHECK(out.unique_count == 3);
    CHECK(out.K0 == 4);
    CHECK(out.clusters[0].weight == doctest::Approx(0.6));
    CHECK(out.clusters[0].size == 20);
    CHECK(out.assignments == std::vector<int>{0, 1, 0, 2, 0});
  }
  SUBCASE("distinct patterns are unchanged") {
    rep.clusters[2].modes[0].level = 2;
    auto out = remove_redundant(rep);
    CHECK(out.unique_count == 4);
    CHECK(out.assignments == rep.assignments);
  }
  SUBCASE("hamming tolerance") {
    auto out = remove_redundant(rep, 1);
    CHECK(out.unique_count == 2);
  }
  SUBCASE("idempotent") {
    for (int tol : {0, 1, 2}) {
      auto once = remove_redundant(rep, tol);
      auto twice = remove_redundant(once, tol);
      CHECK(twice.unique_count == once.unique_count);
      CHECK(twice.assignments == once.assignments);
      CHECK(twice.clusters.size() == once.clusters.size());
    }
  }
  SUBCASE("empty clusters never merge") {
    rep.clusters[2].nonempty = false;
    auto out = remove_redundant(rep);
    CHECK(out.clusters.size() == 4);
  }
}

TEST_CASE("configuration checks") {
  PostprocessConfig c;
  CHECK_NOTHROW(c.validate());
  c.threshold = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.size_filter = -0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("tables are written") {
  auto t = synthetic_trace();
  auto rep = build_report(t);
  auto sum = summarize(t);
  const auto dir = std::filesystem::temp_directory_path() / "rpc_pp_tables";
  std::filesystem::create_directories(dir);
  write_modal_table(rep, dir / "modal.tsv");
  write_profile_frequencies(rep, t.subpops, 1, dir / "freq.tsv");
  write_nu_table(sum, 0.5, dir / "nu.tsv");
  write_local_table(sum, dir / "local.tsv");
  write_weights_table(sum, dir / "weights.tsv");
  for (auto name : {"modal.tsv", "freq.tsv", "nu.tsv", "local.tsv", "weights.tsv"})
    CHECK(std::filesystem::file_size(dir / name) > 0);
  std::ifstream nu(dir / "nu.tsv");
  std::string header;
  std::getline(nu, header);
  CHECK(header.find('\t') != std::string::npos);
  std::filesystem::remove_all(dir);
}

} // TEST_SUITE
