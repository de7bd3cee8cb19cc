#include "rpc/simgen.hpp"

#include "rpc/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rpc::sim {

namespace {

// Generator streams sit on an iteration slot no chain reaches.
constexpr std::uint64_t kSimSlot = ~std::uint64_t{0};
constexpr std::uint64_t kNuStream = 1;
constexpr std::uint64_t kSubjectStream = 2;

// Rows are items; columns are global profiles 1-3.
std::vector<std::array<int, 3>> build_global_table() {
  std::vector<std::array<int, 3>> t;
  for (int j = 1; j <= 50; ++j) {
    if (j <= 10)
      t.push_back({3, 2, 1});
    else if (j <= 25)
      t.push_back({3, 4, 2});
    else if (j <= 30)
      t.push_back({1, 4, 2});
    else
      t.push_back({1, 4, 3});
  }
  return t;
}

// Eight local profiles cycling through four row patterns.
std::vector<std::array<int, 8>> build_local_table() {
  constexpr std::array<std::array<int, 8>, 4> cycle{{
      {1, 1, 2, 2, 3, 3, 4, 4},
      {1, 2, 2, 4, 3, 1, 4, 3},
      {1, 3, 2, 1, 3, 4, 4, 2},
      {1, 4, 2, 3, 3, 2, 4, 1},
  }};
  std::vector<std::array<int, 8>> t;
  for (int j = 1; j <= 50; ++j)
    t.push_back(cycle[static_cast<std::size_t>((j - 1) % 4)]);
  return t;
}

double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double draw_nu(const NuRule &rule, Rng &rng) {
  switch (rule.kind) {
  case NuRule::Kind::fixed:
    return rule.value;
  case NuRule::Kind::beta21:
    return draw_beta(rng, 2.0, 1.0);
  case NuRule::Kind::uniform:
    return uniform01(rng);
  case NuRule::Kind::probit:
    return std_normal_cdf(draw_normal(rng, 0.0, 1.0));
  case NuRule::Kind::cauchy:
    return clamp_nu(std::tan(std::numbers::pi * (uniform01(rng) - 0.5)));
  }
  throw std::logic_error("unknown nu rule");
}

std::vector<int> column(const auto &table, std::size_t c) {
  std::vector<int> out;
  out.reserve(table.size());
  for (const auto &row : table)
    out.push_back(row[c]);
  return out;
}

std::vector<std::vector<int>> global_profiles(int count) {
  std::vector<std::vector<int>> out;
  for (int g = 0; g < count; ++g)
    out.push_back(column(global_mode_table(), static_cast<std::size_t>(g)));
  return out;
}

void add_global_cells(SimSpec &spec, int s, int cell,
                      std::vector<int> locals = {},
                      std::optional<double> nu = std::nullopt) {
  for (int g = 0; g < 3; ++g)
    spec.cells.push_back({s, cell, g, locals, nu});
}

SubpopDesign all_items(std::size_t p, NuRule rule) {
  SubpopDesign d;
  d.nu = rule;
  d.deviable.assign(p, true);
  return d;
}

SubpopDesign no_deviation(std::size_t p) {
  SubpopDesign d;
  d.deviable.assign(p, false);
  return d;
}

void case_global(SimSpec &spec, int cell) {
  spec.global_modes = global_profiles(3);
  for (int s = 0; s < 4; ++s) {
    spec.subpops.push_back(no_deviation(spec.p));
    add_global_cells(spec, s, cell);
  }
}

void case_local(SimSpec &spec, int cell) {
  for (int s = 0; s < 8; ++s) {
    auto d = all_items(spec.p, {NuRule::Kind::fixed, 0.0});
    d.local_modes.push_back(
        column(local_mode_table(), static_cast<std::size_t>(s)));
    spec.subpops.push_back(std::move(d));
    spec.cells.push_back({s, cell, -1, {0}, std::nullopt});
  }
}

void case_mixed(SimSpec &spec, int cell, const std::array<NuRule, 4> &rules) {
  spec.global_modes = global_profiles(3);
  for (int s = 0; s < 4; ++s) {
    auto d = all_items(spec.p, rules[static_cast<std::size_t>(s)]);
    for (int l = 0; l < 2; ++l)
      d.local_modes.push_back(column(local_mode_table(),
                                     static_cast<std::size_t>(2 * s + l)));
    spec.subpops.push_back(std::move(d));
    add_global_cells(spec, s, cell, {0, 1});
  }
}

void case_null(SimSpec &spec, int cell) {
  for (int s = 0; s < 4; ++s) {
    spec.subpops.push_back(no_deviation(spec.p));
    for (int c = 0; c < 3; ++c)
      spec.cells.push_back({s, cell, -1, {}, std::nullopt});
  }
}

// Local profiles for one subpopulation of the mock design; deviable items
// are those with a listed mode.
SubpopDesign mock_subpop(std::size_t p, std::initializer_list<int> cols,
                         NuRule rule) {
  SubpopDesign d;
  d.nu = rule;
  d.deviable.assign(p, false);
  for (int c : cols) {
    auto modes = column(mock_local_mode_table(), static_cast<std::size_t>(c));
    for (std::size_t j = 0; j < p; ++j)
      if (modes[j] != 0)
        d.deviable[j] = true;
    d.local_modes.push_back(std::move(modes));
  }
  return d;
}

void case_mock(SimSpec &spec, int cell) {
  using K = NuRule::Kind;
  spec.global_modes = global_profiles(3);
  const std::size_t p = spec.p;
  // Subpopulations 1-3: fixed nu on listed items.
  const double nu13[3] = {0.75, 0.50, 0.25};
  for (int s = 0; s < 3; ++s) {
    spec.subpops.push_back(
        mock_subpop(p, {2 * s, 2 * s + 1}, {K::fixed, nu13[s]}));
    add_global_cells(spec, s, cell, {0, 1});
  }
  // Subpopulations 4-6: global only.
  for (int s = 3; s < 6; ++s) {
    spec.subpops.push_back(no_deviation(p));
    add_global_cells(spec, s, cell);
  }
  // Subpopulation 7: local only, two profiles.
  spec.subpops.push_back(mock_subpop(p, {6, 7}, {K::fixed, 0.0}));
  spec.cells.push_back({6, 3 * cell, -1, {0, 1}, std::nullopt});
  // Subpopulation 8: profile 1 local on listed items, profiles 2-3 mixed.
  spec.subpops.push_back(mock_subpop(p, {8, 9}, {K::fixed, 0.9}));
  spec.cells.push_back({7, cell, 0, {0, 1}, 0.0});
  spec.cells.push_back({7, cell, 1, {0, 1}, std::nullopt});
  spec.cells.push_back({7, cell, 2, {0, 1}, std::nullopt});
  // Subpopulation 9: mostly local on listed items.
  spec.subpops.push_back(mock_subpop(p, {10, 11}, {K::fixed, 0.1}));
  add_global_cells(spec, 8, cell, {0, 1});
  // Subpopulation 10: one global group and one local-only group.
  spec.subpops.push_back(mock_subpop(p, {12}, {K::fixed, 0.0}));
  spec.cells.push_back({9, cell, 0, {}, 1.0});
  spec.cells.push_back({9, 3 * cell, -1, {0}, 0.0});
}

void case_continuous(SimSpec &spec, int cell, char variant) {
  spec.family = Family::gaussian;
  spec.p = 30;
  switch (variant) {
  case 'a':
    spec.sigma = 0.1;
    break;
  case 'b':
    spec.sigma = 1.0;
    break;
  case 'c':
    spec.sigma = 3.0;
    break;
  default:
    throw std::invalid_argument(std::string("case 7 variant must be a, b or c, got ") +
                                variant);
  }
  spec.global_means = {std::vector<double>(spec.p, -9.0),
                       std::vector<double>(spec.p, 2.0)};
  const std::array<std::array<int, 6>, 2> local_items{
      {{6, 7, 16, 17, 26, 27}, {5, 8, 15, 18, 25, 28}}};
  const std::array<std::array<double, 2>, 2> local_means{
      {{5.0, 9.0}, {-5.0, -2.0}}};
  for (std::size_t s = 0; s < 2; ++s) {
    SubpopDesign d;
    d.nu = {NuRule::Kind::fixed, 0.0};
    d.deviable.assign(spec.p, false);
    for (int j : local_items[s])
      d.deviable[static_cast<std::size_t>(j - 1)] = true;
    for (double m : local_means[s])
      d.local_means.push_back(std::vector<double>(spec.p, m));
    spec.subpops.push_back(std::move(d));
    for (int g = 0; g < 2; ++g)
      spec.cells.push_back({static_cast<int>(s), cell, g, {0, 1}, std::nullopt});
  }
}

} // namespace

const std::vector<std::array<int, 3>> &global_mode_table() {
  static const auto t = build_global_table();
  return t;
}

const std::vector<std::array<int, 8>> &local_mode_table() {
  static const auto t = [] {
    auto t = build_local_table();
    t[49] = {1, 1, 2, 2, 3, 3, 4, 4};
    return t;
  }();
  return t;
}

// Columns: subpop 1 (x2), 2 (x2), 3 (x2), 7 (x2), 8 (x2), 9 (x2), 10 (x1).
// 0 marks an item that does not deviate.
const std::vector<std::array<int, 13>> &mock_local_mode_table() {
  static const std::vector<std::array<int, 13>> t{
      {2, 2, 3, 2, 0, 0, 4, 2, 0, 0, 2, 2, 4}, {1, 4, 1, 4, 2, 2, 1, 4, 0, 0, 3, 1, 4},
      {0, 0, 0, 0, 4, 3, 1, 3, 1, 2, 0, 0, 3}, {3, 3, 3, 1, 0, 0, 2, 1, 0, 0, 1, 1, 3},
      {0, 0, 0, 0, 1, 3, 4, 2, 0, 0, 4, 2, 4}, {0, 0, 2, 2, 3, 2, 3, 4, 0, 0, 2, 1, 2},
      {0, 0, 0, 0, 0, 0, 3, 3, 0, 0, 3, 1, 3}, {0, 0, 3, 2, 2, 1, 3, 4, 0, 0, 2, 1, 2},
      {0, 0, 3, 3, 1, 1, 1, 1, 2, 3, 1, 4, 2}, {0, 0, 4, 2, 4, 4, 1, 1, 0, 0, 3, 4, 2},
      {0, 0, 2, 2, 0, 0, 4, 4, 0, 0, 2, 3, 3}, {0, 0, 4, 4, 4, 3, 4, 3, 0, 0, 1, 4, 3},
      {0, 0, 2, 1, 4, 1, 4, 2, 0, 0, 2, 1, 4}, {0, 0, 3, 2, 3, 3, 1, 1, 2, 4, 2, 3, 4},
      {0, 0, 3, 1, 4, 3, 4, 3, 0, 0, 3, 2, 3}, {0, 0, 1, 1, 1, 3, 2, 3, 0, 0, 2, 2, 2},
      {0, 0, 1, 1, 2, 2, 3, 4, 0, 0, 1, 3, 3}, {0, 0, 4, 3, 4, 1, 1, 1, 0, 0, 1, 4, 2},
      {2, 4, 4, 3, 0, 0, 4, 4, 0, 0, 4, 1, 4}, {0, 0, 4, 1, 1, 1, 3, 3, 0, 0, 0, 0, 2},
      {0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 3, 1, 2}, {3, 4, 0, 0, 4, 4, 4, 3, 0, 0, 3, 3, 2},
      {1, 4, 2, 4, 1, 3, 3, 1, 0, 0, 3, 3, 2}, {0, 0, 3, 1, 2, 3, 4, 2, 0, 0, 4, 4, 3},
      {2, 2, 0, 0, 1, 2, 3, 3, 0, 0, 4, 4, 3}, {0, 0, 3, 4, 2, 1, 3, 1, 0, 0, 3, 3, 4},
      {0, 0, 0, 0, 1, 4, 2, 4, 0, 0, 3, 3, 2}, {0, 0, 0, 0, 3, 3, 2, 3, 0, 0, 4, 1, 3},
      {0, 0, 3, 4, 3, 4, 4, 1, 0, 0, 2, 2, 3}, {0, 0, 4, 3, 4, 1, 1, 1, 0, 0, 2, 4, 2},
      {0, 0, 0, 0, 4, 4, 4, 1, 2, 1, 0, 0, 4}, {0, 0, 0, 0, 4, 1, 1, 2, 2, 2, 2, 3, 1},
      {0, 0, 2, 2, 3, 2, 2, 1, 0, 0, 4, 2, 4}, {0, 0, 0, 0, 4, 1, 4, 1, 0, 0, 1, 1, 1},
      {4, 4, 0, 0, 2, 1, 1, 1, 4, 4, 2, 4, 4}, {0, 0, 1, 2, 3, 2, 2, 1, 0, 0, 1, 2, 4},
      {0, 0, 1, 1, 1, 2, 1, 2, 0, 0, 3, 4, 2}, {0, 0, 4, 4, 0, 0, 2, 2, 0, 0, 4, 2, 2},
      {0, 0, 2, 1, 1, 4, 4, 2, 0, 0, 1, 2, 2}, {0, 0, 0, 0, 2, 1, 2, 3, 0, 0, 4, 2, 4},
      {0, 0, 2, 4, 2, 4, 3, 3, 0, 0, 3, 1, 1}, {0, 0, 0, 0, 3, 2, 3, 1, 0, 0, 4, 1, 3},
      {1, 2, 4, 2, 3, 1, 4, 2, 0, 0, 3, 1, 3}, {0, 0, 0, 0, 1, 4, 3, 3, 0, 0, 3, 1, 1},
      {0, 0, 3, 4, 0, 0, 4, 4, 0, 0, 0, 0, 4}, {0, 0, 2, 2, 3, 4, 3, 1, 0, 0, 1, 2, 2},
      {0, 0, 0, 0, 1, 3, 3, 4, 0, 0, 3, 2, 2}, {0, 0, 0, 0, 4, 1, 3, 4, 0, 0, 2, 4, 2},
      {1, 3, 0, 0, 1, 1, 3, 2, 0, 0, 3, 1, 3}, {2, 3, 1, 4, 4, 4, 1, 3, 0, 0, 0, 0, 4},  };
  return t;
}

double clamp_nu(double x) {
  if (std::isnan(x))
    throw std::invalid_argument("nu draw is NaN");
  return std::clamp(x, 0.0, 1.0);
}

std::vector<double> theta_from_mode(int mode, int d) {
  if (d != 4)
    throw std::invalid_argument("mode kernels are defined for d = 4 only");
  if (mode < 1 || mode > d)
    throw std::invalid_argument("mode out of range: " + std::to_string(mode));
  std::vector<double> theta(static_cast<std::size_t>(d), 0.1);
  theta[static_cast<std::size_t>(mode - 1)] = 0.7;
  return theta;
}

SimSpec SimSpec::for_case(int case_id, char variant, int cell_size,
                          std::uint64_t seed) {
  if (cell_size < 0)
    throw std::invalid_argument("cell size must be non-negative");
  SimSpec spec;
  spec.case_id = case_id;
  spec.variant = variant;
  spec.seed = seed;
  const int cell = cell_size > 0 ? cell_size : (case_id == 7 ? 750 : 400);
  using K = NuRule::Kind;
  switch (case_id) {
  case 1:
    case_global(spec, cell);
    break;
  case 2:
    case_local(spec, cell);
    break;
  case 3:
    case_mixed(spec, cell,
               {{{K::fixed, 0.25}, {K::fixed, 0.5}, {K::fixed, 0.75},
                 {K::fixed, 1.0}}});
    break;
  case 4:
    case_null(spec, cell);
    break;
  case 5:
    case_mock(spec, cell);
    break;
  case 6:
    case_mixed(spec, cell,
               {{{K::beta21, 0}, {K::uniform, 0}, {K::probit, 0},
                 {K::cauchy, 0}}});
    break;
  case 7:
    case_continuous(spec, cell, variant);
    break;
  default:
    throw std::invalid_argument("unknown simulation case " +
                                std::to_string(case_id));
  }
  spec.validate();
  return spec;
}

std::size_t SimSpec::n() const {
  std::size_t n = 0;
  for (const auto &c : cells)
    n += static_cast<std::size_t>(c.count);
  return n;
}

void SimSpec::validate() const {
  if (p == 0)
    throw std::invalid_argument("simulation needs at least one item");
  if (subpops.empty() || cells.empty())
    throw std::invalid_argument("simulation needs subpopulations and cells");
  const bool cat = family == Family::categorical;
  if (cat && d != 4)
    throw std::invalid_argument("categorical simulation requires d = 4");
  if (!cat && !(sigma > 0.0))
    throw std::invalid_argument("sigma must be positive");
  const auto check_modes = [&](const std::vector<int> &modes, bool allow_zero) {
    if (modes.size() != p)
      throw std::invalid_argument("mode profile length differs from p");
    for (int m : modes)
      if (m < (allow_zero ? 0 : 1) || m > d)
        throw std::invalid_argument("mode out of range");
  };
  const auto check_means = [&](const std::vector<double> &m) {
    if (m.size() != p)
      throw std::invalid_argument("mean profile length differs from p");
  };
  for (const auto &g : global_modes)
    check_modes(g, false);
  for (const auto &g : global_means)
    check_means(g);
  const std::size_t n_global = cat ? global_modes.size() : global_means.size();
  for (const auto &sp : subpops) {
    if (sp.deviable.size() != p)
      throw std::invalid_argument("deviable mask length differs from p");
    for (const auto &l : sp.local_modes)
      check_modes(l, true);
    for (const auto &l : sp.local_means)
      check_means(l);
  }
  std::vector<bool> seen(subpops.size(), false);
  for (const auto &c : cells) {
    if (c.subpop < 0 || static_cast<std::size_t>(c.subpop) >= subpops.size())
      throw std::invalid_argument("cell subpopulation out of range");
    if (c.count <= 0)
      throw std::invalid_argument("cell count must be positive");
    if (c.global_profile >= static_cast<int>(n_global) || c.global_profile < -1)
      throw std::invalid_argument("cell global profile out of range");
    if (c.nu && (*c.nu < 0.0 || *c.nu > 1.0))
      throw std::invalid_argument("cell nu outside [0, 1]");
    const auto &sp = subpops[static_cast<std::size_t>(c.subpop)];
    const std::size_t n_local =
        cat ? sp.local_modes.size() : sp.local_means.size();
    for (int l : c.local_profiles)
      if (l < 0 || static_cast<std::size_t>(l) >= n_local)
        throw std::invalid_argument("cell local profile out of range");
    seen[static_cast<std::size_t>(c.subpop)] = true;
  }
  for (bool s : seen)
    if (!s)
      throw std::invalid_argument("subpopulation without subjects");
}

Simulated generate(const SimSpec &spec) {
  spec.validate();
  const std::size_t p = spec.p;
  const std::size_t S = spec.subpops.size();
  const std::size_t n = spec.n();
  const bool cat = spec.family == Family::categorical;
  const auto d = static_cast<std::size_t>(spec.d);

  // Per-subpopulation nu for deviable items; the rest stay at 1.
  Rng nu_rng = substream(spec.seed, kSimSlot, kNuStream);
  std::vector<double> rule_nu(S * p, 1.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t j = 0; j < p; ++j)
      if (spec.subpops[s].deviable[j])
        rule_nu[s * p + j] = draw_nu(spec.subpops[s].nu, nu_rng);

  GroundTruth truth;
  truth.C.assign(n, -1);
  truth.G.assign(n * p, 1);
  truth.L.assign(n * p, -1);
  truth.nu.assign(S * p, 0.0);

  const auto flatten = [&](const std::vector<int> &modes) {
    std::vector<double> out;
    out.reserve(p * d);
    for (int m : modes) {
      if (m == 0)
        out.insert(out.end(), d, 1.0 / static_cast<double>(d));
      else {
        auto th = theta_from_mode(m, spec.d);
        out.insert(out.end(), th.begin(), th.end());
      }
    }
    return out;
  };
  if (cat) {
    for (const auto &g : spec.global_modes)
      truth.global_kernels.push_back(flatten(g));
  } else {
    truth.global_kernels = spec.global_means;
  }
  truth.local_kernels.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    if (cat)
      for (const auto &l : spec.subpops[s].local_modes)
        truth.local_kernels[s].push_back(flatten(l));
    else
      truth.local_kernels[s] = spec.subpops[s].local_means;
  }

  std::vector<int> codes(cat ? n * p : 0);
  std::vector<double> values(cat ? 0 : n * p);
  std::vector<int> subpop(n);
  std::vector<std::size_t> sizes(S, 0);

  Rng rng = substream(spec.seed, kSimSlot, kSubjectStream);
  const auto draw_level = [&](const std::vector<double> &kernel,
                              std::size_t j) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t r = 0; r + 1 < d; ++r) {
      acc += kernel[j * d + r];
      if (u < acc)
        return static_cast<int>(r);
    }
    return static_cast<int>(d - 1);
  };

  std::size_t i = 0;
  for (const auto &cell : spec.cells) {
    const auto s = static_cast<std::size_t>(cell.subpop);
    const auto &sp = spec.subpops[s];
    for (int k = 0; k < cell.count; ++k, ++i) {
      subpop[i] = cell.subpop;
      truth.C[i] = cell.global_profile;
      ++sizes[s];
      const int local =
          cell.local_profiles.empty()
              ? -1
              : cell.local_profiles[static_cast<std::size_t>(k) %
                                    cell.local_profiles.size()];
      for (std::size_t j = 0; j < p; ++j) {
        double nu = 1.0;
        if (sp.deviable[j])
          nu = cell.nu ? *cell.nu : rule_nu[s * p + j];
        truth.nu[s * p + j] += nu;
        const bool global = local < 0 || draw_bernoulli(rng, nu);
        truth.G[i * p + j] = global ? 1 : 0;
        if (!global)
          truth.L[i * p + j] = local;
        if (cat) {
          int y;
          if (global && cell.global_profile < 0)
            y = static_cast<int>(uniform01(rng) * static_cast<double>(d));
          else if (global)
            y = draw_level(
                truth.global_kernels[static_cast<std::size_t>(cell.global_profile)],
                j);
          else
            y = draw_level(truth.local_kernels[s][static_cast<std::size_t>(local)],
                           j);
          codes[i * p + j] = std::min(y, static_cast<int>(d) - 1);
        } else {
          double mean;
          if (global && cell.global_profile < 0)
            throw std::invalid_argument(
                "gaussian cells need a global profile for global items");
          mean = global ? spec.global_means[static_cast<std::size_t>(
                              cell.global_profile)][j]
                        : sp.local_means[static_cast<std::size_t>(local)][j];
          values[i * p + j] = draw_normal(rng, mean, spec.sigma);
        }
      }
    }
  }

  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t j = 0; j < p; ++j)
      truth.nu[s * p + j] /= static_cast<double>(sizes[s]);
  truth.always_global.assign(p, true);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t j = 0; j < p; ++j)
      if (truth.nu[s * p + j] < 1.0)
        truth.always_global[j] = false;

  Simulated out;
  out.data = cat ? Dataset::categorical(n, p, std::move(codes), std::move(subpop),
                                        std::vector<int>(p, spec.d))
                 : Dataset::gaussian(n, p, std::move(values), std::move(subpop));
  out.truth = std::move(truth);
  return out;
}

} // namespace rpc::sim
