#include "rpc/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rpc {

namespace {

std::ofstream open_table(const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string());
  out << std::setprecision(10);
  return out;
}

double median_of(std::vector<double> &v) {
  std::sort(v.begin(), v.end());
  return quantile(v, 0.5);
}

// Kernel block of one cluster: categorical probabilities, or per-item means.
std::size_t cluster_width(const ChainTrace &t) {
  if (t.family == Family::categorical)
    return t.K == 0 ? 0 : t.kernel_block() / t.K;
  return t.p;
}

// Element e of cluster h inside a bank starting at `bank`.
double bank_value(const ChainTrace &t, const float *bank, std::size_t h,
                  std::size_t e) {
  return static_cast<double>(bank[h * cluster_width(t) + e]);
}

std::vector<ModalResponse> modes_of(const ChainTrace &t,
                                    std::span<const double> theta) {
  std::vector<ModalResponse> out;
  if (t.family != Family::categorical)
    return out;
  const auto off = t.level_offsets();
  for (std::size_t j = 0; j < t.p; ++j)
    out.push_back(modal_response(theta.subspan(
        off[j], static_cast<std::size_t>(t.levels[j]))));
  return out;
}

} // namespace

SimilarityMatrix similarity(std::span<const std::uint16_t> C, std::size_t n) {
  if (n == 0 || C.empty() || C.size() % n != 0)
    throw std::invalid_argument("similarity needs a nonempty label history");
  const std::size_t m = C.size() / n;
  // Subject-major copy so each pair compares two contiguous histories.
  std::vector<std::uint16_t> hist(n * m);
  for (std::size_t t = 0; t < m; ++t)
    for (std::size_t i = 0; i < n; ++i)
      hist[i * m + t] = C[t * n + i];

  SimilarityMatrix sim(n);
  const float inv = 1.0f / static_cast<float>(m);
  for (std::size_t i = 0; i < n; ++i) {
    sim(i, i) = 1.0f;
    const std::uint16_t *a = hist.data() + i * m;
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::uint16_t *b = hist.data() + j * m;
      std::uint32_t same = 0;
      for (std::size_t t = 0; t < m; ++t)
        same += a[t] == b[t];
      const float v = same == m ? 1.0f : static_cast<float>(same) * inv;
      sim(i, j) = v;
      sim(j, i) = v;
    }
  }
  return sim;
}

SimilarityMatrix similarity(const ChainTrace &trace) {
  if (trace.snapshots() == 0)
    throw std::invalid_argument("similarity of an empty trace");
  return similarity(trace.C, trace.n);
}

Dendrogram complete_linkage_tree(SimilarityMatrix sim) {
  const std::size_t n = sim.n();
  Dendrogram tree;
  tree.n = n;
  if (n == 0)
    throw std::invalid_argument("complete linkage of an empty matrix");
  // Distances live in the similarity buffer as 1 - s.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      sim(i, j) = 1.0f - sim(i, j);
  auto &d = sim;

  std::vector<char> active(n, 1);
  std::vector<std::size_t> nn(n, 0);
  std::vector<float> nnd(n, std::numeric_limits<float>::infinity());
  const auto refresh = [&](std::size_t i) {
    nnd[i] = std::numeric_limits<float>::infinity();
    nn[i] = i;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && active[j] && d(i, j) < nnd[i]) {
        nnd[i] = d(i, j);
        nn[i] = j;
      }
  };
  for (std::size_t i = 0; i < n; ++i)
    refresh(i);

  tree.merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = n;
    for (std::size_t i = 0; i < n; ++i)
      if (active[i] && (a == n || nnd[i] < nnd[a]))
        a = i;
    const std::size_t b = nn[a];
    tree.merges.push_back(
        {static_cast<int>(a), static_cast<int>(b), static_cast<double>(nnd[a])});
    active[b] = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const float v = std::max(d(a, k), d(b, k));
      d(a, k) = v;
      d(k, a) = v;
    }
    refresh(a);
    for (std::size_t k = 0; k < n; ++k)
      if (active[k] && k != a && (nn[k] == a || nn[k] == b))
        refresh(k);
  }
  return tree;
}

std::vector<int> Dendrogram::cut(std::size_t k) const {
  if (k < 1 || k > n)
    throw std::invalid_argument("cut size must lie in 1..n");
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x)
      x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t s = 0; s < n - k; ++s) {
    const auto ra = find(static_cast<std::size_t>(merges[s].a));
    const auto rb = find(static_cast<std::size_t>(merges[s].b));
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> label(n, -1), out(n);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    if (label[r] < 0)
      label[r] = next++;
    out[i] = label[r];
  }
  return out;
}

std::vector<int> complete_linkage(const SimilarityMatrix &sim, std::size_t k) {
  if (k < 1 || k > sim.n())
    throw std::invalid_argument("complete linkage target must lie in 1..n");
  return complete_linkage_tree(sim).cut(k);
}

std::size_t nonempty_count(std::span<const double> weights, double threshold) {
  return static_cast<std::size_t>(std::count_if(
      weights.begin(), weights.end(), [&](double w) { return w > threshold; }));
}

std::size_t nonempty_count(const ChainTrace &trace, double threshold) {
  const std::size_t m = trace.snapshots();
  if (m == 0)
    throw std::invalid_argument("nonempty count of an empty trace");
  std::vector<double> counts(m);
  for (std::size_t t = 0; t < m; ++t)
    counts[t] = static_cast<double>(nonempty_count(trace.pi_at(t), threshold));
  return static_cast<std::size_t>(std::lround(median_of(counts)));
}

ModalResponse modal_response(std::span<const double> probs) {
  if (probs.empty())
    throw std::invalid_argument("modal response of an empty kernel");
  ModalResponse r;
  r.probability = probs[0];
  for (std::size_t l = 1; l < probs.size(); ++l) {
    if (probs[l] > r.probability) {
      r.level = static_cast<int>(l);
      r.probability = probs[l];
      r.tie = false;
    } else if (probs[l] == r.probability) {
      r.tie = true;
    }
  }
  return r;
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty())
    throw std::invalid_argument("quantile of an empty sample");
  if (q < 0.0 || q > 1.0)
    throw std::invalid_argument("quantile level outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval interval(std::vector<double> &samples, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("interval level must lie in (0, 1)");
  std::sort(samples.begin(), samples.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile(samples, 0.5), quantile(samples, tail),
          quantile(samples, 1.0 - tail)};
}

void PostprocessConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("threshold must lie in (0, 1)");
  if (size_filter < 0.0 || size_filter >= 1.0)
    throw std::invalid_argument("size filter must lie in [0, 1)");
  if (redundancy_tolerance < 0)
    throw std::invalid_argument("redundancy tolerance must be non-negative");
  if (!(deviation_threshold > 0.0 && deviation_threshold < 1.0))
    throw std::invalid_argument("deviation threshold must lie in (0, 1)");
}

PosteriorSummary summarize(const ChainTrace &t, const PostprocessConfig &config) {
  config.validate();
  const std::size_t m = t.snapshots();
  if (m == 0)
    throw std::invalid_argument("summary of an empty trace");
  const std::size_t S = t.S, p = t.p, K = t.K;
  PosteriorSummary out;
  out.S = S;
  out.p = p;
  out.K = K;
  std::vector<double> buf(m);

  if (t.kind == ModelKind::rpc) {
    for (std::size_t e = 0; e < S * p; ++e) {
      for (std::size_t s = 0; s < m; ++s)
        buf[s] = t.nu[s * S * p + e];
      out.nu.push_back(interval(buf));
    }
    for (std::size_t e = 0; e < S; ++e) {
      for (std::size_t s = 0; s < m; ++s)
        buf[s] = t.beta[s * S + e];
      out.beta.push_back(interval(buf));
    }
  }

  // Per-sweep descending order of the weights.
  const auto ranked = [&](const std::vector<double> &w, std::size_t stride,
                          std::size_t offset) {
    std::vector<double> r(m * K);
    for (std::size_t s = 0; s < m; ++s) {
      const double *src = w.data() + s * stride + offset;
      std::copy(src, src + K, r.begin() + static_cast<std::ptrdiff_t>(s * K));
      std::sort(r.begin() + static_cast<std::ptrdiff_t>(s * K),
                r.begin() + static_cast<std::ptrdiff_t>((s + 1) * K),
                std::greater<>());
    }
    std::vector<Interval> iv;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t s = 0; s < m; ++s)
        buf[s] = r[s * K + k];
      iv.push_back(interval(buf));
    }
    return iv;
  };
  out.pi_ranked = ranked(t.pi, K, 0);
  if (t.kind != ModelKind::rpc)
    return out;
  for (std::size_t s = 0; s < S; ++s) {
    auto iv = ranked(t.lambda, S * K, s * K);
    out.lambda_ranked.insert(out.lambda_ranked.end(), iv.begin(), iv.end());
  }

  const std::size_t width = cluster_width(t);
  const std::size_t block = t.kernel_block();
  const std::size_t nk = t.kernel_snapshots.size();
  out.local.resize(S);
  if (nk == 0)
    return out;
  std::vector<int> order(K);
  for (std::size_t s = 0; s < S; ++s) {
    std::size_t R = config.local_profiles;
    if (R == 0)
      for (std::size_t k = 0; k < K; ++k)
        R += out.lambda_ranked[s * K + k].median > config.threshold;
    R = std::min(std::max<std::size_t>(R, 1), K);
    // samples[r][e][k]: element e of the rank-r cluster in kernel snapshot k.
    std::vector<double> samples(R * width * nk);
    for (std::size_t k = 0; k < nk; ++k) {
      const auto snap = static_cast<std::size_t>(t.kernel_snapshots[k]);
      const double *lam = t.lambda.data() + snap * S * K + s * K;
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return lam[a] > lam[b]; });
      const float *bank = t.theta1.data() + k * S * block + s * block;
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t e = 0; e < width; ++e)
          samples[(r * width + e) * nk + k] =
              bank_value(t, bank, static_cast<std::size_t>(order[r]), e);
    }
    for (std::size_t r = 0; r < R; ++r) {
      LocalProfile lp;
      lp.rank = r;
      lp.weight = out.lambda_ranked[s * K + r].median;
      lp.theta.resize(width);
      std::vector<double> kb(nk);
      for (std::size_t e = 0; e < width; ++e) {
        std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>((r * width + e) * nk),
                    nk, kb.begin());
        lp.theta[e] = median_of(kb);
      }
      lp.modes = modes_of(t, lp.theta);
      out.local[s].push_back(std::move(lp));
    }
  }
  return out;
}

std::vector<std::vector<int>> ClusterReport::modal_patterns() const {
  std::vector<std::vector<int>> out;
  for (const auto &c : clusters) {
    if (!c.nonempty)
      continue;
    std::vector<int> row;
    for (const auto &m : c.modes)
      row.push_back(m.level + 1);
    out.push_back(std::move(row));
  }
  return out;
}

ClusterReport build_report(const ChainTrace &t, const Dendrogram &tree,
                           const PostprocessConfig &config) {
  config.validate();
  const std::size_t m = t.snapshots();
  if (m == 0)
    throw std::invalid_argument("report of an empty trace");
  if (tree.n != t.n)
    throw std::invalid_argument("dendrogram size differs from trace");
  const std::size_t n = t.n, K = t.K;

  ClusterReport rep;
  rep.family = t.family;
  rep.K = K;
  rep.cut = std::clamp<std::size_t>(nonempty_count(t, config.threshold), 1, n);
  rep.assignments = tree.cut(rep.cut);
  const std::size_t G = rep.cut;

  // Modal sampler label of each group in each sweep.
  std::vector<int> label(m * G);
  std::vector<std::size_t> counts(G * K);
  for (std::size_t s = 0; s < m; ++s) {
    std::fill(counts.begin(), counts.end(), 0);
    const auto C = t.C_at(s);
    for (std::size_t i = 0; i < n; ++i)
      ++counts[static_cast<std::size_t>(rep.assignments[i]) * K + C[i]];
    for (std::size_t g = 0; g < G; ++g) {
      const auto *row = counts.data() + g * K;
      label[s * G + g] =
          static_cast<int>(std::max_element(row, row + K) - row);
    }
  }

  rep.allocation_probabilities.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = static_cast<std::size_t>(rep.assignments[i]);
    std::size_t hit = 0;
    for (std::size_t s = 0; s < m; ++s)
      hit += t.C[s * n + i] == label[s * G + g];
    rep.allocation_probabilities[i] =
        static_cast<double>(hit) / static_cast<double>(m);
  }

  const std::size_t width = cluster_width(t);
  const std::size_t nk = t.kernel_snapshots.size();
  std::vector<double> buf(m), kb(nk);
  rep.clusters.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    auto &c = rep.clusters[g];
    c.id = static_cast<int>(g);
    c.size = static_cast<std::size_t>(
        std::count(rep.assignments.begin(), rep.assignments.end(),
                   static_cast<int>(g)));
    for (std::size_t s = 0; s < m; ++s)
      buf[s] = t.pi[s * K + static_cast<std::size_t>(label[s * G + g])];
    c.weight = median_of(buf);
    if (nk > 0) {
      c.theta.resize(width);
      for (std::size_t e = 0; e < width; ++e) {
        for (std::size_t k = 0; k < nk; ++k) {
          const auto snap = static_cast<std::size_t>(t.kernel_snapshots[k]);
          const float *bank = t.theta0.data() + k * t.kernel_block();
          kb[k] = bank_value(t, bank,
                             static_cast<std::size_t>(label[snap * G + g]), e);
        }
        c.theta[e] = median_of(kb);
      }
      c.modes = modes_of(t, c.theta);
    }
    c.nonempty = c.weight > config.threshold &&
                 static_cast<double>(c.size) >=
                     config.size_filter * static_cast<double>(n);
  }
  rep.K0 = static_cast<std::size_t>(
      std::count_if(rep.clusters.begin(), rep.clusters.end(),
                    [](const ClusterSummary &c) { return c.nonempty; }));
  rep.unique_count = rep.K0;
  return rep;
}

ClusterReport build_report(const ChainTrace &trace,
                           const PostprocessConfig &config) {
  return build_report(trace, complete_linkage_tree(similarity(trace)), config);
}

ClusterReport remove_redundant(ClusterReport rep, int tolerance) {
  if (tolerance < 0)
    throw std::invalid_argument("redundancy tolerance must be non-negative");
  if (rep.family != Family::categorical)
    return rep;
  const auto hamming = [](const ClusterSummary &a, const ClusterSummary &b) {
    int d = 0;
    for (std::size_t j = 0; j < a.modes.size(); ++j)
      d += a.modes[j].level != b.modes[j].level;
    return d;
  };
  const std::size_t G = rep.clusters.size();
  std::vector<int> target(G);
  std::iota(target.begin(), target.end(), 0);
  for (std::size_t j = 0; j < G; ++j) {
    auto &cj = rep.clusters[j];
    if (!cj.nonempty || cj.modes.empty())
      continue;
    for (std::size_t i = 0; i < j; ++i) {
      auto &ci = rep.clusters[i];
      if (target[i] != static_cast<int>(i) || !ci.nonempty ||
          ci.modes.size() != cj.modes.size() || hamming(ci, cj) > tolerance)
        continue;
      ci.weight += cj.weight;
      ci.size += cj.size;
      target[j] = static_cast<int>(i);
      break;
    }
  }
  std::vector<int> index(G, -1);
  std::vector<ClusterSummary> kept;
  for (std::size_t g = 0; g < G; ++g)
    if (target[g] == static_cast<int>(g)) {
      index[g] = static_cast<int>(kept.size());
      kept.push_back(std::move(rep.clusters[g]));
    }
  for (auto &a : rep.assignments)
    a = index[static_cast<std::size_t>(target[static_cast<std::size_t>(a)])];
  rep.clusters = std::move(kept);
  rep.unique_count = static_cast<std::size_t>(
      std::count_if(rep.clusters.begin(), rep.clusters.end(),
                    [](const ClusterSummary &c) { return c.nonempty; }));
  return rep;
}

void write_modal_table(const ClusterReport &rep,
                       const std::filesystem::path &path) {
  auto out = open_table(path);
  std::size_t p = 0;
  for (const auto &c : rep.clusters)
    p = std::max(p, rep.family == Family::categorical ? c.modes.size()
                                                      : c.theta.size());
  out << "cluster\tweight\tsize";
  for (std::size_t j = 0; j < p; ++j)
    out << "\titem_" << j + 1;
  out << '\n';
  for (std::size_t g = 0; g < rep.clusters.size(); ++g) {
    const auto &c = rep.clusters[g];
    if (!c.nonempty)
      continue;
    out << g + 1 << '\t' << c.weight << '\t' << c.size;
    if (rep.family == Family::categorical)
      for (const auto &m : c.modes)
        out << '\t' << m.level + 1;
    else
      for (double v : c.theta)
        out << '\t' << v;
    out << '\n';
  }
}

void write_profile_frequencies(const ClusterReport &rep,
                               std::span<const int> subpops, std::size_t S,
                               const std::filesystem::path &path) {
  if (subpops.size() != rep.assignments.size())
    throw std::invalid_argument("subpopulation labels differ in length");
  const std::size_t G = rep.clusters.size();
  std::vector<std::size_t> counts(S * G, 0), totals(S, 0);
  for (std::size_t i = 0; i < subpops.size(); ++i) {
    const auto s = static_cast<std::size_t>(subpops[i]);
    ++counts[s * G + static_cast<std::size_t>(rep.assignments[i])];
    ++totals[s];
  }
  auto out = open_table(path);
  out << "subpop\tcluster\tnonempty\tcount\tfraction\n";
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t g = 0; g < G; ++g) {
      const auto c = counts[s * G + g];
      out << s + 1 << '\t' << g + 1 << '\t' << rep.clusters[g].nonempty << '\t'
          << c << '\t'
          << (totals[s] ? static_cast<double>(c) / static_cast<double>(totals[s])
                        : 0.0)
          << '\n';
    }
}

void write_nu_table(const PosteriorSummary &sum, double deviation_threshold,
                    const std::filesystem::path &path) {
  auto out = open_table(path);
  out << "subpop\titem\tmedian\tlower\tupper\tdeviates\n";
  for (std::size_t s = 0; s < sum.S && !sum.nu.empty(); ++s)
    for (std::size_t j = 0; j < sum.p; ++j) {
      const auto &iv = sum.nu[s * sum.p + j];
      out << s + 1 << '\t' << j + 1 << '\t' << iv.median << '\t' << iv.lower
          << '\t' << iv.upper << '\t' << (iv.median < deviation_threshold)
          << '\n';
    }
}

void write_local_table(const PosteriorSummary &sum,
                       const std::filesystem::path &path) {
  auto out = open_table(path);
  out << "subpop\trank\tweight";
  for (std::size_t j = 0; j < sum.p; ++j)
    out << "\titem_" << j + 1;
  out << '\n';
  for (std::size_t s = 0; s < sum.local.size(); ++s)
    for (const auto &lp : sum.local[s]) {
      out << s + 1 << '\t' << lp.rank + 1 << '\t' << lp.weight;
      if (!lp.modes.empty())
        for (const auto &m : lp.modes)
          out << '\t' << m.level + 1;
      else
        for (double v : lp.theta)
          out << '\t' << v;
      out << '\n';
    }
}

void write_weights_table(const PosteriorSummary &sum,
                         const std::filesystem::path &path) {
  auto out = open_table(path);
  out << "level\tsubpop\trank\tmedian\tlower\tupper\n";
  for (std::size_t k = 0; k < sum.pi_ranked.size(); ++k) {
    const auto &iv = sum.pi_ranked[k];
    out << "global\t0\t" << k + 1 << '\t' << iv.median << '\t' << iv.lower
        << '\t' << iv.upper << '\n';
  }
  for (std::size_t s = 0; s < sum.S && !sum.lambda_ranked.empty(); ++s)
    for (std::size_t k = 0; k < sum.K; ++k) {
      const auto &iv = sum.lambda_ranked[s * sum.K + k];
      out << "local\t" << s + 1 << '\t' << k + 1 << '\t' << iv.median << '\t'
          << iv.lower << '\t' << iv.upper << '\n';
    }
  for (std::size_t s = 0; s < sum.beta.size(); ++s) {
    const auto &iv = sum.beta[s];
    out << "beta\t" << s + 1 << "\t0\t" << iv.median << '\t' << iv.lower
        << '\t' << iv.upper << '\n';
  }
}

} // namespace rpc
