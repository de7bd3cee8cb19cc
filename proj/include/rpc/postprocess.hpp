#pragma once

#include "rpc/dataset.hpp"
#include "rpc/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rpc {

/// Pairwise co-clustering frequencies, stored densely in single precision.
class SimilarityMatrix {
public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n) : n_(n), v_(n * n, 0.0f) {}

  std::size_t n() const noexcept { return n_; }
  float operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
  float &operator()(std::size_t i, std::size_t j) { return v_[i * n_ + j]; }
  std::span<const float> row(std::size_t i) const { return {v_.data() + i * n_, n_}; }

private:
  std::size_t n_ = 0;
  std::vector<float> v_;
};

/// Fraction of stored sweeps in which each pair shares a global label.
SimilarityMatrix similarity(const ChainTrace &trace);
/// Same from raw histories: `C` is snapshots x n.
SimilarityMatrix similarity(std::span<const std::uint16_t> C, std::size_t n);

struct Merge {
  int a, b;      // a < b; the merged group keeps index a
  double height; // complete-linkage distance at the merge
};

/// Complete-linkage tree on distance 1 - similarity. Ties go to the lowest
/// (a, b) pair, so the tree is deterministic.
class Dendrogram {
public:
  std::size_t n = 0;
  std::vector<Merge> merges; // n - 1 merges, non-decreasing height

  /// Group labels after cutting to k groups, numbered 0..k-1 in order of
  /// each group's lowest member.
  std::vector<int> cut(std::size_t k) const;
};

Dendrogram complete_linkage_tree(SimilarityMatrix sim);
std::vector<int> complete_linkage(const SimilarityMatrix &sim, std::size_t k);

/// Count of entries strictly above `threshold`.
std::size_t nonempty_count(std::span<const double> weights, double threshold);
/// Median over stored sweeps of the per-sweep nonempty count.
std::size_t nonempty_count(const ChainTrace &trace, double threshold = 0.01);

struct ModalResponse {
  int level = 0;            // zero-based
  double probability = 0.0;
  bool tie = false;         // another level reaches the same probability
};

/// Argmax of one item's kernel; ties resolve to the lowest level.
ModalResponse modal_response(std::span<const double> probs);

/// Linear interpolation between order statistics (R type 7).
double quantile(std::span<const double> sorted, double q);

struct Interval {
  double median = 0.0, lower = 0.0, upper = 0.0;
};
/// Median and central `level` interval; sorts `samples` in place.
Interval interval(std::vector<double> &samples, double level = 0.95);

struct PostprocessConfig {
  double threshold = 0.01;       // nonempty cluster weight
  double size_filter = 0.0;      // minimum subject share; 0 disables
  int redundancy_tolerance = 0;  // modal vectors within this Hamming distance merge
  double deviation_threshold = 0.5;
  std::size_t local_profiles = 0; // ranked local profiles kept; 0 = those above threshold
  void validate() const;
};

struct ClusterSummary {
  int id = 0;                // lowest tree group merged into this cluster
  std::size_t size = 0;      // assigned subjects
  double weight = 0.0;       // posterior median pi after relabeling
  bool nonempty = false;
  /// Posterior median kernel: categorical probabilities flattened by item
  /// level offsets, or per-item means.
  std::vector<double> theta;
  std::vector<ModalResponse> modes; // categorical only
};

struct LocalProfile {
  std::size_t rank = 0;      // 0 = heaviest local cluster in each sweep
  double weight = 0.0;       // posterior median lambda at this rank
  std::vector<double> theta; // same layout as ClusterSummary::theta
  std::vector<ModalResponse> modes;
};

struct PosteriorSummary {
  std::size_t S = 0, p = 0, K = 0;
  std::vector<Interval> nu;            // S x p
  std::vector<Interval> beta;          // S
  std::vector<Interval> pi_ranked;     // K, weights sorted descending per sweep
  std::vector<Interval> lambda_ranked; // S x K, same ranking
  std::vector<std::vector<LocalProfile>> local; // per subpopulation
};

/// Label-invariant summaries: nu and beta elementwise, weights by rank.
/// Local kernels follow each sweep's lambda ranking.
PosteriorSummary summarize(const ChainTrace &trace,
                           const PostprocessConfig &config = {});

struct ClusterReport {
  Family family = Family::categorical;
  std::size_t K = 0;
  std::size_t K0 = 0;            // nonempty clusters
  std::size_t unique_count = 0;  // K0 minus redundant
  std::size_t cut = 0;           // groups taken from the tree
  std::vector<int> assignments;  // index into clusters, per subject
  std::vector<double> allocation_probabilities;
  std::vector<ClusterSummary> clusters;

  /// One-based modal levels of the nonempty clusters, in cluster order.
  std::vector<std::vector<int>> modal_patterns() const;
};

/// Cut the tree at the median nonempty count, map each group to its modal
/// label in every sweep and summarize the mapped parameters.
ClusterReport build_report(const ChainTrace &trace, const Dendrogram &tree,
                           const PostprocessConfig &config = {});
ClusterReport build_report(const ChainTrace &trace,
                           const PostprocessConfig &config = {});

/// Merge nonempty clusters whose modal vectors match (within the Hamming
/// tolerance) into the lowest-indexed one. Weights add; sizes add.
ClusterReport remove_redundant(ClusterReport report, int tolerance = 0);

/// Plot-ready tab-separated exports.
void write_modal_table(const ClusterReport &report,
                       const std::filesystem::path &path);
void write_profile_frequencies(const ClusterReport &report,
                               std::span<const int> subpops, std::size_t S,
                               const std::filesystem::path &path);
void write_nu_table(const PosteriorSummary &summary, double deviation_threshold,
                    const std::filesystem::path &path);
void write_local_table(const PosteriorSummary &summary,
                       const std::filesystem::path &path);
void write_weights_table(const PosteriorSummary &summary,
                         const std::filesystem::path &path);

} // namespace rpc
