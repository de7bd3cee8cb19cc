#pragma once

#include "rpc/config.hpp"
#include "rpc/io.hpp"
#include "rpc/metrics.hpp"
#include "rpc/postprocess.hpp"
#include "rpc/simgen.hpp"
#include "rpc/trace.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rpc {

inline constexpr const char *kVersion = "0.1.0";

struct FitResult {
  ChainTrace trace;
  ClusterReport report; // redundant clusters merged
  PosteriorSummary summary;
};

/// Run the configured model (rpc, ofmm or lca4) and post-process it.
FitResult fit(const Dataset &data, const RunConfig &config);
/// Post-process an existing trace.
FitResult analyze(ChainTrace trace, const RunConfig &config);

/// Posterior median nu, or all ones for the global-only baselines.
std::vector<double> nu_estimate(const FitResult &fit);

/// Metrics against simulation truth. Entries that cannot be formed (no
/// true global clusters, too few estimated clusters, no labeled pairs) are
/// NaN.
EvalResult evaluate(const FitResult &fit, const sim::GroundTruth &truth,
                    Matching matching = Matching::greedy);

struct ReplicateResult {
  int replicate = 0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t K0 = 0, unique_count = 0, cut = 0;
  std::size_t nonempty_median = 0; // per-sweep count, before relabeling
  double nu_median = 0.0;          // median over (s, j) of posterior medians
  double beta_min = 0.0, beta_max = 0.0;
  EvalResult eval;
};

/// Generate replicate `r` (seed = config seed + r), fit and evaluate it.
/// Writes its artifacts into `dir` unless `dir` is empty.
ReplicateResult run_replicate(const RunConfig &config, int r,
                              const std::filesystem::path &dir = {});

/// Tab-separated replicate table and its grouped medians/IQRs.
void write_results(const std::filesystem::path &path, const RunConfig &config,
                   const std::vector<ReplicateResult> &results);
void write_summary(const std::filesystem::path &path,
                   const std::vector<std::filesystem::path> &results_files);

/// Every report table for one fit.
void write_report_tables(const std::filesystem::path &dir, const FitResult &fit,
                         const RunConfig &config);

/// Subcommands. Each removes the files it created if it fails.
void run_fit(const RunConfig &config);
void run_simulate(const RunConfig &config);
void run_report(const RunConfig &config);

} // namespace rpc
