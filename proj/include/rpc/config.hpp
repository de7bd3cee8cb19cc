#pragma once

#include "rpc/dataset.hpp"
#include "rpc/metrics.hpp"
#include "rpc/postprocess.hpp"
#include "rpc/sampler.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rpc {

/// Everything a fit, simulate or report run needs. Serialized as a flat
/// `key = value` document; `#` starts a comment.
///
/// Keys: input, out, family, subpop_column, item_columns (comma list),
/// levels, model (rpc | ofmm | lca4), k, dirichlet_weight, eta, a, b, tau,
/// gamma_shape, gamma_scale, iterations, burn_in, thin, seed, permute,
/// beta_update, fixed_nu, kernel_snapshots, threshold, size_filter,
/// redundancy_tolerance, deviation_threshold, local_profiles, matching
/// (greedy | optimal), case, variant, cell_size, replicates, threads,
/// keep_traces.
struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path out = "rpc_out";
  Family family = Family::categorical;
  std::string subpop_column = "subpop";
  std::vector<std::string> item_columns;
  int levels = 0;
  std::string model = "rpc";
  Hyperparams hyper;
  ChainConfig chain;
  PostprocessConfig post;
  Matching matching = Matching::greedy;
  int case_id = 1;
  char variant = 'a';
  int cell_size = 0;
  int replicates = 1;
  int threads = 1;
  bool keep_traces = false;

  /// Assign one key; throws on unknown keys or malformed values.
  void set(const std::string &key, const std::string &value);
  void validate() const;
  /// Every key with its current value, in documented order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
};

RunConfig parse_config(const std::string &text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path &path, RunConfig base = {});
void save_config(const RunConfig &config, const std::filesystem::path &path);

} // namespace rpc
