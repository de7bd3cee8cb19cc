#pragma once

#include "rpc/dataset.hpp"
#include "rpc/simgen.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rpc::io {

struct IngestOptions {
  Family family = Family::categorical;
  std::string subpop_column = "subpop";
  /// Item columns in order; empty takes every other column.
  std::vector<std::string> item_columns;
  /// Declared category count for every item; 0 infers max observed code.
  int levels = 0;
};

struct Ingested {
  Dataset data;
  std::vector<std::string> subpop_names; // index s -> original label
  std::vector<std::string> item_names;
};

/// Comma-separated text with a header row. Subpopulation labels map to
/// 0..S-1 in order of first appearance. Errors name the file row (header =
/// row 1) and column.
Ingested read_csv(const std::filesystem::path &path,
                  const IngestOptions &options = {});
Ingested parse_csv(const std::string &text, const IngestOptions &options = {});

/// Canonical emission: one-based codes, or shortest round-trip reals.
void write_csv(const std::filesystem::path &path, const Dataset &data,
               const std::vector<std::string> &subpop_names = {},
               const std::vector<std::string> &item_names = {},
               const std::string &subpop_column = "subpop");
std::string format_csv(const Dataset &data,
                       const std::vector<std::string> &subpop_names = {},
                       const std::vector<std::string> &item_names = {},
                       const std::string &subpop_column = "subpop");

/// Ground-truth sidecar as JSON.
void write_truth(const std::filesystem::path &path, const sim::GroundTruth &t,
                 std::size_t p);
sim::GroundTruth read_truth(const std::filesystem::path &path);

} // namespace rpc::io
