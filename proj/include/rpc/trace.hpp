#pragma once

#include "rpc/dataset.hpp"
#include "rpc/model.hpp"
#include "rpc/state.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rpc {

/// Post-burn-in output of one chain.
///
/// Weight, deviation and assignment samples are kept for every stored
/// sweep. Kernel parameters are large (K x levels per subpopulation) and are
/// kept on a sub-grid of the stored sweeps in single precision; see
/// `kernel_snapshots`.
struct ChainTrace {
  Family family = Family::categorical;
  ModelKind kind = ModelKind::rpc;
  std::size_t n = 0, p = 0, S = 0, K = 0;
  std::vector<int> levels;
  std::vector<int> subpops; // per subject

  /// Log joint after every sweep, burn-in included.
  std::vector<double> log_joint;

  /// Sweep number (0-based) of every stored snapshot.
  std::vector<std::int64_t> iterations;
  std::vector<double> pi;     // snapshots x K
  std::vector<double> lambda; // snapshots x S*K
  std::vector<double> nu;     // snapshots x S*p
  std::vector<double> beta;   // snapshots x S
  std::vector<std::uint16_t> C; // snapshots x n

  /// Snapshot indices that also carry kernels, ascending.
  std::vector<std::int64_t> kernel_snapshots;
  std::vector<float> theta0; // kernel snapshots x kernel_block()
  std::vector<float> theta1; // kernel snapshots x S*kernel_block()

  /// Posterior frequency of G_ij = 1 over stored snapshots, n x p.
  std::vector<double> g_mean;

  std::size_t snapshots() const noexcept { return iterations.size(); }
  /// Floats per kernel bank: K x total levels, or K x p means followed by
  /// K x p precisions.
  std::size_t kernel_block() const;

  /// Snapshot-s view helpers.
  std::span<const double> pi_at(std::size_t s) const {
    return {pi.data() + s * K, K};
  }
  std::span<const std::uint16_t> C_at(std::size_t s) const {
    return {C.data() + s * n, n};
  }

  /// Start of item j inside one categorical cluster row.
  std::vector<std::size_t> level_offsets() const;

  bool operator==(const ChainTrace &) const = default;
};

/// Versioned little-endian binary dump. Layout: 8-byte magic "RPCTRACE",
/// uint32 version, then the header scalars and each array as a uint64
/// element count followed by the raw elements.
void write_trace(const ChainTrace &trace, const std::filesystem::path &path);
ChainTrace read_trace(const std::filesystem::path &path);

/// One log-joint value per line.
void write_log_joint(const ChainTrace &trace,
                     const std::filesystem::path &path);

inline constexpr std::uint32_t kTraceVersion = 1;

} // namespace rpc
