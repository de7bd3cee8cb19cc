#include "rpc/trace.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace rpc {

namespace {

constexpr char kMagic[8] = {'R', 'P', 'C', 'T', 'R', 'A', 'C', 'E'};

class Writer {
public:
  explicit Writer(const std::filesystem::path &path)
      : out_(path, std::ios::binary) {
    if (!out_)
      throw std::runtime_error("cannot open " + path.string());
  }
  template <typename T> void scalar(T v) {
    out_.write(reinterpret_cast<const char *>(&v), sizeof(T));
  }
  template <typename T> void array(const std::vector<T> &v) {
    scalar<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char *>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  void raw(const char *p, std::size_t n) {
    out_.write(p, static_cast<std::streamsize>(n));
  }
  void finish() {
    out_.flush();
    if (!out_)
      throw std::runtime_error("trace write failed");
  }

private:
  std::ofstream out_;
};

class Reader {
public:
  explicit Reader(const std::filesystem::path &path)
      : in_(path, std::ios::binary) {
    if (!in_)
      throw std::runtime_error("cannot open " + path.string());
  }
  template <typename T> T scalar() {
    T v{};
    in_.read(reinterpret_cast<char *>(&v), sizeof(T));
    check();
    return v;
  }
  template <typename T> std::vector<T> array() {
    const auto n = scalar<std::uint64_t>();
    if (n > (1ull << 40))
      throw std::runtime_error("corrupt trace: implausible array length");
    std::vector<T> v(n);
    in_.read(reinterpret_cast<char *>(v.data()),
             static_cast<std::streamsize>(n * sizeof(T)));
    check();
    return v;
  }
  void raw(char *p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    check();
  }

private:
  void check() {
    if (!in_)
      throw std::runtime_error("truncated trace file");
  }
  std::ifstream in_;
};

} // namespace

std::size_t ChainTrace::kernel_block() const {
  if (family == Family::categorical) {
    std::size_t w = 0;
    for (int l : levels)
      w += static_cast<std::size_t>(l);
    return K * w;
  }
  return 2 * K * p;
}

std::vector<std::size_t> ChainTrace::level_offsets() const {
  std::vector<std::size_t> off(levels.size());
  std::size_t acc = 0;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    off[j] = acc;
    acc += static_cast<std::size_t>(levels[j]);
  }
  return off;
}

void write_trace(const ChainTrace &t, const std::filesystem::path &path) {
  Writer w(path);
  w.raw(kMagic, sizeof(kMagic));
  w.scalar<std::uint32_t>(kTraceVersion);
  w.scalar<std::uint32_t>(t.family == Family::categorical ? 0u : 1u);
  w.scalar<std::uint32_t>(t.kind == ModelKind::rpc ? 0u : 1u);
  w.scalar<std::uint64_t>(t.n);
  w.scalar<std::uint64_t>(t.p);
  w.scalar<std::uint64_t>(t.S);
  w.scalar<std::uint64_t>(t.K);
  w.array(t.levels);
  w.array(t.subpops);
  w.array(t.log_joint);
  w.array(t.iterations);
  w.array(t.pi);
  w.array(t.lambda);
  w.array(t.nu);
  w.array(t.beta);
  w.array(t.C);
  w.array(t.kernel_snapshots);
  w.array(t.theta0);
  w.array(t.theta1);
  w.array(t.g_mean);
  w.finish();
}

ChainTrace read_trace(const std::filesystem::path &path) {
  Reader r(path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a trace file: " + path.string());
  const auto version = r.scalar<std::uint32_t>();
  if (version != kTraceVersion)
    throw std::runtime_error("unsupported trace version " +
                             std::to_string(version));
  ChainTrace t;
  t.family = r.scalar<std::uint32_t>() == 0 ? Family::categorical
                                             : Family::gaussian;
  t.kind = r.scalar<std::uint32_t>() == 0 ? ModelKind::rpc
                                           : ModelKind::global_only;
  t.n = r.scalar<std::uint64_t>();
  t.p = r.scalar<std::uint64_t>();
  t.S = r.scalar<std::uint64_t>();
  t.K = r.scalar<std::uint64_t>();
  t.levels = r.array<int>();
  t.subpops = r.array<int>();
  t.log_joint = r.array<double>();
  t.iterations = r.array<std::int64_t>();
  t.pi = r.array<double>();
  t.lambda = r.array<double>();
  t.nu = r.array<double>();
  t.beta = r.array<double>();
  t.C = r.array<std::uint16_t>();
  t.kernel_snapshots = r.array<std::int64_t>();
  t.theta0 = r.array<float>();
  t.theta1 = r.array<float>();
  t.g_mean = r.array<double>();

  const std::size_t m = t.snapshots();
  if (t.subpops.size() != t.n || t.pi.size() != m * t.K || t.C.size() != m * t.n ||
      t.nu.size() != m * t.S * t.p || t.beta.size() != m * t.S ||
      t.theta0.size() != t.kernel_snapshots.size() * t.kernel_block())
    throw std::runtime_error("trace arrays inconsistent with header");
  return t;
}

void write_log_joint(const ChainTrace &trace,
                     const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string());
  out << std::setprecision(17);
  for (double v : trace.log_joint)
    out << v << '\n';
}

} // namespace rpc
