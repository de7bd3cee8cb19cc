#include "rpc/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rpc {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T> T parse_number(const std::string &key, const std::string &v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw std::invalid_argument("config key '" + key + "': bad value '" + v + "'");
  return out;
}

bool parse_bool(const std::string &key, const std::string &v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes")
    return true;
  if (v == "off" || v == "false" || v == "0" || v == "no")
    return false;
  throw std::invalid_argument("config key '" + key + "': expected on/off, got '" +
                              v + "'");
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string onoff(bool b) { return b ? "on" : "off"; }

} // namespace

void RunConfig::set(const std::string &key, const std::string &raw) {
  const std::string v = trim(raw);
  if (key == "input")
    input = v;
  else if (key == "out")
    out = v;
  else if (key == "family")
    family = family_from_string(v);
  else if (key == "subpop_column")
    subpop_column = v;
  else if (key == "item_columns") {
    item_columns.clear();
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!trim(part).empty())
        item_columns.push_back(trim(part));
  } else if (key == "levels")
    levels = parse_number<int>(key, v);
  else if (key == "model") {
    if (v != "rpc" && v != "ofmm" && v != "lca4")
      throw std::invalid_argument("model must be rpc, ofmm or lca4");
    model = v;
  } else if (key == "k")
    hyper.K = parse_number<int>(key, v);
  else if (key == "dirichlet_weight")
    hyper.dirichlet_weight = parse_number<double>(key, v);
  else if (key == "eta")
    hyper.eta = parse_number<double>(key, v);
  else if (key == "a")
    hyper.a = parse_number<double>(key, v);
  else if (key == "b")
    hyper.b = parse_number<double>(key, v);
  else if (key == "tau")
    hyper.tau = parse_number<double>(key, v);
  else if (key == "gamma_shape")
    hyper.gamma_shape = parse_number<double>(key, v);
  else if (key == "gamma_scale")
    hyper.gamma_scale = parse_number<double>(key, v);
  else if (key == "iterations")
    chain.n_iterations = parse_number<int>(key, v);
  else if (key == "burn_in")
    chain.burn_in = parse_number<int>(key, v);
  else if (key == "thin")
    chain.thin = parse_number<int>(key, v);
  else if (key == "seed")
    chain.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "permute")
    chain.permute_labels = parse_bool(key, v);
  else if (key == "beta_update")
    chain.update_beta = parse_bool(key, v);
  else if (key == "fixed_nu") {
    if (v.empty() || v == "none")
      chain.fixed_nu.reset();
    else
      chain.fixed_nu = parse_number<double>(key, v);
  } else if (key == "kernel_snapshots")
    chain.max_kernel_snapshots = parse_number<int>(key, v);
  else if (key == "threshold")
    post.threshold = parse_number<double>(key, v);
  else if (key == "size_filter")
    post.size_filter = parse_number<double>(key, v);
  else if (key == "redundancy_tolerance")
    post.redundancy_tolerance = parse_number<int>(key, v);
  else if (key == "deviation_threshold")
    post.deviation_threshold = parse_number<double>(key, v);
  else if (key == "local_profiles")
    post.local_profiles = parse_number<std::size_t>(key, v);
  else if (key == "matching") {
    if (v == "greedy")
      matching = Matching::greedy;
    else if (v == "optimal")
      matching = Matching::optimal;
    else
      throw std::invalid_argument("matching must be greedy or optimal");
  } else if (key == "case")
    case_id = parse_number<int>(key, v);
  else if (key == "variant") {
    if (v.size() != 1)
      throw std::invalid_argument("variant must be a single letter");
    variant = v[0];
  } else if (key == "cell_size")
    cell_size = parse_number<int>(key, v);
  else if (key == "replicates")
    replicates = parse_number<int>(key, v);
  else if (key == "threads")
    threads = parse_number<int>(key, v);
  else if (key == "keep_traces")
    keep_traces = parse_bool(key, v);
  else
    throw std::invalid_argument("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  hyper.validate();
  chain.validate();
  post.validate();
  if (levels < 0)
    throw std::invalid_argument("levels must be non-negative");
  if (replicates < 1)
    throw std::invalid_argument("replicates must be at least 1");
  if (threads < 1)
    throw std::invalid_argument("threads must be at least 1");
  if (cell_size < 0)
    throw std::invalid_argument("cell_size must be non-negative");
  if (out.empty())
    throw std::invalid_argument("output directory must be set");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::string items;
  for (std::size_t k = 0; k < item_columns.size(); ++k)
    items += (k ? "," : "") + item_columns[k];
  return {
      {"input", input.string()},
      {"out", out.string()},
      {"family", to_string(family)},
      {"subpop_column", subpop_column},
      {"item_columns", items},
      {"levels", std::to_string(levels)},
      {"model", model},
      {"k", std::to_string(hyper.K)},
      {"dirichlet_weight", num(hyper.dirichlet_weight)},
      {"eta", num(hyper.eta)},
      {"a", num(hyper.a)},
      {"b", num(hyper.b)},
      {"tau", num(hyper.tau)},
      {"gamma_shape", num(hyper.gamma_shape)},
      {"gamma_scale", num(hyper.gamma_scale)},
      {"iterations", std::to_string(chain.n_iterations)},
      {"burn_in", std::to_string(chain.burn_in)},
      {"thin", std::to_string(chain.thin)},
      {"seed", std::to_string(chain.seed)},
      {"permute", onoff(chain.permute_labels)},
      {"beta_update", onoff(chain.update_beta)},
      {"fixed_nu", chain.fixed_nu ? num(*chain.fixed_nu) : "none"},
      {"kernel_snapshots", std::to_string(chain.max_kernel_snapshots)},
      {"threshold", num(post.threshold)},
      {"size_filter", num(post.size_filter)},
      {"redundancy_tolerance", std::to_string(post.redundancy_tolerance)},
      {"deviation_threshold", num(post.deviation_threshold)},
      {"local_profiles", std::to_string(post.local_profiles)},
      {"matching", matching == Matching::greedy ? "greedy" : "optimal"},
      {"case", std::to_string(case_id)},
      {"variant", std::string(1, variant)},
      {"cell_size", std::to_string(cell_size)},
      {"replicates", std::to_string(replicates)},
      {"threads", std::to_string(threads)},
      {"keep_traces", onoff(keep_traces)},
  };
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto &[k, v] : entries())
    out += k + " = " + v + '\n';
  return out;
}

RunConfig parse_config(const std::string &text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    if (trim(line).empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(row) +
                                  ": expected key = value");
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const std::invalid_argument &e) {
      throw std::invalid_argument("config line " + std::to_string(row) + ": " +
                                  e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path &path, RunConfig base) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void save_config(const RunConfig &config, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string());
  out << config.to_text();
}

} // namespace rpc
