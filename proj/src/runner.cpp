#include "rpc/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rpc {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Tracks what a command creates so a failure leaves nothing half-written.
class OutputDir {
public:
  explicit OutputDir(const fs::path &dir) : dir_(dir) {
    if (fs::exists(dir_) && !fs::is_directory(dir_))
      throw std::runtime_error(dir_.string() + " exists and is not a directory");
    created_ = fs::create_directories(dir_);
  }
  OutputDir(const OutputDir &) = delete;
  OutputDir &operator=(const OutputDir &) = delete;
  ~OutputDir() {
    if (committed_)
      return;
    std::error_code ec;
    for (auto it = made_.rbegin(); it != made_.rend(); ++it)
      fs::remove_all(*it, ec);
    if (created_)
      fs::remove_all(dir_, ec);
  }

  fs::path file(const std::string &name) {
    std::lock_guard lock(mu_);
    made_.push_back(dir_ / name);
    return made_.back();
  }
  fs::path subdir(const std::string &name) {
    auto p = file(name);
    fs::create_directories(p);
    return p;
  }
  const fs::path &path() const { return dir_; }
  void commit() { committed_ = true; }

private:
  fs::path dir_;
  bool created_ = false;
  bool committed_ = false;
  std::vector<fs::path> made_;
  std::mutex mu_;
};

std::ofstream open_out(const fs::path &path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string());
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v))
    return "nan";
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }),
          v.end());
  if (v.empty())
    return kNaN;
  std::sort(v.begin(), v.end());
  return quantile(v, 0.5);
}

nlohmann::json config_json(const RunConfig &config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[k, v] : config.entries())
    j[k] = v;
  return j;
}

void write_manifest(const fs::path &path, const std::string &command,
                    const RunConfig &config, nlohmann::json extra) {
  nlohmann::json j;
  j["software"] = {{"name", "rpc"}, {"version", kVersion}};
  j["command"] = command;
  j["config"] = config_json(config);
  j["trace_format_version"] = kTraceVersion;
  for (auto &[k, v] : extra.items())
    j[k] = v;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_assignments(const fs::path &path, const FitResult &fit) {
  auto out = open_out(path);
  out << std::setprecision(10);
  out << "subject\tsubpop\tcluster\tallocation_probability\n";
  const auto &rep = fit.report;
  for (std::size_t i = 0; i < rep.assignments.size(); ++i)
    out << i + 1 << '\t' << fit.trace.subpops[i] + 1 << '\t'
        << rep.assignments[i] + 1 << '\t' << rep.allocation_probabilities[i]
        << '\n';
}

const std::vector<std::string> kMetricColumns = {
    "K0",       "unique_count", "cut",         "nonempty_median",
    "nu_median", "beta_min",    "beta_max",    "mse_nu",
    "mse_theta", "sensitivity", "specificity"};

std::vector<double> metric_values(const ReplicateResult &r) {
  return {static_cast<double>(r.K0),
          static_cast<double>(r.unique_count),
          static_cast<double>(r.cut),
          static_cast<double>(r.nonempty_median),
          r.nu_median,
          r.beta_min,
          r.beta_max,
          r.eval.mse_nu,
          r.eval.mse_theta,
          r.eval.sensitivity,
          r.eval.specificity};
}

std::vector<std::string> split_tabs(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, '\t'))
    out.push_back(f);
  return out;
}

} // namespace

FitResult analyze(ChainTrace trace, const RunConfig &config) {
  FitResult out;
  out.report = remove_redundant(build_report(trace, config.post),
                                config.post.redundancy_tolerance);
  out.summary = summarize(trace, config.post);
  out.trace = std::move(trace);
  return out;
}

FitResult fit(const Dataset &data, const RunConfig &config) {
  config.validate();
  ChainTrace trace;
  if (config.model == "rpc")
    trace = run_chain(data, config.hyper, config.chain, ModelKind::rpc);
  else
    trace = fit_baseline(data, config.hyper, config.chain,
                         baseline_from_string(config.model));
  return analyze(std::move(trace), config);
}

std::vector<double> nu_estimate(const FitResult &fit) {
  if (fit.summary.nu.empty())
    return std::vector<double>(fit.trace.S * fit.trace.p, 1.0);
  std::vector<double> out;
  for (const auto &iv : fit.summary.nu)
    out.push_back(iv.median);
  return out;
}

EvalResult evaluate(const FitResult &fit, const sim::GroundTruth &truth,
                    Matching matching) {
  EvalResult r;
  r.mse_nu = mse_nu(nu_estimate(fit), truth.nu);

  r.mse_theta = kNaN;
  std::vector<std::vector<double>> est;
  for (const auto &c : fit.report.clusters)
    if (c.nonempty && !c.theta.empty())
      est.push_back(c.theta);
  if (!truth.global_kernels.empty() && est.size() >= truth.global_kernels.size()) {
    std::vector<bool> mask;
    if (fit.trace.family == Family::gaussian)
      mask = truth.always_global;
    if (mask.empty() || std::find(mask.begin(), mask.end(), true) != mask.end())
      r.mse_theta = mse_theta(est, truth.global_kernels, mask, matching);
  }

  const auto labeled = std::count_if(truth.C.begin(), truth.C.end(),
                                     [](int c) { return c >= 0; });
  if (labeled >= 2) {
    const auto pa = sensitivity_specificity(fit.report.assignments, truth.C);
    r.sensitivity = pa.sensitivity;
    r.specificity = pa.specificity;
  } else {
    r.sensitivity = r.specificity = kNaN;
  }
  return r;
}

void write_report_tables(const fs::path &dir, const FitResult &fit,
                         const RunConfig &config) {
  write_modal_table(fit.report, dir / "modal_patterns.tsv");
  write_profile_frequencies(fit.report, fit.trace.subpops, fit.trace.S,
                            dir / "profile_frequencies.tsv");
  write_weights_table(fit.summary, dir / "weights.tsv");
  write_assignments(dir / "assignments.tsv", fit);
  if (fit.trace.kind == ModelKind::rpc) {
    write_nu_table(fit.summary, config.post.deviation_threshold, dir / "nu.tsv");
    write_local_table(fit.summary, dir / "local_profiles.tsv");
  }
}

ReplicateResult run_replicate(const RunConfig &config, int r,
                              const fs::path &dir) {
  const std::uint64_t seed = config.chain.seed + static_cast<std::uint64_t>(r);
  const auto spec =
      sim::SimSpec::for_case(config.case_id, config.variant, config.cell_size, seed);
  const auto sim = sim::generate(spec);

  RunConfig local = config;
  local.chain.seed = seed;
  local.family = sim.data.family();
  const FitResult f = fit(sim.data, local);

  ReplicateResult out;
  out.replicate = r;
  out.seed = seed;
  out.n = sim.data.n();
  out.K0 = f.report.K0;
  out.unique_count = f.report.unique_count;
  out.cut = f.report.cut;
  out.nonempty_median = nonempty_count(f.trace, config.post.threshold);
  out.nu_median = median(nu_estimate(f));
  if (!f.summary.beta.empty()) {
    out.beta_min = std::numeric_limits<double>::infinity();
    out.beta_max = -out.beta_min;
    for (const auto &iv : f.summary.beta) {
      out.beta_min = std::min(out.beta_min, iv.median);
      out.beta_max = std::max(out.beta_max, iv.median);
    }
  } else {
    out.beta_min = out.beta_max = kNaN;
  }
  out.eval = evaluate(f, sim.truth, config.matching);

  if (!dir.empty()) {
    io::write_csv(dir / "data.csv", sim.data);
    io::write_truth(dir / "truth.json", sim.truth, sim.data.p());
    write_report_tables(dir, f, local);
    if (config.keep_traces) {
      write_trace(f.trace, dir / "trace.bin");
      write_log_joint(f.trace, dir / "log_joint.txt");
    }
  }
  return out;
}

void write_results(const fs::path &path, const RunConfig &config,
                   const std::vector<ReplicateResult> &results) {
  auto out = open_out(path);
  out << "case\tvariant\tmodel\treplicate\tseed\tn";
  for (const auto &c : kMetricColumns)
    out << '\t' << c;
  out << '\n';
  for (const auto &r : results) {
    out << config.case_id << '\t' << config.variant << '\t' << config.model
        << '\t' << r.replicate + 1 << '\t' << r.seed << '\t' << r.n;
    for (double v : metric_values(r))
      out << '\t' << fmt(v);
    out << '\n';
  }
}

void write_summary(const fs::path &path,
                   const std::vector<fs::path> &results_files) {
  // (case, variant, model) -> metric -> values
  std::map<std::tuple<std::string, std::string, std::string>,
           std::map<std::string, std::vector<double>>>
      groups;
  for (const auto &file : results_files) {
    std::ifstream in(file);
    if (!in)
      throw std::runtime_error("cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line))
      throw std::runtime_error("empty results file " + file.string());
    const auto header = split_tabs(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < header.size(); ++c)
      col[header[c]] = c;
    for (const char *need : {"case", "variant", "model"})
      if (!col.count(need))
        throw std::runtime_error(file.string() + ": missing column " + need);
    while (std::getline(in, line)) {
      if (line.empty())
        continue;
      const auto f = split_tabs(line);
      if (f.size() != header.size())
        throw std::runtime_error(file.string() + ": ragged row");
      auto &g = groups[{f[col["case"]], f[col["variant"]], f[col["model"]]}];
      for (const auto &m : kMetricColumns) {
        const auto it = col.find(m);
        if (it == col.end())
          continue;
        const std::string &v = f[it->second];
        g[m].push_back(v == "nan" ? kNaN : std::stod(v));
      }
    }
  }
  auto out = open_out(path);
  out << "case\tvariant\tmodel\tmetric\tmedian\tq1\tq3\treplicates\n";
  for (auto &[key, metrics] : groups)
    for (const auto &m : kMetricColumns) {
      auto it = metrics.find(m);
      if (it == metrics.end())
        continue;
      std::vector<double> v;
      for (double x : it->second)
        if (!std::isnan(x))
          v.push_back(x);
      out << std::get<0>(key) << '\t' << std::get<1>(key) << '\t'
          << std::get<2>(key) << '\t' << m << '\t';
      if (v.empty()) {
        out << "nan\tnan\tnan\t0\n";
        continue;
      }
      std::sort(v.begin(), v.end());
      out << fmt(quantile(v, 0.5)) << '\t' << fmt(quantile(v, 0.25)) << '\t'
          << fmt(quantile(v, 0.75)) << '\t' << v.size() << '\n';
    }
}

void run_fit(const RunConfig &config) {
  config.validate();
  if (config.input.empty())
    throw std::invalid_argument("fit needs --input");
  io::IngestOptions opt;
  opt.family = config.family;
  opt.subpop_column = config.subpop_column;
  opt.item_columns = config.item_columns;
  opt.levels = config.levels;
  const auto ing = io::read_csv(config.input, opt);

  OutputDir out(config.out);
  const FitResult f = fit(ing.data, config);
  write_trace(f.trace, out.file("trace.bin"));
  write_log_joint(f.trace, out.file("log_joint.txt"));
  for (const char *name : {"modal_patterns.tsv", "profile_frequencies.tsv",
                           "weights.tsv", "assignments.tsv", "nu.tsv",
                           "local_profiles.tsv"})
    out.file(name);
  write_report_tables(out.path(), f, config);
  save_config(config, out.file("run.conf"));

  nlohmann::json subpops = nlohmann::json::array();
  const auto sizes = ing.data.subpop_sizes();
  for (std::size_t s = 0; s < ing.subpop_names.size(); ++s)
    subpops.push_back(
        {{"index", s + 1}, {"label", ing.subpop_names[s]}, {"size", sizes[s]}});
  nlohmann::json extra;
  extra["data"] = {{"n", ing.data.n()},
                   {"p", ing.data.p()},
                   {"S", ing.data.S()},
                   {"family", to_string(ing.data.family())},
                   {"levels", ing.data.levels()},
                   {"items", ing.item_names},
                   {"subpopulations", subpops}};
  extra["results"] = {{"K0", f.report.K0},
                      {"unique_count", f.report.unique_count},
                      {"cut", f.report.cut},
                      {"snapshots", f.trace.snapshots()}};
  write_manifest(out.file("manifest.json"), "fit", config, extra);
  out.commit();
}

void run_simulate(const RunConfig &config) {
  config.validate();
  OutputDir out(config.out);
  const int R = config.replicates;
  std::vector<fs::path> dirs(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r) {
    char name[32];
    std::snprintf(name, sizeof(name), "rep_%03d", r + 1);
    dirs[static_cast<std::size_t>(r)] = out.subdir(name);
  }

  std::vector<ReplicateResult> results(static_cast<std::size_t>(R));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int r = next++; r < R; r = next++) {
      try {
        results[static_cast<std::size_t>(r)] =
            run_replicate(config, r, dirs[static_cast<std::size_t>(r)]);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  const int T = std::min(config.threads, R);
  if (T <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t)
      pool.emplace_back(worker);
    for (auto &th : pool)
      th.join();
  }
  for (const auto &e : errors)
    if (e)
      std::rethrow_exception(e);

  const auto results_path = out.file("results.tsv");
  write_results(results_path, config, results);
  write_summary(out.file("summary.tsv"), {results_path});
  save_config(config, out.file("run.conf"));
  nlohmann::json extra;
  extra["simulation"] = {{"case", config.case_id},
                         {"variant", std::string(1, config.variant)},
                         {"replicates", R},
                         {"seeds", {config.chain.seed, config.chain.seed + R - 1}}};
  write_manifest(out.file("manifest.json"), "simulate", config, extra);
  out.commit();
}

void run_report(const RunConfig &config) {
  config.validate();
  if (config.input.empty())
    throw std::invalid_argument("report needs --input");
  const fs::path in = config.input;
  if (!fs::exists(in))
    throw std::runtime_error("no such input: " + in.string());

  std::vector<fs::path> results;
  fs::path trace_path;
  if (fs::is_directory(in)) {
    if (fs::exists(in / "trace.bin"))
      trace_path = in / "trace.bin";
    for (const auto &e : fs::recursive_directory_iterator(in))
      if (e.is_regular_file() && e.path().filename() == "results.tsv")
        results.push_back(e.path());
    std::sort(results.begin(), results.end());
  } else if (in.filename() == "trace.bin") {
    trace_path = in;
  } else {
    results.push_back(in);
  }
  if (trace_path.empty() && results.empty())
    throw std::runtime_error("nothing to report in " + in.string());

  OutputDir out(config.out);
  nlohmann::json extra;
  if (!trace_path.empty()) {
    const FitResult f = analyze(read_trace(trace_path), config);
    for (const char *name : {"modal_patterns.tsv", "profile_frequencies.tsv",
                             "weights.tsv", "assignments.tsv", "nu.tsv",
                             "local_profiles.tsv"})
      out.file(name);
    write_report_tables(out.path(), f, config);
    extra["results"] = {{"K0", f.report.K0},
                        {"unique_count", f.report.unique_count},
                        {"cut", f.report.cut}};
  }
  if (!results.empty()) {
    write_summary(out.file("summary.tsv"), results);
    nlohmann::json files = nlohmann::json::array();
    for (const auto &r : results)
      files.push_back(r.string());
    extra["aggregated"] = files;
  }
  write_manifest(out.file("report_manifest.json"), "report", config, extra);
  out.commit();
}

} // namespace rpc
