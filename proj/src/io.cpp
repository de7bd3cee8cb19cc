#include "rpc/io.hpp"
#include "rpc/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rpc::io {

namespace {

// One CSV record; supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(const std::string &line, std::size_t row) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted)
    throw IngestError("unterminated quote", row, "");
  out.push_back(std::move(cur));
  return out;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string quote(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"')
      out += '"';
    out += ch;
  }
  return out + '"';
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

} // namespace

Ingested parse_csv(const std::string &text, const IngestOptions &opt) {
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (trim(line).empty())
      continue;
    header = split_record(line, row);
    break;
  }
  if (header.empty())
    throw IngestError("missing header row", 1, "");
  for (auto &h : header)
    h = trim(h);

  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (!index.emplace(header[c], c).second)
      throw IngestError("duplicate column", row, header[c]);
  const auto sub_it = index.find(opt.subpop_column);
  if (sub_it == index.end())
    throw IngestError("unknown column", row, opt.subpop_column);
  const std::size_t sub_col = sub_it->second;

  std::vector<std::size_t> item_cols;
  Ingested out;
  if (opt.item_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != sub_col)
        item_cols.push_back(c);
  } else {
    for (const auto &name : opt.item_columns) {
      const auto it = index.find(name);
      if (it == index.end())
        throw IngestError("unknown column", row, name);
      if (it->second == sub_col)
        throw IngestError("item column is the subpopulation column", row, name);
      item_cols.push_back(it->second);
    }
  }
  if (item_cols.empty())
    throw IngestError("no item columns", row, "");
  for (auto c : item_cols)
    out.item_names.push_back(header[c]);

  const bool cat = opt.family == Family::categorical;
  const std::size_t p = item_cols.size();
  std::vector<int> codes;
  std::vector<double> values;
  std::vector<int> subpop;
  std::map<std::string, int> sub_index;
  std::vector<int> max_code(p, 0);

  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (trim(line).empty())
      continue;
    const auto fields = split_record(line, row);
    if (fields.size() != header.size())
      throw IngestError("expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()),
                        row, "");
    const std::string label = trim(fields[sub_col]);
    if (label.empty())
      throw IngestError("missing cell", row, header[sub_col]);
    const auto [it, fresh] =
        sub_index.emplace(label, static_cast<int>(sub_index.size()));
    if (fresh)
      out.subpop_names.push_back(label);
    subpop.push_back(it->second);

    for (std::size_t j = 0; j < p; ++j) {
      const std::string cell = trim(fields[item_cols[j]]);
      const std::string &col = header[item_cols[j]];
      if (cell.empty())
        throw IngestError("missing cell", row, col);
      const char *b = cell.data();
      const char *e = b + cell.size();
      if (cat) {
        int v = 0;
        const auto res = std::from_chars(b, e, v);
        if (res.ec != std::errc() || res.ptr != e)
          throw IngestError("non-integer code '" + cell + "'", row, col);
        if (v < 1)
          throw IngestError("code below 1: " + cell, row, col);
        if (opt.levels > 0 && v > opt.levels)
          throw IngestError("code above declared levels: " + cell, row, col);
        codes.push_back(v - 1);
        max_code[j] = std::max(max_code[j], v);
      } else {
        double v = 0.0;
        const auto res = std::from_chars(b, e, v);
        if (res.ec != std::errc() || res.ptr != e || !std::isfinite(v))
          throw IngestError("non-numeric value '" + cell + "'", row, col);
        values.push_back(v);
      }
    }
  }
  const std::size_t n = subpop.size();
  if (n == 0)
    throw IngestError("no data rows", row, "");
  if (cat) {
    std::vector<int> levels(p, opt.levels);
    for (std::size_t j = 0; j < p; ++j) {
      if (opt.levels == 0)
        levels[j] = max_code[j];
      if (levels[j] < 2)
        throw IngestError("item needs at least two levels", 1,
                          out.item_names[j]);
    }
    out.data = Dataset::categorical(n, p, std::move(codes), std::move(subpop),
                                    std::move(levels));
  } else {
    out.data = Dataset::gaussian(n, p, std::move(values), std::move(subpop));
  }
  return out;
}

Ingested read_csv(const std::filesystem::path &path, const IngestOptions &opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), opt);
}

std::string format_csv(const Dataset &data,
                       const std::vector<std::string> &subpop_names,
                       const std::vector<std::string> &item_names,
                       const std::string &subpop_column) {
  const std::size_t p = data.p();
  if (!subpop_names.empty() && subpop_names.size() != data.S())
    throw std::invalid_argument("subpopulation name count differs from S");
  if (!item_names.empty() && item_names.size() != p)
    throw std::invalid_argument("item name count differs from p");
  std::string out = quote(subpop_column);
  for (std::size_t j = 0; j < p; ++j)
    out += ',' + quote(item_names.empty() ? "item_" + std::to_string(j + 1)
                                          : item_names[j]);
  out += '\n';
  const bool cat = data.family() == Family::categorical;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto s = static_cast<std::size_t>(data.subpop(i));
    out += quote(subpop_names.empty() ? std::to_string(s + 1) : subpop_names[s]);
    for (std::size_t j = 0; j < p; ++j) {
      out += ',';
      out += cat ? std::to_string(data.code(i, j) + 1)
                 : format_real(data.value(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path &path, const Dataset &data,
               const std::vector<std::string> &subpop_names,
               const std::vector<std::string> &item_names,
               const std::string &subpop_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path.string());
  out << format_csv(data, subpop_names, item_names, subpop_column);
  if (!out)
    throw std::runtime_error("write failed: " + path.string());
}

void write_truth(const std::filesystem::path &path, const sim::GroundTruth &t,
                 std::size_t p) {
  nlohmann::json j;
  j["p"] = p;
  j["C"] = t.C;
  j["G"] = t.G;
  j["L"] = t.L;
  j["nu"] = t.nu;
  j["global_kernels"] = t.global_kernels;
  j["local_kernels"] = t.local_kernels;
  j["always_global"] = t.always_global;
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string());
  out << j.dump() << '\n';
}

sim::GroundTruth read_truth(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in);
  sim::GroundTruth t;
  j.at("C").get_to(t.C);
  j.at("G").get_to(t.G);
  j.at("L").get_to(t.L);
  j.at("nu").get_to(t.nu);
  j.at("global_kernels").get_to(t.global_kernels);
  j.at("local_kernels").get_to(t.local_kernels);
  t.always_global = j.at("always_global").get<std::vector<bool>>();
  return t;
}

} // namespace rpc::io
