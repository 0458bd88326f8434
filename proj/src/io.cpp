#include "psmooth/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace psmooth {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  // Shortest round-trip form; 17 significant digits always succeed, but a
  // higher precision can still give a shorter string when %g switches from
  // scientific to fixed notation (10 prints as "1e+01" at precision 1).
  std::string best;
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v || v != v) {
      if (best.empty() || std::strlen(buf) < best.size()) best = buf;
      if (v != v) break;
    }
  }
  return best;
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw std::invalid_argument("empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

std::map<std::string, std::string> read_key_value_file(const std::string& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::string& path) {
  auto in = open_in(path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV file: " + path);
  table.header = split(line, ',');
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != table.header.size())
      throw std::runtime_error("ragged CSV row in " + path);
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row[i] = parse_double(fields[i]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_observations_csv(const std::string& path, const ObservationRecord& obs) {
  obs.validate();
  auto out = open_out(path);
  out << "k,y";
  for (int d = 1; d < obs.obs_dim; ++d) out << ",y" << d;
  out << "\n";
  for (int k = 0; k < obs.size(); ++k) {
    out << k;
    const auto row = obs.at(k);
    for (double v : row) out << ',' << format_double(v);
    out << "\n";
  }
}

ObservationRecord read_observations_csv(const std::string& path) {
  const auto table = read_csv(path);
  if (table.header.empty() || table.header[0] != "k" || table.header.size() < 2 ||
      table.header[1] != "y")
    throw std::runtime_error("observation CSV must start with header k,y: " + path);
  ObservationRecord obs;
  obs.obs_dim = static_cast<int>(table.header.size()) - 1;
  obs.values.reserve(table.rows.size() * static_cast<std::size_t>(obs.obs_dim));
  int expect = 0;
  for (const auto& row : table.rows) {
    if (static_cast<int>(row[0]) != expect)
      throw std::runtime_error("observation CSV rows must cover k = 0..n in order: " + path);
    ++expect;
    for (std::size_t i = 1; i < row.size(); ++i) obs.values.push_back(row[i]);
  }
  obs.validate();
  return obs;
}

void write_trajectory_csv(const std::string& path, const std::vector<double>& states,
                          int state_dim) {
  auto out = open_out(path);
  out << "k,x";
  for (int d = 1; d < state_dim; ++d) out << ",x" << d;
  out << "\n";
  const int n1 = static_cast<int>(states.size()) / state_dim;
  for (int k = 0; k < n1; ++k) {
    out << k;
    for (int d = 0; d < state_dim; ++d)
      out << ',' << format_double(states[static_cast<std::size_t>(k) * state_dim + d]);
    out << "\n";
  }
}

void write_marginals_csv(const std::string& path, const SmoothingMarginals& marginals) {
  auto out = open_out(path);
  out << "k,i,v\n";
  for (std::size_t k = 0; k < marginals.weights.size(); ++k)
    for (std::size_t i = 0; i < marginals.weights[k].size(); ++i)
      out << k << ',' << i << ',' << format_double(marginals.weights[k][i]) << "\n";
}

void write_estimates_csv(const std::string& path, const std::vector<double>& estimates) {
  auto out = open_out(path);
  out << "k,estimate\n";
  for (std::size_t k = 0; k < estimates.size(); ++k)
    out << k << ',' << format_double(estimates[k]) << "\n";
}

void write_trace_csv(const std::string& path, const FilterTrace& trace) {
  auto out = open_out(path);
  out << "k,i,log_weight,adjustment,ancestor";
  const int d = trace.clouds.empty() ? 1 : trace.clouds.front().state_dim;
  out << ",x";
  for (int j = 1; j < d; ++j) out << ",x" << j;
  out << "\n";
  for (const auto& cloud : trace.clouds) {
    for (int i = 0; i < cloud.size(); ++i) {
      out << cloud.time_index << ',' << i << ','
          << format_double(cloud.log_weights[static_cast<std::size_t>(i)]) << ','
          << format_double(cloud.adjustment_weights[static_cast<std::size_t>(i)]) << ','
          << (cloud.ancestors.empty() ? -1 : cloud.ancestors[static_cast<std::size_t>(i)]);
      for (double v : cloud.position(i)) out << ',' << format_double(v);
      out << "\n";
    }
  }
}

void write_variance_report_csv(const std::string& path, const VarianceReport& report) {
  auto out = open_out(path);
  out << "k,method,sigma_sq,tavc,std_err,efficiency,j_opt\n";
  for (const auto& row : report.rows) {
    out << row.k << ',' << row.method << ',' << format_double(row.sigma_sq) << ','
        << format_double(row.tavc) << ',' << format_double(row.std_err) << ','
        << format_double(row.efficiency) << ',' << format_double(row.j_opt) << "\n";
  }
}

}  // namespace psmooth
