#pragma once

#include <map>
#include <string>
#include <vector>

#include "psmooth/analysis.hpp"
#include "psmooth/model.hpp"
#include "psmooth/particle_cloud.hpp"
#include "psmooth/smoother.hpp"

namespace psmooth {

// Shortest decimal form that parses back to the identical double (17
// significant digits are always enough; strtod reads inf/nan spellings too).
std::string format_double(double v);
double parse_double(const std::string& text);

// Flat key=value file: one pair per line, '#' starts a comment, blank lines
// ignored. Later keys overwrite earlier ones.
std::map<std::string, std::string> read_key_value_file(const std::string& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

// Observation CSV, header "k,y" (k is the 0-based time index; obs_dim > 1
// adds columns y1, y2, ...). Rows must cover 0..n in order.
void write_observations_csv(const std::string& path, const ObservationRecord& obs);
ObservationRecord read_observations_csv(const std::string& path);

// Trajectory CSV, header "k,x" (x1, x2, ... for state_dim > 1).
void write_trajectory_csv(const std::string& path, const std::vector<double>& states,
                          int state_dim);

// Marginal-weight CSV, header "k,i,v".
void write_marginals_csv(const std::string& path, const SmoothingMarginals& marginals);

// Aggregate estimate CSV, header "k,estimate".
void write_estimates_csv(const std::string& path, const std::vector<double>& estimates);

// Filter-trace debug dump, header "k,i,log_weight,adjustment,ancestor,x..."
// (ancestor is -1 at time 0).
void write_trace_csv(const std::string& path, const FilterTrace& trace);

// Variance-report CSV, header "k,method,sigma_sq,tavc,std_err,efficiency,j_opt".
void write_variance_report_csv(const std::string& path, const VarianceReport& report);

}  // namespace psmooth
