#pragma once

#include <span>
#include <string>
#include <vector>

namespace psmooth {

// Time-average variance constant of a per-sweep scalar series, by the
// truncated and tapered autocovariance sum
//   gamma(0) + 2 sum_{l=1}^{ceil(sqrt(R))-1} (1 - l/R) gamma(l),
// with gamma(l) = (1/R) sum_{t} (x_t - xbar)(x_{t+l} - xbar). A negative sum
// is floored at zero (floored flag); nonstationary is set when the first- and
// last-quarter means differ by more than 5 estimated standard errors, which
// catches trending series the estimator is not valid for.
struct TavcEstimate {
  double value = 0.0;
  bool floored = false;
  bool nonstationary = false;
};

TavcEstimate tavc(std::span<const double> series);  // needs at least 4 points

// Mean over sweeps of the per-sweep unbiased sample variance: values[r] holds
// the J trajectory values of sweep r at one fixed time.
double within_cloud_variance(const std::vector<std::vector<double>>& values);

// Asymptotic variance of the J-trajectory backward-sampling estimator over R
// sweeps: (sigma_sq / J + tavc_bsm) / R, where tavc_bsm is the time-average
// variance constant of the per-sweep conditional means.
double estimator_variance(double sigma_sq, double tavc_bsm, int n_trajectories, int n_sweeps);

// Trajectory count balancing per-sweep sampling cost against chain mixing:
// sqrt((sigma_sq / tau_bs) / (tavc_bsm / tau_pf)). All inputs must be > 0.
double j_opt(double sigma_sq, double tavc_bsm, double tau_bs_s, double tau_pf_s);

// Nearest integer (at least 1) to the geometric mean of per-time j_opt values.
int recommended_j(std::span<const double> per_time_j_opt);

// 1 / (variance * total_time_s); both inputs must be > 0.
double efficiency(double variance, double total_time_s);

// One analysed method at one time point; the shape written by the report CSV.
struct VarianceReportRow {
  int k = 0;
  std::string method;
  double sigma_sq = 0.0;  // NaN when the method has no within-sweep spread
  double tavc = 0.0;
  double std_err = 0.0;
  double efficiency = 0.0;
  double j_opt = 0.0;  // NaN except for the backward-sampling method
};

struct VarianceReport {
  std::vector<VarianceReportRow> rows;
  bool tavc_floored = false;
  bool tavc_nonstationary = false;
};

}  // namespace psmooth
