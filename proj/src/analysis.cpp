#include "psmooth/analysis.hpp"

#include <cmath>
#include <stdexcept>

#include "psmooth/numerics.hpp"

namespace psmooth {

TavcEstimate tavc(std::span<const double> series) {
  const int R = static_cast<int>(series.size());
  if (R < 4) throw std::invalid_argument("tavc: need at least 4 points");
  const double m = mean(series);
  const int n_lags = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(R))));

  auto gamma = [&](int lag) {
    double acc = 0.0;
    for (int t = 0; t + lag < R; ++t)
      acc += (series[static_cast<std::size_t>(t)] - m) *
             (series[static_cast<std::size_t>(t + lag)] - m);
    return acc / static_cast<double>(R);
  };

  double value = gamma(0);
  for (int lag = 1; lag < n_lags; ++lag)
    value += 2.0 * (1.0 - static_cast<double>(lag) / static_cast<double>(R)) * gamma(lag);

  TavcEstimate out;
  out.floored = value < 0.0;
  out.value = std::max(value, 0.0);

  // Quarter-mean drift check. The standard error of each quarter mean is
  // estimated from the plain sample variance, which is conservative enough to
  // flag a deterministic trend without tripping on stationary noise.
  const int q = R / 4;
  if (q >= 2) {
    const double m_first = mean(series.subspan(0, static_cast<std::size_t>(q)));
    const double m_last = mean(series.subspan(static_cast<std::size_t>(R - q)));
    const double v = sample_variance(series);
    const double se_diff = std::sqrt(2.0 * v / static_cast<double>(q));
    if (se_diff == 0.0) {
      out.nonstationary = m_first != m_last;
    } else {
      out.nonstationary = std::abs(m_first - m_last) > 5.0 * se_diff;
    }
  }
  return out;
}

double within_cloud_variance(const std::vector<std::vector<double>>& values) {
  if (values.empty()) throw std::invalid_argument("within_cloud_variance: no sweeps");
  double acc = 0.0;
  for (const auto& sweep : values) acc += sample_variance(sweep);
  return acc / static_cast<double>(values.size());
}

double estimator_variance(double sigma_sq, double tavc_bsm, int n_trajectories, int n_sweeps) {
  if (!(sigma_sq >= 0.0) || !(tavc_bsm >= 0.0))
    throw std::invalid_argument("estimator_variance: variance inputs must be >= 0");
  if (n_trajectories < 1 || n_sweeps < 1)
    throw std::invalid_argument("estimator_variance: counts must be >= 1");
  return (sigma_sq / static_cast<double>(n_trajectories) + tavc_bsm) /
         static_cast<double>(n_sweeps);
}

double j_opt(double sigma_sq, double tavc_bsm, double tau_bs_s, double tau_pf_s) {
  if (!(sigma_sq > 0.0) || !(tavc_bsm > 0.0) || !(tau_bs_s > 0.0) || !(tau_pf_s > 0.0))
    throw std::invalid_argument("j_opt: all inputs must be > 0");
  return std::sqrt((sigma_sq / tau_bs_s) / (tavc_bsm / tau_pf_s));
}

int recommended_j(std::span<const double> per_time_j_opt) {
  const double g = geometric_mean(per_time_j_opt);
  return std::max(1, static_cast<int>(std::lround(g)));
}

double efficiency(double variance, double total_time_s) {
  if (!(variance > 0.0) || !(total_time_s > 0.0))
    throw std::invalid_argument("efficiency: variance and time must be > 0");
  return 1.0 / (variance * total_time_s);
}

}  // namespace psmooth
