#include "psmooth/linear_gaussian.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "psmooth/numerics.hpp"

namespace psmooth {

void LinearGaussianParams::validate() const {
  if (!(state_noise_var > 0.0) || !(obs_noise_var > 0.0) || !(init_var > 0.0))
    throw std::invalid_argument("LinearGaussianParams: variances must be strictly positive");
  if (!std::isfinite(phi) || !std::isfinite(obs_coeff) || !std::isfinite(init_mean))
    throw std::invalid_argument("LinearGaussianParams: coefficients must be finite");
}

LinearGaussianModel::LinearGaussianModel(LinearGaussianParams params, ObservationRecord obs)
    : params_(params), obs_(std::move(obs)) {
  params_.validate();
  obs_.validate();
  if (obs_.obs_dim != 1) throw std::invalid_argument("LinearGaussianModel: obs_dim must be 1");
}

double LinearGaussianModel::initial_logdensity(ConstStateView x) const {
  return gaussian_logpdf(x[0], params_.init_mean, params_.init_var);
}

double LinearGaussianModel::initial_proposal_logdensity(ConstStateView x) const {
  return initial_logdensity(x);
}

void LinearGaussianModel::sample_initial_proposal(Rng& rng, MutableStateView out) const {
  out[0] = rng.normal(params_.init_mean, params_.init_var);
}

double LinearGaussianModel::transition_logdensity(int, ConstStateView x, ConstStateView next) const {
  return gaussian_logpdf(next[0], params_.phi * x[0], params_.state_noise_var);
}

double LinearGaussianModel::emission_logdensity(int k, ConstStateView x) const {
  const double y = obs_.values[static_cast<std::size_t>(k)];
  return gaussian_logpdf(y, params_.obs_coeff * x[0], params_.obs_noise_var);
}

double LinearGaussianModel::proposal_logdensity(int k, ConstStateView x, ConstStateView next) const {
  return transition_logdensity(k, x, next);
}

void LinearGaussianModel::sample_proposal(int, ConstStateView x, Rng& rng, MutableStateView out) const {
  out[0] = rng.normal(params_.phi * x[0], params_.state_noise_var);
}

std::optional<double> LinearGaussianModel::transition_density_bound() const {
  return 1.0 / std::sqrt(2.0 * std::numbers::pi * params_.state_noise_var);
}

KalmanSmootherResult kalman_smoother(const LinearGaussianParams& params,
                                     const ObservationRecord& obs) {
  params.validate();
  obs.validate();
  if (obs.obs_dim != 1) throw std::invalid_argument("kalman_smoother: obs_dim must be 1");
  const int n1 = obs.size();
  const double phi = params.phi, q = params.state_noise_var;
  const double c = params.obs_coeff, r = params.obs_noise_var;

  std::vector<double> pred_m(n1), pred_v(n1), filt_m(n1), filt_v(n1);
  KalmanSmootherResult res;
  res.loglik = 0.0;
  for (int k = 0; k < n1; ++k) {
    if (k == 0) {
      pred_m[k] = params.init_mean;
      pred_v[k] = params.init_var;
    } else {
      pred_m[k] = phi * filt_m[k - 1];
      pred_v[k] = phi * phi * filt_v[k - 1] + q;
    }
    const double y = obs.values[static_cast<std::size_t>(k)];
    const double s = c * c * pred_v[k] + r;
    const double gain = pred_v[k] * c / s;
    filt_m[k] = pred_m[k] + gain * (y - c * pred_m[k]);
    filt_v[k] = (1.0 - gain * c) * pred_v[k];
    res.loglik += gaussian_logpdf(y, c * pred_m[k], s);
  }

  res.smoothed_means = filt_m;
  res.smoothed_vars = filt_v;
  for (int k = n1 - 2; k >= 0; --k) {
    const double g = filt_v[k] * phi / pred_v[k + 1];
    res.smoothed_means[k] = filt_m[k] + g * (res.smoothed_means[k + 1] - pred_m[k + 1]);
    res.smoothed_vars[k] = filt_v[k] + g * g * (res.smoothed_vars[k + 1] - pred_v[k + 1]);
  }
  res.filtered_means = std::move(filt_m);
  res.filtered_vars = std::move(filt_v);
  return res;
}

SimulatedPath simulate_linear_gaussian(const LinearGaussianParams& params, int n_obs, Rng& rng) {
  if (n_obs < 1) throw std::invalid_argument("simulate_linear_gaussian: n_obs must be >= 1");
  if (params.state_noise_var < 0.0 || params.obs_noise_var < 0.0 || params.init_var < 0.0)
    throw std::invalid_argument("simulate_linear_gaussian: variances must be nonnegative");
  SimulatedPath path;
  path.states.resize(n_obs);
  path.obs.obs_dim = 1;
  path.obs.values.resize(n_obs);
  const double s0 = std::sqrt(params.init_var);
  const double sq = std::sqrt(params.state_noise_var);
  const double sr = std::sqrt(params.obs_noise_var);
  for (int k = 0; k < n_obs; ++k) {
    const double x = (k == 0) ? params.init_mean + s0 * rng.normal()
                              : params.phi * path.states[k - 1] + sq * rng.normal();
    path.states[k] = x;
    path.obs.values[k] = params.obs_coeff * x + sr * rng.normal();
  }
  return path;
}

}  // namespace psmooth
