#include "psmooth/growth_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "psmooth/numerics.hpp"

namespace psmooth {

void GrowthModelParams::validate() const {
  if (!(sigma0_sq > 0.0) || !(sigmaV_sq > 0.0) || !(sigmaW_sq > 0.0))
    throw std::invalid_argument("GrowthModelParams: variances must be strictly positive");
}

double growth_transition_mean(int k, double x) {
  return 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * std::cos(1.2 * static_cast<double>(k));
}

GrowthModel::GrowthModel(GrowthModelParams params, ObservationRecord obs)
    : params_(params), obs_(std::move(obs)) {
  params_.validate();
  obs_.validate();
  if (obs_.obs_dim != 1) throw std::invalid_argument("GrowthModel: obs_dim must be 1");
  cos_term_.resize(obs_.values.size());
  for (std::size_t k = 0; k < cos_term_.size(); ++k)
    cos_term_[k] = 8.0 * std::cos(1.2 * static_cast<double>(k + 1));
}

double GrowthModel::step_mean(int k, double x) const {
  // Destination time k+1 internal is k+2 in the 1-based convention, which is
  // exactly cos_term_[k+1].
  return 0.5 * x + 25.0 * x / (1.0 + x * x) + cos_term_[static_cast<std::size_t>(k) + 1];
}

double GrowthModel::initial_logdensity(ConstStateView x) const {
  return gaussian_logpdf(x[0], 0.0, params_.sigma0_sq);
}

double GrowthModel::initial_proposal_logdensity(ConstStateView x) const {
  return initial_logdensity(x);
}

void GrowthModel::sample_initial_proposal(Rng& rng, MutableStateView out) const {
  out[0] = rng.normal(0.0, params_.sigma0_sq);
}

double GrowthModel::transition_logdensity(int k, ConstStateView x, ConstStateView next) const {
  return gaussian_logpdf(next[0], step_mean(k, x[0]), params_.sigmaV_sq);
}

double GrowthModel::emission_logdensity(int k, ConstStateView x) const {
  const double y = obs_.values[static_cast<std::size_t>(k)];
  return gaussian_logpdf(y, x[0] * x[0] / 20.0, params_.sigmaW_sq);
}

double GrowthModel::proposal_logdensity(int k, ConstStateView x, ConstStateView next) const {
  return transition_logdensity(k, x, next);
}

void GrowthModel::sample_proposal(int k, ConstStateView x, Rng& rng, MutableStateView out) const {
  out[0] = rng.normal(step_mean(k, x[0]), params_.sigmaV_sq);
}

std::optional<double> GrowthModel::transition_density_bound() const {
  return 1.0 / std::sqrt(2.0 * std::numbers::pi * params_.sigmaV_sq);
}

SimulatedPath simulate_growth(const GrowthModelParams& params, int n_obs, Rng& rng) {
  if (n_obs < 1) throw std::invalid_argument("simulate_growth: n_obs must be >= 1");
  if (params.sigma0_sq < 0.0 || params.sigmaV_sq < 0.0 || params.sigmaW_sq < 0.0)
    throw std::invalid_argument("simulate_growth: variances must be nonnegative");
  SimulatedPath path;
  path.states.resize(n_obs);
  path.obs.obs_dim = 1;
  path.obs.values.resize(n_obs);
  const double s0 = std::sqrt(params.sigma0_sq);
  const double sv = std::sqrt(params.sigmaV_sq);
  const double sw = std::sqrt(params.sigmaW_sq);
  // Per time: state noise first, then observation noise.
  for (int k = 0; k < n_obs; ++k) {
    double x;
    if (k == 0) {
      x = s0 * rng.normal();
    } else {
      x = growth_transition_mean(k + 1, path.states[k - 1]) + sv * rng.normal();
    }
    path.states[k] = x;
    path.obs.values[k] = x * x / 20.0 + sw * rng.normal();
  }
  return path;
}

}  // namespace psmooth
