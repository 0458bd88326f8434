#pragma once

#include <vector>

#include "psmooth/model.hpp"

namespace psmooth {

struct LinearGaussianParams {
  double phi = 0.9;             // state autoregression coefficient
  double state_noise_var = 1.0;
  double obs_coeff = 1.0;
  double obs_noise_var = 1.0;
  double init_mean = 0.0;
  double init_var = 1.0;

  void validate() const;  // noise variances and init_var strictly positive
};

// X_0 ~ N(init_mean, init_var), X_{k+1} = phi X_k + N(0, state_noise_var),
// Y_k = obs_coeff X_k + N(0, obs_noise_var). Bootstrap configuration.
// Exact smoothing is available through kalman_smoother, which makes this the
// closed-form reference model for the particle methods.
class LinearGaussianModel final : public StateSpaceModel {
 public:
  LinearGaussianModel(LinearGaussianParams params, ObservationRecord obs);

  int state_dim() const override { return 1; }
  int horizon() const override { return static_cast<int>(obs_.values.size()) - 1; }

  double initial_logdensity(ConstStateView x) const override;
  double initial_proposal_logdensity(ConstStateView x) const override;
  void sample_initial_proposal(Rng& rng, MutableStateView out) const override;

  double transition_logdensity(int k, ConstStateView x, ConstStateView next) const override;
  double emission_logdensity(int k, ConstStateView x) const override;

  double proposal_logdensity(int k, ConstStateView x, ConstStateView next) const override;
  void sample_proposal(int k, ConstStateView x, Rng& rng, MutableStateView out) const override;

  std::optional<double> transition_density_bound() const override;

  const LinearGaussianParams& params() const { return params_; }

 private:
  LinearGaussianParams params_;
  ObservationRecord obs_;
};

// Exact marginal smoothing result: per-time smoothed means/variances of
// X_k given y_{0:n}, plus the data log-likelihood.
struct KalmanSmootherResult {
  std::vector<double> smoothed_means;
  std::vector<double> smoothed_vars;
  std::vector<double> filtered_means;
  std::vector<double> filtered_vars;
  double loglik = 0.0;
};

KalmanSmootherResult kalman_smoother(const LinearGaussianParams& params,
                                     const ObservationRecord& obs);

SimulatedPath simulate_linear_gaussian(const LinearGaussianParams& params, int n_obs, Rng& rng);

}  // namespace psmooth
