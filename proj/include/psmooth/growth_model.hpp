#pragma once

#include <vector>

#include "psmooth/model.hpp"

namespace psmooth {

struct GrowthModelParams {
  double sigma0_sq = 5.0;   // variance of the time-0 state
  double sigmaV_sq = 10.0;  // state noise variance
  double sigmaW_sq = 1.0;   // observation noise variance

  // Filtering requires strictly positive variances.
  void validate() const;
};

// Drift of the nonlinear growth dynamics, in the 1-based time convention of
// the classic benchmark: the state at time k has conditional mean
// x/2 + 25x/(1+x^2) + 8cos(1.2k) given the previous state x.
double growth_transition_mean(int k, double x);

// Scalar nonlinear benchmark model. Dynamics (1-based time k, internally the
// record index is k-1):
//   X_1 ~ N(0, sigma0_sq)
//   X_k = X_{k-1}/2 + 25 X_{k-1}/(1+X_{k-1}^2) + 8 cos(1.2 k) + V_k
//   Y_k = X_k^2 / 20 + W_k
// with V_k ~ N(0, sigmaV_sq), W_k ~ N(0, sigmaW_sq). Runs as a bootstrap
// filter: proposal = dynamics, adjustment weights identically 1. The
// transition density is bounded by 1/sqrt(2 pi sigmaV_sq).
class GrowthModel final : public StateSpaceModel {
 public:
  GrowthModel(GrowthModelParams params, ObservationRecord obs);

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

  const GrowthModelParams& params() const { return params_; }

 private:
  double step_mean(int k, double x) const;  // mean of X_{k+1} given X_k = x, 0-based k

  GrowthModelParams params_;
  ObservationRecord obs_;
  std::vector<double> cos_term_;  // 8 cos(1.2 * (k+1)) for internal k = 0..n
};

// n_obs is the record length (time indices 0..n_obs-1).
SimulatedPath simulate_growth(const GrowthModelParams& params, int n_obs, Rng& rng);

}  // namespace psmooth
