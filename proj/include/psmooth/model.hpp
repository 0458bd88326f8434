#pragma once

#include <optional>
#include <span>
#include <vector>

#include "psmooth/rng.hpp"

namespace psmooth {

using ConstStateView = std::span<const double>;
using MutableStateView = std::span<double>;

// Observation sequence y_{0:n}, stored flat with obs_dim values per time.
// Time indices are 0-based throughout the library.
struct ObservationRecord {
  int obs_dim = 1;
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()) / obs_dim; }
  ConstStateView at(int k) const {
    return ConstStateView(values.data() + static_cast<std::size_t>(k) * obs_dim, obs_dim);
  }

  // Throws std::invalid_argument unless there is at least one observation,
  // the layout is consistent and every entry is finite.
  void validate() const;
};

// State-space model as seen by the filter: initial law rho with a time-0
// proposal rho_0, Markov transition density q_k, observation density g_k
// (the observation y_k is bound at construction), a propagation proposal
// r_k and an adjustment-weight function theta_k. Densities are log-scale;
// -inf marks a point outside the support.
//
// Time runs over k = 0..horizon(). transition/proposal densities and
// proposal sampling at argument k describe the move from time k to k+1,
// so they require k < horizon().
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual int state_dim() const = 0;
  virtual int horizon() const = 0;  // final time index n; n+1 observations

  virtual double initial_logdensity(ConstStateView x) const = 0;
  virtual double initial_proposal_logdensity(ConstStateView x) const = 0;
  virtual void sample_initial_proposal(Rng& rng, MutableStateView out) const = 0;

  virtual double transition_logdensity(int k, ConstStateView x, ConstStateView next) const = 0;
  virtual double emission_logdensity(int k, ConstStateView x) const = 0;

  virtual double proposal_logdensity(int k, ConstStateView x, ConstStateView next) const = 0;
  virtual void sample_proposal(int k, ConstStateView x, Rng& rng, MutableStateView out) const = 0;

  // Multiplicative selection adjustment theta_k(x); must be > 0. The default
  // (identity) together with r = q is the bootstrap configuration.
  virtual double adjustment_weight(int /*k*/, ConstStateView /*x*/) const { return 1.0; }

  // Uniform bound sigma_bar with q_k(x, x') <= sigma_bar for all k, x, x';
  // enables accept-reject backward sampling when present.
  virtual std::optional<double> transition_density_bound() const { return std::nullopt; }
};

// Latent path and matching observations drawn from a generative law.
// states holds state_dim values per time. Simulators allow zero noise
// variances (point-mass noise) even though filtering forbids them.
struct SimulatedPath {
  std::vector<double> states;
  ObservationRecord obs;
};

}  // namespace psmooth
