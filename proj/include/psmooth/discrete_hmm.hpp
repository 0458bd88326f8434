#pragma once

#include <vector>

#include "psmooth/model.hpp"

namespace psmooth {

// Finite HMM over states {0..n_states-1} emitting symbols {0..n_symbols-1}.
// Matrices are row-major; transition rows and initial must each sum to 1,
// emission rows likewise. Because every conditional distribution is
// enumerable, exact filtering/smoothing is available via forward_backward and
// the model doubles as the ground-truth harness for the particle code.
struct DiscreteHmmParams {
  int n_states = 2;
  int n_symbols = 2;
  std::vector<double> initial;      // n_states
  std::vector<double> transition;   // n_states x n_states
  std::vector<double> emission;     // n_states x n_symbols

  void validate() const;

  double trans(int i, int j) const { return transition[static_cast<std::size_t>(i) * n_states + j]; }
  double emit(int i, int s) const { return emission[static_cast<std::size_t>(i) * n_symbols + s]; }
};

// Particle state = state index stored as a double. Densities are w.r.t.
// counting measure. Bootstrap configuration; the transition density bound is
// the largest transition matrix entry.
class DiscreteHmmModel final : public StateSpaceModel {
 public:
  DiscreteHmmModel(DiscreteHmmParams params, ObservationRecord obs);

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

  const DiscreteHmmParams& params() const { return params_; }

 private:
  int state_of(ConstStateView x) const;
  int symbol_at(int k) const;

  DiscreteHmmParams params_;
  ObservationRecord obs_;
};

// Exact smoothing by the scaled forward-backward recursion.
struct ForwardBackwardResult {
  // marginals[k][i] = P(X_k = i | y_{0:n}); filtered[k][i] = P(X_k = i | y_{0:k})
  std::vector<std::vector<double>> marginals;
  std::vector<std::vector<double>> filtered;
  // pairwise[k][i * n_states + j] = P(X_k = i, X_{k+1} = j | y_{0:n})
  std::vector<std::vector<double>> pairwise;
  double loglik = 0.0;
};

ForwardBackwardResult hmm_forward_backward(const DiscreteHmmParams& params,
                                           const ObservationRecord& obs);

SimulatedPath simulate_hmm(const DiscreteHmmParams& params, int n_obs, Rng& rng);

}  // namespace psmooth
