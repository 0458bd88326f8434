#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "psmooth/model.hpp"
#include "psmooth/particle_cloud.hpp"
#include "psmooth/rng.hpp"

namespace psmooth {

// One smoothed trajectory x_{0:n} drawn from a filter trace, with the particle
// indices that produced it (backward_indices[k] = J_k).
struct Trajectory {
  int state_dim = 1;
  std::vector<double> states;
  std::vector<int> backward_indices;

  int horizon() const { return static_cast<int>(backward_indices.size()) - 1; }
  ConstStateView state(int k) const {
    return ConstStateView(states.data() + static_cast<std::size_t>(k) * state_dim, state_dim);
  }
};

// Per-time particle weights of a marginal smoother: weights[k][i] is the mass
// the smoother puts on particle i of cloud k; each row sums to 1. pairwise,
// when requested, holds the joint weights of adjacent pairs:
// pairwise[k][i * N + j] is the mass on (particle i at k, particle j at k+1).
struct SmoothingMarginals {
  std::vector<std::vector<double>> weights;
  std::optional<std::vector<std::vector<double>>> pairwise;

  int horizon() const { return static_cast<int>(weights.size()) - 1; }
};

// Accept-reject bookkeeping for the backward sampler.
struct BackwardSamplerStats {
  long long proposals = 0;
  long long accepts = 0;
  long long fallbacks = 0;  // steps resolved by the exact categorical

  void merge(const BackwardSamplerStats& o) {
    proposals += o.proposals;
    accepts += o.accepts;
    fallbacks += o.fallbacks;
  }
};

// Backward-kernel weights at time k given the time-k+1 state x_next:
// out[i] proportional to w_k^i q_k(xi_k^i, x_next), normalised to sum 1.
// Throws DegenerateCloudError when every particle has zero mass.
std::vector<double> backward_weights(const FilterTrace& trace, const StateSpaceModel& model, int k,
                                     ConstStateView x_next);

// Exact backward draw: J_n from the normalised terminal weights, then
// J_k from backward_weights at the already selected next state; the
// trajectory state at k is particle J_k of cloud k.
Trajectory sample_backward_exact(const FilterTrace& trace, const StateSpaceModel& model, Rng& rng);

// Accept-reject backward draw. Candidates J* are proposed from the normalised
// time-k weights and accepted with probability q_k(xi_k^{J*}, x_next) /
// sigma_bar; after max_rejections failures at one step the step falls back to
// the exact categorical, so the output law equals sample_backward_exact.
// Requires model.transition_density_bound().
Trajectory sample_backward_ar(const FilterTrace& trace, const StateSpaceModel& model, Rng& rng,
                              int max_rejections, BackwardSamplerStats* stats = nullptr);

// J independent backward draws; draw j uses rng.substream(j), so the result
// does not depend on scheduling and the loop is parallelised when OpenMP is
// enabled. use_ar selects the accept-reject sampler (requires a density
// bound), otherwise the exact one.
std::vector<Trajectory> sample_backward_multi(const FilterTrace& trace,
                                              const StateSpaceModel& model, Rng& rng,
                                              int n_trajectories, bool use_ar, int max_rejections,
                                              BackwardSamplerStats* stats = nullptr);

// Genealogy trace: terminal index from the normalised terminal weights, then
// B_{k-1} = I_k^{B_k} along stored ancestors.
Trajectory extract_genealogy(const FilterTrace& trace, Rng& rng);

// Rao-Blackwellised genealogy: weights[k][i] = sum of normalised terminal
// weights of the particles whose time-k ancestor is i. Deterministic given
// the trace; cost O(n N).
SmoothingMarginals genealogy_marginals(const FilterTrace& trace);

// Backward-smoothing marginal recursion: v_n = normalised terminal weights,
// v_k = sum_j v_{k+1}^j bw_k(. | xi_{k+1}^j). Deterministic given the trace;
// cost O(n N^2) through the shared kernels. with_pairwise also fills the
// adjacent-pair joint weights w_k(i, j) = v_{k+1}^j bw_k(i | xi_{k+1}^j).
SmoothingMarginals backward_smoothing_marginals(const FilterTrace& trace,
                                                const StateSpaceModel& model,
                                                bool with_pairwise = false);

// sum_i weights[k][i] h(xi_k^i).
double smoothed_expectation(const FilterTrace& trace, const SmoothingMarginals& marginals, int k,
                            const std::function<double(ConstStateView)>& h);

}  // namespace psmooth
