#pragma once

#include "psmooth/model.hpp"
#include "psmooth/particle_cloud.hpp"
#include "psmooth/rng.hpp"

namespace psmooth {

// Auxiliary particle filter. One Rng drives a whole run; the draw order is
// fixed (time 0: positions for i = 0..N-1; each later step: ancestor uniforms
// for i = 0..N-1, then proposal draws for i = 0..N-1) so a run is
// bit-reproducible from its seed.

// Time-0 cloud: xi ~ rho_0, log w = log g_0 + (log rho - log rho_0).
ParticleCloud init_particles(const StateSpaceModel& model, int n_particles, Rng& rng);

// One auxiliary step from cloud k to k+1. Ancestors are drawn by inverse-CDF
// multinomial with probabilities proportional to w_k^i theta_k^i, positions
// from the proposal kernel, and the new log weights are
//   log g_{k+1} + log q_k - log theta_k(ancestor) - log r_k.
// Throws DegenerateCloudError when all selection weights or all new weights
// vanish.
ParticleCloud apf_step(const StateSpaceModel& model, const ParticleCloud& prev, Rng& rng);

// Full run over k = 0..model.horizon(). Accumulates per-step log normalisers
// and the normalising-constant estimate along the way.
FilterTrace run_filter(const StateSpaceModel& model, int n_particles, Rng& rng);

// Estimate of log Z recomputed from the stored clouds:
//   -(n+1) log N + sum_{k<n} log sum_i w_k^i theta_k^i + log sum_i w_n^i.
// run_filter stores the same value in FilterTrace::log_z; recomputing from
// the clouds is the reconstruction identity used in tests.
double log_z_estimate(const FilterTrace& trace);

}  // namespace psmooth
