#include "psmooth/filter.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "psmooth/kernels.hpp"
#include "psmooth/numerics.hpp"

namespace psmooth {

namespace {

// log sum_i w_k^i theta_k^i together with the inclusive CDF of the selection
// probabilities; -inf total marks a degenerate cloud.
double selection_cdf(const ParticleCloud& cloud, std::vector<double>& cdf) {
  const int n = cloud.size();
  std::vector<double> logits(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    logits[static_cast<std::size_t>(i)] =
        cloud.log_weights[static_cast<std::size_t>(i)] +
        std::log(cloud.adjustment_weights[static_cast<std::size_t>(i)]);
  std::vector<double> probs(static_cast<std::size_t>(n));
  const double log_norm = normalized_exp(logits, probs);
  cdf.resize(static_cast<std::size_t>(n));
  inclusive_prefix_sums(probs, cdf);
  return log_norm;
}

}  // namespace

ParticleCloud init_particles(const StateSpaceModel& model, int n_particles, Rng& rng) {
  if (n_particles < 1) throw std::invalid_argument("init_particles: need at least one particle");
  ParticleCloud cloud;
  cloud.time_index = 0;
  cloud.state_dim = model.state_dim();
  cloud.positions.resize(static_cast<std::size_t>(n_particles) * cloud.state_dim);
  cloud.log_weights.resize(static_cast<std::size_t>(n_particles));
  cloud.adjustment_weights.resize(static_cast<std::size_t>(n_particles));

  for (int i = 0; i < n_particles; ++i) model.sample_initial_proposal(rng, cloud.position_mut(i));

  bool any_alive = false;
  for (int i = 0; i < n_particles; ++i) {
    const auto x = cloud.position(i);
    const double g = model.emission_logdensity(0, x);
    double lw = kNegInf;
    if (g > kNegInf) {
      // Radon-Nikodym correction of the time-0 proposal against the prior;
      // identically zero when rho_0 = rho.
      lw = g + model.initial_logdensity(x) - model.initial_proposal_logdensity(x);
    }
    cloud.log_weights[static_cast<std::size_t>(i)] = lw;
    any_alive = any_alive || lw > kNegInf;
  }
  if (!any_alive) throw DegenerateCloudError(0, "all initial weights are zero");
  kernels::adjustment_weights(model, 0, cloud.positions, n_particles,
                              cloud.adjustment_weights);
  return cloud;
}

ParticleCloud apf_step(const StateSpaceModel& model, const ParticleCloud& prev, Rng& rng) {
  const int n = prev.size();
  if (n < 1) throw std::invalid_argument("apf_step: empty cloud");
  if (prev.time_index >= model.horizon())
    throw std::invalid_argument("apf_step: cloud already at the final time index");

  std::vector<double> cdf;
  const double log_norm = selection_cdf(prev, cdf);
  if (!(log_norm > kNegInf))
    throw DegenerateCloudError(prev.time_index, "all selection weights are zero");

  ParticleCloud next;
  next.time_index = prev.time_index + 1;
  next.state_dim = prev.state_dim;
  next.positions.resize(prev.positions.size());
  next.log_weights.resize(static_cast<std::size_t>(n));
  next.adjustment_weights.resize(static_cast<std::size_t>(n));
  next.ancestors.resize(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i)
    next.ancestors[static_cast<std::size_t>(i)] = sample_from_cdf(cdf, rng.uniform());
  for (int i = 0; i < n; ++i)
    model.sample_proposal(prev.time_index, prev.position(next.ancestors[static_cast<std::size_t>(i)]),
                          rng, next.position_mut(i));

  kernels::step_log_weights(model, prev, next.ancestors, next.positions, next.log_weights);

  bool any_alive = false;
  for (double lw : next.log_weights) any_alive = any_alive || lw > kNegInf;
  if (!any_alive) throw DegenerateCloudError(next.time_index, "all propagated weights are zero");

  kernels::adjustment_weights(model, next.time_index, next.positions, n, next.adjustment_weights);
  return next;
}

FilterTrace run_filter(const StateSpaceModel& model, int n_particles, Rng& rng) {
  const int n = model.horizon();
  FilterTrace trace;
  trace.clouds.reserve(static_cast<std::size_t>(n) + 1);
  trace.per_step_log_norms.resize(static_cast<std::size_t>(n) + 1);

  trace.clouds.push_back(init_particles(model, n_particles, rng));
  for (int k = 0; k < n; ++k) {
    std::vector<double> cdf_unused;
    trace.per_step_log_norms[static_cast<std::size_t>(k)] =
        selection_cdf(trace.clouds.back(), cdf_unused);
    trace.clouds.push_back(apf_step(model, trace.clouds.back(), rng));
  }
  trace.per_step_log_norms[static_cast<std::size_t>(n)] = logsumexp(trace.clouds.back().log_weights);

  double acc = -(static_cast<double>(n) + 1.0) * std::log(static_cast<double>(n_particles));
  for (double v : trace.per_step_log_norms) acc += v;
  trace.log_z = acc;
  return trace;
}

double log_z_estimate(const FilterTrace& trace) {
  if (trace.clouds.empty()) throw std::invalid_argument("log_z_estimate: empty trace");
  const int n = trace.horizon();
  const double N = static_cast<double>(trace.particle_count());
  double acc = -(static_cast<double>(n) + 1.0) * std::log(N);
  for (int k = 0; k < n; ++k) {
    const auto& cloud = trace.clouds[static_cast<std::size_t>(k)];
    std::vector<double> logits(static_cast<std::size_t>(cloud.size()));
    for (int i = 0; i < cloud.size(); ++i)
      logits[static_cast<std::size_t>(i)] =
          cloud.log_weights[static_cast<std::size_t>(i)] +
          std::log(cloud.adjustment_weights[static_cast<std::size_t>(i)]);
    const double v = logsumexp(logits);
    if (!(v > kNegInf)) throw DegenerateCloudError(k, "all selection weights are zero");
    acc += v;
  }
  const double last = logsumexp(trace.clouds[static_cast<std::size_t>(n)].log_weights);
  if (!(last > kNegInf)) throw DegenerateCloudError(n, "all terminal weights are zero");
  return acc + last;
}

}  // namespace psmooth
