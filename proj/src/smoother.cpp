#include "psmooth/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "psmooth/kernels.hpp"
#include "psmooth/numerics.hpp"

namespace psmooth {

namespace {

void check_trace(const FilterTrace& trace) {
  if (trace.clouds.empty()) throw std::invalid_argument("empty filter trace");
}

// Normalised weights of one cloud; throws if the cloud is degenerate.
std::vector<double> normalised_weights(const ParticleCloud& cloud) {
  std::vector<double> probs(static_cast<std::size_t>(cloud.size()));
  if (!(normalized_exp(cloud.log_weights, probs) > kNegInf))
    throw DegenerateCloudError(cloud.time_index, "all weights are zero");
  return probs;
}

std::vector<double> weight_cdf(const ParticleCloud& cloud) {
  auto probs = normalised_weights(cloud);
  std::vector<double> cdf(probs.size());
  inclusive_prefix_sums(probs, cdf);
  return cdf;
}

void copy_state(const ParticleCloud& cloud, int i, Trajectory& out, int k) {
  std::memcpy(out.states.data() + static_cast<std::size_t>(k) * cloud.state_dim,
              cloud.positions.data() + static_cast<std::size_t>(i) * cloud.state_dim,
              sizeof(double) * static_cast<std::size_t>(cloud.state_dim));
}

Trajectory make_empty_trajectory(const FilterTrace& trace) {
  Trajectory t;
  t.state_dim = trace.clouds.front().state_dim;
  t.states.resize((static_cast<std::size_t>(trace.horizon()) + 1) * t.state_dim);
  t.backward_indices.resize(static_cast<std::size_t>(trace.horizon()) + 1);
  return t;
}

}  // namespace

std::vector<double> backward_weights(const FilterTrace& trace, const StateSpaceModel& model, int k,
                                     ConstStateView x_next) {
  check_trace(trace);
  if (k < 0 || k >= trace.horizon())
    throw std::invalid_argument("backward_weights: need 0 <= k < horizon");
  const auto& cloud = trace.clouds[static_cast<std::size_t>(k)];
  std::vector<double> logits(static_cast<std::size_t>(cloud.size()));
  for (int i = 0; i < cloud.size(); ++i)
    logits[static_cast<std::size_t>(i)] =
        cloud.log_weights[static_cast<std::size_t>(i)] +
        model.transition_logdensity(k, cloud.position(i), x_next);
  std::vector<double> probs(logits.size());
  if (!(normalized_exp(logits, probs) > kNegInf))
    throw DegenerateCloudError(k, "backward kernel has zero mass");
  return probs;
}

Trajectory sample_backward_exact(const FilterTrace& trace, const StateSpaceModel& model, Rng& rng) {
  check_trace(trace);
  const int n = trace.horizon();
  Trajectory out = make_empty_trajectory(trace);

  {
    const auto cdf = weight_cdf(trace.clouds[static_cast<std::size_t>(n)]);
    out.backward_indices[static_cast<std::size_t>(n)] = sample_from_cdf(cdf, rng.uniform());
    copy_state(trace.clouds[static_cast<std::size_t>(n)],
               out.backward_indices[static_cast<std::size_t>(n)], out, n);
  }
  for (int k = n - 1; k >= 0; --k) {
    const auto probs = backward_weights(trace, model, k, out.state(k + 1));
    std::vector<double> cdf(probs.size());
    inclusive_prefix_sums(probs, cdf);
    const int j = sample_from_cdf(cdf, rng.uniform());
    out.backward_indices[static_cast<std::size_t>(k)] = j;
    copy_state(trace.clouds[static_cast<std::size_t>(k)], j, out, k);
  }
  return out;
}

Trajectory sample_backward_ar(const FilterTrace& trace, const StateSpaceModel& model, Rng& rng,
                              int max_rejections, BackwardSamplerStats* stats) {
  check_trace(trace);
  if (max_rejections < 1) throw std::invalid_argument("sample_backward_ar: max_rejections >= 1");
  const auto bound = model.transition_density_bound();
  if (!bound || !(*bound > 0.0))
    throw std::invalid_argument("sample_backward_ar: model has no transition density bound");
  const double log_bound = std::log(*bound);

  const int n = trace.horizon();
  Trajectory out = make_empty_trajectory(trace);
  BackwardSamplerStats local;

  {
    const auto cdf = weight_cdf(trace.clouds[static_cast<std::size_t>(n)]);
    out.backward_indices[static_cast<std::size_t>(n)] = sample_from_cdf(cdf, rng.uniform());
    copy_state(trace.clouds[static_cast<std::size_t>(n)],
               out.backward_indices[static_cast<std::size_t>(n)], out, n);
  }
  for (int k = n - 1; k >= 0; --k) {
    const auto& cloud = trace.clouds[static_cast<std::size_t>(k)];
    const auto cdf = weight_cdf(cloud);
    const auto x_next = out.state(k + 1);
    int chosen = -1;
    for (int attempt = 0; attempt < max_rejections; ++attempt) {
      const int cand = sample_from_cdf(cdf, rng.uniform());
      ++local.proposals;
      const double log_q = model.transition_logdensity(k, cloud.position(cand), x_next);
      // Accept with probability q / sigma_bar. log(1-u) lies in (-inf, 0], so
      // q == sigma_bar always accepts and log_q = -inf never does.
      if (std::log(1.0 - rng.uniform()) <= log_q - log_bound) {
        ++local.accepts;
        chosen = cand;
        break;
      }
    }
    if (chosen < 0) {
      ++local.fallbacks;
      const auto probs = backward_weights(trace, model, k, x_next);
      std::vector<double> bw_cdf(probs.size());
      inclusive_prefix_sums(probs, bw_cdf);
      chosen = sample_from_cdf(bw_cdf, rng.uniform());
    }
    out.backward_indices[static_cast<std::size_t>(k)] = chosen;
    copy_state(cloud, chosen, out, k);
  }
  if (stats) stats->merge(local);
  return out;
}

std::vector<Trajectory> sample_backward_multi(const FilterTrace& trace,
                                              const StateSpaceModel& model, Rng& rng,
                                              int n_trajectories, bool use_ar, int max_rejections,
                                              BackwardSamplerStats* stats) {
  if (n_trajectories < 1)
    throw std::invalid_argument("sample_backward_multi: need at least one trajectory");
  std::vector<Trajectory> out(static_cast<std::size_t>(n_trajectories));
  std::vector<BackwardSamplerStats> per_draw(static_cast<std::size_t>(n_trajectories));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_trajectories));
  const bool parallel = kernels::parallel_enabled();
#pragma omp parallel for schedule(static) if (parallel)
  for (int j = 0; j < n_trajectories; ++j) {
    try {
      Rng draw_rng = rng.substream(static_cast<std::uint64_t>(j));
      out[static_cast<std::size_t>(j)] =
          use_ar ? sample_backward_ar(trace, model, draw_rng, max_rejections,
                                      &per_draw[static_cast<std::size_t>(j)])
                 : sample_backward_exact(trace, model, draw_rng);
    } catch (...) {
      errors[static_cast<std::size_t>(j)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (stats)
    for (const auto& s : per_draw) stats->merge(s);
  return out;
}

Trajectory extract_genealogy(const FilterTrace& trace, Rng& rng) {
  check_trace(trace);
  const int n = trace.horizon();
  Trajectory out = make_empty_trajectory(trace);
  const auto cdf = weight_cdf(trace.clouds[static_cast<std::size_t>(n)]);
  int idx = sample_from_cdf(cdf, rng.uniform());
  for (int k = n; k >= 0; --k) {
    out.backward_indices[static_cast<std::size_t>(k)] = idx;
    copy_state(trace.clouds[static_cast<std::size_t>(k)], idx, out, k);
    if (k > 0) idx = trace.clouds[static_cast<std::size_t>(k)].ancestors[static_cast<std::size_t>(idx)];
  }
  return out;
}

SmoothingMarginals genealogy_marginals(const FilterTrace& trace) {
  check_trace(trace);
  const int n = trace.horizon();
  const int N = trace.particle_count();
  SmoothingMarginals out;
  out.weights.assign(static_cast<std::size_t>(n) + 1, std::vector<double>(N, 0.0));

  const auto terminal = normalised_weights(trace.clouds[static_cast<std::size_t>(n)]);
  // lineage[j] = time-k ancestor of terminal particle j, walked backwards.
  std::vector<int> lineage(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) lineage[static_cast<std::size_t>(j)] = j;
  for (int k = n; k >= 0; --k) {
    auto& w = out.weights[static_cast<std::size_t>(k)];
    for (int j = 0; j < N; ++j) w[static_cast<std::size_t>(lineage[static_cast<std::size_t>(j)])] +=
        terminal[static_cast<std::size_t>(j)];
    if (k > 0) {
      const auto& anc = trace.clouds[static_cast<std::size_t>(k)].ancestors;
      for (int j = 0; j < N; ++j)
        lineage[static_cast<std::size_t>(j)] =
            anc[static_cast<std::size_t>(lineage[static_cast<std::size_t>(j)])];
    }
  }
  return out;
}

SmoothingMarginals backward_smoothing_marginals(const FilterTrace& trace,
                                                const StateSpaceModel& model, bool with_pairwise) {
  check_trace(trace);
  const int n = trace.horizon();
  const int N = trace.particle_count();
  SmoothingMarginals out;
  out.weights.assign(static_cast<std::size_t>(n) + 1, std::vector<double>(N, 0.0));
  if (with_pairwise)
    out.pairwise.emplace(static_cast<std::size_t>(std::max(n, 0)),
                         std::vector<double>(static_cast<std::size_t>(N) * N, 0.0));

  out.weights[static_cast<std::size_t>(n)] =
      normalised_weights(trace.clouds[static_cast<std::size_t>(n)]);

  std::vector<double> L(static_cast<std::size_t>(N) * N);
  for (int k = n - 1; k >= 0; --k) {
    const auto& cloud = trace.clouds[static_cast<std::size_t>(k)];
    const auto& next_cloud = trace.clouds[static_cast<std::size_t>(k) + 1];
    kernels::transition_matrix(model, k, cloud, next_cloud, L);
    kernels::backward_marginal_step(cloud.log_weights, L, N, N,
                                    out.weights[static_cast<std::size_t>(k) + 1],
                                    out.weights[static_cast<std::size_t>(k)], k, with_pairwise);
    if (with_pairwise) {
      // L now holds bw_k(i | xi_{k+1}^j); scale columns by v_{k+1}^j.
      auto& pw = (*out.pairwise)[static_cast<std::size_t>(k)];
      const auto& v_next = out.weights[static_cast<std::size_t>(k) + 1];
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          pw[static_cast<std::size_t>(i) * N + j] =
              L[static_cast<std::size_t>(i) * N + j] * v_next[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

double smoothed_expectation(const FilterTrace& trace, const SmoothingMarginals& marginals, int k,
                            const std::function<double(ConstStateView)>& h) {
  if (k < 0 || k > marginals.horizon())
    throw std::invalid_argument("smoothed_expectation: time index out of range");
  const auto& cloud = trace.clouds[static_cast<std::size_t>(k)];
  const auto& w = marginals.weights[static_cast<std::size_t>(k)];
  double acc = 0.0;
  for (int i = 0; i < cloud.size(); ++i) acc += w[static_cast<std::size_t>(i)] * h(cloud.position(i));
  return acc;
}

}  // namespace psmooth
