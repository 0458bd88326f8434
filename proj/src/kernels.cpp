#include "psmooth/kernels.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "psmooth/numerics.hpp"

namespace psmooth::kernels {

namespace {

std::atomic<bool> g_parallel{
#ifdef _OPENMP
    true
#else
    false
#endif
};

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }

void transition_matrix_serial(const StateSpaceModel& model, int k, const ParticleCloud& from,
                              const ParticleCloud& to, std::span<double> out) {
  const int n_from = from.size(), n_to = to.size();
  for (int i = 0; i < n_from; ++i) {
    const auto xi = from.position(i);
    double* row = out.data() + static_cast<std::size_t>(i) * n_to;
    for (int j = 0; j < n_to; ++j) row[j] = model.transition_logdensity(k, xi, to.position(j));
  }
}

void transition_matrix_omp(const StateSpaceModel& model, int k, const ParticleCloud& from,
                           const ParticleCloud& to, std::span<double> out) {
  const int n_from = from.size(), n_to = to.size();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_from; ++i) {
    const auto xi = from.position(i);
    double* row = out.data() + static_cast<std::size_t>(i) * n_to;
    for (int j = 0; j < n_to; ++j) row[j] = model.transition_logdensity(k, xi, to.position(j));
  }
}

void transition_matrix(const StateSpaceModel& model, int k, const ParticleCloud& from,
                       const ParticleCloud& to, std::span<double> out) {
  if (parallel_enabled())
    transition_matrix_omp(model, k, from, to, out);
  else
    transition_matrix_serial(model, k, from, to, out);
}

namespace {

// Column pass shared by both variants: per-column max and normaliser of
// exp(log_w[i] + L[i, j]).
inline void column_stats(std::span<const double> log_w, std::span<const double> L, int n_from,
                         int n_to, int j, double& max_out, double& denom_out) {
  double m = kNegInf;
  for (int i = 0; i < n_from; ++i) {
    const double v = log_w[static_cast<std::size_t>(i)] + L[static_cast<std::size_t>(i) * n_to + j];
    if (v > m) m = v;
  }
  double d = 0.0;
  if (m > kNegInf) {
    for (int i = 0; i < n_from; ++i) {
      const double v = log_w[static_cast<std::size_t>(i)] + L[static_cast<std::size_t>(i) * n_to + j];
      d += std::exp(v - m);
    }
  }
  max_out = m;
  denom_out = d;
}

inline double row_accumulate(std::span<const double> log_w, std::span<const double> L,
                             int n_to, int i, std::span<const double> v_next,
                             std::span<const double> col_max, std::span<const double> col_den,
                             std::span<double> L_mut, bool keep) {
  const double lw = log_w[static_cast<std::size_t>(i)];
  const double* row = L.data() + static_cast<std::size_t>(i) * n_to;
  double acc = 0.0;
  for (int j = 0; j < n_to; ++j) {
    const double bw = std::exp(lw + row[j] - col_max[static_cast<std::size_t>(j)]) /
                      col_den[static_cast<std::size_t>(j)];
    acc += bw * v_next[static_cast<std::size_t>(j)];
    if (keep) L_mut[static_cast<std::size_t>(i) * n_to + j] = bw;
  }
  return acc;
}

}  // namespace

void backward_marginal_step_serial(std::span<const double> log_w, std::span<double> L, int n_from,
                                   int n_to, std::span<const double> v_next, std::span<double> v_out,
                                   int time_index, bool keep_backward_weights) {
  std::vector<double> col_max(static_cast<std::size_t>(n_to)), col_den(static_cast<std::size_t>(n_to));
  for (int j = 0; j < n_to; ++j) {
    column_stats(log_w, L, n_from, n_to, j, col_max[static_cast<std::size_t>(j)],
                 col_den[static_cast<std::size_t>(j)]);
    if (!(col_den[static_cast<std::size_t>(j)] > 0.0))
      throw DegenerateCloudError(time_index, "backward kernel has zero mass for a target particle");
  }
  for (int i = 0; i < n_from; ++i)
    v_out[static_cast<std::size_t>(i)] = row_accumulate(log_w, L, n_to, i, v_next, col_max,
                                                        col_den, L, keep_backward_weights);
}

void backward_marginal_step_omp(std::span<const double> log_w, std::span<double> L, int n_from,
                                int n_to, std::span<const double> v_next, std::span<double> v_out,
                                int time_index, bool keep_backward_weights) {
  std::vector<double> col_max(static_cast<std::size_t>(n_to)), col_den(static_cast<std::size_t>(n_to));
  int bad = std::numeric_limits<int>::max();
#pragma omp parallel for schedule(static) reduction(min : bad)
  for (int j = 0; j < n_to; ++j) {
    column_stats(log_w, L, n_from, n_to, j, col_max[static_cast<std::size_t>(j)],
                 col_den[static_cast<std::size_t>(j)]);
    if (!(col_den[static_cast<std::size_t>(j)] > 0.0) && j < bad) bad = j;
  }
  if (bad != std::numeric_limits<int>::max())
    throw DegenerateCloudError(time_index, "backward kernel has zero mass for a target particle");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_from; ++i)
    v_out[static_cast<std::size_t>(i)] = row_accumulate(log_w, L, n_to, i, v_next, col_max,
                                                        col_den, L, keep_backward_weights);
}

void backward_marginal_step(std::span<const double> log_w, std::span<double> L, int n_from,
                            int n_to, std::span<const double> v_next, std::span<double> v_out,
                            int time_index, bool keep_backward_weights) {
  if (parallel_enabled())
    backward_marginal_step_omp(log_w, L, n_from, n_to, v_next, v_out, time_index,
                               keep_backward_weights);
  else
    backward_marginal_step_serial(log_w, L, n_from, n_to, v_next, v_out, time_index,
                                  keep_backward_weights);
}

namespace {

inline double one_step_log_weight(const StateSpaceModel& model, const ParticleCloud& prev,
                                  std::span<const int> ancestors, std::span<const double> proposed,
                                  int i) {
  const int k = prev.time_index;
  const int a = ancestors[static_cast<std::size_t>(i)];
  const auto parent = prev.position(a);
  const ConstStateView child(proposed.data() + static_cast<std::size_t>(i) * prev.state_dim,
                             prev.state_dim);
  const double g = model.emission_logdensity(k + 1, child);
  const double q = model.transition_logdensity(k, parent, child);
  if (!(g > kNegInf) || !(q > kNegInf)) return kNegInf;
  const double r = model.proposal_logdensity(k, parent, child);
  const double log_theta = std::log(prev.adjustment_weights[static_cast<std::size_t>(a)]);
  return g + q - log_theta - r;
}

}  // namespace

void step_log_weights_serial(const StateSpaceModel& model, const ParticleCloud& prev,
                             std::span<const int> ancestors, std::span<const double> proposed,
                             std::span<double> out) {
  const int n = static_cast<int>(out.size());
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = one_step_log_weight(model, prev, ancestors, proposed, i);
}

void step_log_weights_omp(const StateSpaceModel& model, const ParticleCloud& prev,
                          std::span<const int> ancestors, std::span<const double> proposed,
                          std::span<double> out) {
  const int n = static_cast<int>(out.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = one_step_log_weight(model, prev, ancestors, proposed, i);
}

void step_log_weights(const StateSpaceModel& model, const ParticleCloud& prev,
                      std::span<const int> ancestors, std::span<const double> proposed,
                      std::span<double> out) {
  if (parallel_enabled())
    step_log_weights_omp(model, prev, ancestors, proposed, out);
  else
    step_log_weights_serial(model, prev, ancestors, proposed, out);
}

void adjustment_weights_serial(const StateSpaceModel& model, int k,
                               std::span<const double> positions, int count, std::span<double> out) {
  const int d = static_cast<int>(positions.size()) / count;
  for (int i = 0; i < count; ++i) {
    const ConstStateView x(positions.data() + static_cast<std::size_t>(i) * d, d);
    const double v = model.adjustment_weight(k, x);
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("adjustment weights must be positive and finite");
    out[static_cast<std::size_t>(i)] = v;
  }
}

void adjustment_weights_omp(const StateSpaceModel& model, int k, std::span<const double> positions,
                            int count, std::span<double> out) {
  const int d = static_cast<int>(positions.size()) / count;
  int bad = std::numeric_limits<int>::max();
#pragma omp parallel for schedule(static) reduction(min : bad)
  for (int i = 0; i < count; ++i) {
    const ConstStateView x(positions.data() + static_cast<std::size_t>(i) * d, d);
    const double v = model.adjustment_weight(k, x);
    if ((!(v > 0.0) || !std::isfinite(v)) && i < bad) bad = i;
    out[static_cast<std::size_t>(i)] = v;
  }
  if (bad != std::numeric_limits<int>::max())
    throw std::invalid_argument("adjustment weights must be positive and finite");
}

void adjustment_weights(const StateSpaceModel& model, int k, std::span<const double> positions,
                        int count, std::span<double> out) {
  if (parallel_enabled())
    adjustment_weights_omp(model, k, positions, count, out);
  else
    adjustment_weights_serial(model, k, positions, count, out);
}

}  // namespace psmooth::kernels
