#pragma once

#include <span>

#include "psmooth/model.hpp"
#include "psmooth/particle_cloud.hpp"

// Hot loops shared by the filter and the marginal smoother. Each kernel has a
// _serial reference implementation and an OpenMP variant; the dispatching
// entry point picks the OpenMP one when enabled. Parallel variants assign
// every output element to exactly one thread and keep the element's inner
// summation order identical to the serial code, so the two variants produce
// bit-identical results for any thread count.
namespace psmooth::kernels {

bool parallel_enabled();
void set_parallel(bool enabled);

// L[i * n_to + j] = model.transition_logdensity(k, from[i], to[j]).
void transition_matrix_serial(const StateSpaceModel& model, int k, const ParticleCloud& from,
                              const ParticleCloud& to, std::span<double> out);
void transition_matrix_omp(const StateSpaceModel& model, int k, const ParticleCloud& from,
                           const ParticleCloud& to, std::span<double> out);
void transition_matrix(const StateSpaceModel& model, int k, const ParticleCloud& from,
                       const ParticleCloud& to, std::span<double> out);

// One backward step of the marginal smoother:
//   v_out[i] = sum_j softmax_i(log_w + L[., j])[i] * v_next[j]
// where softmax runs over the first index at fixed j. L is n_from x n_to
// log densities; log_w are the time-k log weights. Writes the per-column
// normalised weights into L when keep_backward_weights is set (then
// L[i,j] becomes bw_j[i]). Throws DegenerateCloudError when some column has
// no mass.
void backward_marginal_step_serial(std::span<const double> log_w, std::span<double> L, int n_from,
                                   int n_to, std::span<const double> v_next, std::span<double> v_out,
                                   int time_index, bool keep_backward_weights);
void backward_marginal_step_omp(std::span<const double> log_w, std::span<double> L, int n_from,
                                int n_to, std::span<const double> v_next, std::span<double> v_out,
                                int time_index, bool keep_backward_weights);
void backward_marginal_step(std::span<const double> log_w, std::span<double> L, int n_from,
                            int n_to, std::span<const double> v_next, std::span<double> v_out,
                            int time_index, bool keep_backward_weights);

// Log particle weights after propagation:
//   out[i] = g_{k+1}(x_i) + q_k(xi_{a_i}, x_i) - log theta_k(a_i) - r_k(xi_{a_i}, x_i)
// where x_i is row i of proposed (count x state_dim) and a_i = ancestors[i].
void step_log_weights_serial(const StateSpaceModel& model, const ParticleCloud& prev,
                             std::span<const int> ancestors, std::span<const double> proposed,
                             std::span<double> out);
void step_log_weights_omp(const StateSpaceModel& model, const ParticleCloud& prev,
                          std::span<const int> ancestors, std::span<const double> proposed,
                          std::span<double> out);
void step_log_weights(const StateSpaceModel& model, const ParticleCloud& prev,
                      std::span<const int> ancestors, std::span<const double> proposed,
                      std::span<double> out);

// out[i] = model.adjustment_weight(k, cloud row i of positions).
void adjustment_weights_serial(const StateSpaceModel& model, int k,
                               std::span<const double> positions, int count, std::span<double> out);
void adjustment_weights_omp(const StateSpaceModel& model, int k, std::span<const double> positions,
                            int count, std::span<double> out);
void adjustment_weights(const StateSpaceModel& model, int k, std::span<const double> positions,
                        int count, std::span<double> out);

}  // namespace psmooth::kernels
