#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "psmooth/model.hpp"

namespace psmooth {

// Weighted sample at one time step. positions is count x state_dim, row-major.
// ancestors refers into the previous cloud and is empty at time 0. Weights are
// unnormalised log weights; adjustment_weights are the (linear-scale)
// theta_k(xi_k^i) values used by the next selection step.
struct ParticleCloud {
  int time_index = 0;
  int state_dim = 1;
  std::vector<double> positions;
  std::vector<double> log_weights;
  std::vector<double> adjustment_weights;
  std::vector<int> ancestors;

  int size() const { return static_cast<int>(log_weights.size()); }

  ConstStateView position(int i) const {
    return ConstStateView(positions.data() + static_cast<std::size_t>(i) * state_dim, state_dim);
  }
  MutableStateView position_mut(int i) {
    return MutableStateView(positions.data() + static_cast<std::size_t>(i) * state_dim, state_dim);
  }
};

// Full filter output: clouds for k = 0..n plus the running normalising
// constant pieces. per_step_log_norms[k] is log sum_i w_k^i theta_k^i for
// k < n and log sum_i w_n^i at k = n, so
//   log_z = -(n+1) log N + sum_k per_step_log_norms[k].
struct FilterTrace {
  std::vector<ParticleCloud> clouds;
  std::vector<double> per_step_log_norms;
  double log_z = 0.0;

  int horizon() const { return static_cast<int>(clouds.size()) - 1; }
  int particle_count() const { return clouds.empty() ? 0 : clouds.front().size(); }
};

// All particle weights (or all selection weights) at one time vanished.
class DegenerateCloudError : public std::runtime_error {
 public:
  DegenerateCloudError(int time_index, const std::string& what)
      : std::runtime_error("degenerate particle cloud at time " + std::to_string(time_index) +
                           ": " + what),
        time_index_(time_index) {}
  int time_index() const { return time_index_; }

 private:
  int time_index_;
};

}  // namespace psmooth
