#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psmooth/filter.hpp"
#include "psmooth/model.hpp"
#include "psmooth/smoother.hpp"

namespace psmooth {

// Trajectory extraction applied to the current chain state after each sweep.
//   GT    genealogy trace, one sampled trajectory
//   GTRB  Rao-Blackwellised genealogy marginals
//   BS    num_trajectories independent backward draws
//   BSM   backward-smoothing marginals
struct ExtractionMode {
  enum class Kind { GT, GTRB, BS, BSM };
  Kind kind = Kind::BS;
  int num_trajectories = 25;  // BS only

  std::string name() const;
  // Parses "gt", "gtrb", "bsm", "bs", "bs:J".
  static ExtractionMode parse(const std::string& text);
};

// Pure Metropolis decision given the two log normalising constants: accept
// with probability min(1, exp(log_z_proposed - log_z_current)) using one
// uniform. A -inf proposal value never accepts.
bool mh_accept(double log_z_current, double log_z_proposed, double uniform);

// State carried between sweeps; log_z always equals log_z_estimate(*trace).
struct ChainState {
  std::shared_ptr<const FilterTrace> trace;
  double log_z = 0.0;
  std::vector<double> theta;  // empty for the fixed-parameter sampler
  int sweep_index = 0;
};

// Per-sweep per-mode extraction output on the retained trace. estimate[k] is
// the smoothed-mean estimate of coordinate 0 at time k; for BS additionally
// the unbiased within-sweep variance over the J draws. trajectories holds the
// raw sampled paths (flat (n+1) x state_dim each) for the trajectory-valued
// modes, and only when ChainConfig::keep_trajectories is set.
struct ModeOutput {
  std::vector<double> estimate;
  std::vector<double> within_variance;
  std::vector<std::vector<double>> trajectories;
  double tau_s = 0.0;
};

struct SweepRecord {
  int sweep = 0;
  bool accepted = false;
  double log_z = 0.0;           // retained value after the decision
  double log_z_proposed = 0.0;  // -inf when the proposal run degenerated
  double tau_pf_s = 0.0;        // proposal filter run
  double tau_bs_s = 0.0;        // BS extraction, summed over BS modes
  double max_log_weight = 0.0;  // over all clouds of the proposal run
  std::vector<ModeOutput> modes;
  std::vector<double> theta;  // parameter chains only
};

// Independence-MH sweep targeting the smoothing law: runs a fresh filter,
// accepts on the normalising-constant ratio, never touches the particles
// themselves. A degenerate proposal run counts as log_z* = -inf (rejection).
// Extraction is done by the chain driver, not here.
ChainState imh_sweep(ChainState state, const StateSpaceModel& model, int n_particles,
                     Rng& filter_rng, double accept_uniform, SweepRecord& record);

// Parameter prior and proposal for the parameter-augmented sampler.
// proposal_logdensity(from, to) is the density of moving from 'from' to 'to'
// in theta space (any deterministic reparameterisation's Jacobian included).
struct ParameterModel {
  std::function<double(std::span<const double>)> prior_logdensity;
  std::function<std::vector<double>(std::span<const double>, Rng&)> propose;
  std::function<double(std::span<const double>, std::span<const double>)> proposal_logdensity;
};

using ModelFactory =
    std::function<std::unique_ptr<StateSpaceModel>(std::span<const double> theta)>;

// Parameter-augmented sweep: theta* from the proposal, fresh filter under
// theta*, accepted with probability
//   min(1, exp(log pi(theta*) - log pi(theta)
//              + log rho(theta | theta*) - log rho(theta* | theta)
//              + log_z* - log_z)).
// The prior ratio is part of the acceptance probability; a theta* outside the
// prior support is rejected before any filtering.
ChainState pmmh_sweep(ChainState state, const ModelFactory& factory,
                      const ParameterModel& param_model, int n_particles, Rng& sweep_rng,
                      SweepRecord& record);

struct ChainConfig {
  enum class Sampler { IMH, PMMH };
  Sampler sampler = Sampler::IMH;
  std::vector<ExtractionMode> modes;
  int n_particles = 500;
  int n_sweeps = 5000;
  std::uint64_t seed = 0;
  int burn_in = 0;
  int max_rejections = 15;
  // Fill ModeOutput::trajectories for the GT and BS modes. Combine with
  // on_sweep to stream them out: when the callback is set, the trajectories
  // are dropped from the stored record right after it returns, so a long run
  // never holds R x J paths in memory.
  bool keep_trajectories = false;
  std::function<void(const SweepRecord&)> on_sweep;
  // PMMH only:
  ParameterModel param_model;
  ModelFactory factory;
  std::vector<double> theta_init;
};

struct ChainResult {
  std::vector<SweepRecord> records;  // one per sweep, including burn-in
  std::shared_ptr<const FilterTrace> final_trace;  // retained state after the last sweep
  BackwardSamplerStats is_stats;     // accept-reject sampler totals
  int accept_count = 0;
  bool weight_growth_warning = false;  // per-sweep max log weight keeps rising
  double is_acceptance_rate() const {
    return is_stats.proposals > 0
               ? static_cast<double>(is_stats.accepts) / static_cast<double>(is_stats.proposals)
               : 0.0;
  }
  double acceptance_rate() const {
    return records.empty() ? 0.0
                           : static_cast<double>(accept_count) / static_cast<double>(records.size());
  }
};

// Full chain driver. The initial state is one unconditional filter run
// (always accepted); each sweep r then uses three independent substreams of
// the master seed (filter draws, the acceptance uniform, extraction draws),
// so draw counts in one sweep never shift another sweep's randomness.
// Extraction runs on the retained trace every sweep: rejected sweeps re-draw
// fresh GT/BS trajectories from the previous trace, while GTRB/BSM recompute
// the same deterministic marginals. For the fixed-parameter sampler pass a
// model; for PMMH the config's factory/theta_init/param_model are used.
ChainResult run_chain(const ChainConfig& config, const StateSpaceModel* model);

}  // namespace psmooth
