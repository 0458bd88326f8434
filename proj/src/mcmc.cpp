#include "psmooth/mcmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "psmooth/numerics.hpp"

namespace psmooth {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double cloud_max_log_weight(const FilterTrace& trace) {
  double m = kNegInf;
  for (const auto& cloud : trace.clouds)
    for (double lw : cloud.log_weights) m = std::max(m, lw);
  return m;
}

bool accept_log_ratio(double log_ratio, double uniform) {
  // log(u) is -inf only at u = 0, which still rejects a -inf ratio.
  return std::log(uniform) < log_ratio;
}

}  // namespace

std::string ExtractionMode::name() const {
  switch (kind) {
    case Kind::GT: return "gt";
    case Kind::GTRB: return "gtrb";
    case Kind::BS: return "bs";
    case Kind::BSM: return "bsm";
  }
  return "?";
}

ExtractionMode ExtractionMode::parse(const std::string& text) {
  ExtractionMode mode;
  if (text == "gt") {
    mode.kind = Kind::GT;
  } else if (text == "gtrb") {
    mode.kind = Kind::GTRB;
  } else if (text == "bsm") {
    mode.kind = Kind::BSM;
  } else if (text == "bs" || text.rfind("bs:", 0) == 0) {
    mode.kind = Kind::BS;
    if (text.size() > 3) {
      const int j = std::stoi(text.substr(3));
      if (j < 1) throw std::invalid_argument("extraction mode: trajectory count must be >= 1");
      mode.num_trajectories = j;
    }
  } else {
    throw std::invalid_argument("unknown extraction mode: " + text);
  }
  return mode;
}

bool mh_accept(double log_z_current, double log_z_proposed, double uniform) {
  return accept_log_ratio(log_z_proposed - log_z_current, uniform);
}

ChainState imh_sweep(ChainState state, const StateSpaceModel& model, int n_particles,
                     Rng& filter_rng, double accept_uniform, SweepRecord& record) {
  const auto t0 = Clock::now();
  std::shared_ptr<const FilterTrace> proposal;
  double log_z_proposed = kNegInf;
  try {
    proposal = std::make_shared<FilterTrace>(run_filter(model, n_particles, filter_rng));
    log_z_proposed = proposal->log_z;
  } catch (const DegenerateCloudError&) {
    // A degenerate proposal has estimate zero; the sweep is a rejection.
  }
  record.tau_pf_s = seconds_since(t0);
  record.log_z_proposed = log_z_proposed;
  record.max_log_weight = proposal ? cloud_max_log_weight(*proposal) : kNegInf;

  record.accepted = proposal && mh_accept(state.log_z, log_z_proposed, accept_uniform);
  if (record.accepted) {
    state.trace = std::move(proposal);
    state.log_z = log_z_proposed;
  }
  record.log_z = state.log_z;
  ++state.sweep_index;
  return state;
}

ChainState pmmh_sweep(ChainState state, const ModelFactory& factory,
                      const ParameterModel& param_model, int n_particles, Rng& sweep_rng,
                      SweepRecord& record) {
  if (!factory || !param_model.prior_logdensity || !param_model.propose ||
      !param_model.proposal_logdensity)
    throw std::invalid_argument("pmmh_sweep: incomplete parameter model");

  const std::vector<double> theta_prop = param_model.propose(state.theta, sweep_rng);
  const double prior_cur = param_model.prior_logdensity(state.theta);
  const double prior_prop = param_model.prior_logdensity(theta_prop);
  record.theta = state.theta;

  record.tau_pf_s = 0.0;
  record.log_z_proposed = kNegInf;
  record.max_log_weight = kNegInf;
  record.accepted = false;

  if (prior_prop > kNegInf) {
    std::shared_ptr<const FilterTrace> proposal;
    const auto model = factory(theta_prop);
    const auto t0 = Clock::now();
    try {
      proposal = std::make_shared<FilterTrace>(run_filter(*model, n_particles, sweep_rng));
      record.log_z_proposed = proposal->log_z;
    } catch (const DegenerateCloudError&) {
    }
    record.tau_pf_s = seconds_since(t0);
    if (proposal) {
      record.max_log_weight = cloud_max_log_weight(*proposal);
      const double log_ratio = prior_prop - prior_cur +
                               param_model.proposal_logdensity(theta_prop, state.theta) -
                               param_model.proposal_logdensity(state.theta, theta_prop) +
                               record.log_z_proposed - state.log_z;
      if (accept_log_ratio(log_ratio, sweep_rng.uniform())) {
        record.accepted = true;
        state.trace = std::move(proposal);
        state.log_z = record.log_z_proposed;
        state.theta = theta_prop;
      }
    }
  }
  record.log_z = state.log_z;
  record.theta = state.theta;
  ++state.sweep_index;
  return state;
}

namespace {

// Smoothed-mean estimates of coordinate 0 for one mode on the current state.
ModeOutput extract_mode(const ExtractionMode& mode, const FilterTrace& trace,
                        const StateSpaceModel& model, Rng& mode_rng, int max_rejections,
                        bool keep_trajectories, BackwardSamplerStats* is_stats) {
  const auto t0 = Clock::now();
  const int n = trace.horizon();
  ModeOutput out;
  out.estimate.assign(static_cast<std::size_t>(n) + 1, 0.0);

  switch (mode.kind) {
    case ExtractionMode::Kind::GT: {
      Trajectory traj = extract_genealogy(trace, mode_rng);
      for (int k = 0; k <= n; ++k) out.estimate[static_cast<std::size_t>(k)] = traj.state(k)[0];
      if (keep_trajectories) out.trajectories.push_back(std::move(traj.states));
      break;
    }
    case ExtractionMode::Kind::GTRB: {
      const auto marg = genealogy_marginals(trace);
      for (int k = 0; k <= n; ++k)
        out.estimate[static_cast<std::size_t>(k)] =
            smoothed_expectation(trace, marg, k, [](ConstStateView x) { return x[0]; });
      break;
    }
    case ExtractionMode::Kind::BSM: {
      const auto marg = backward_smoothing_marginals(trace, model);
      for (int k = 0; k <= n; ++k)
        out.estimate[static_cast<std::size_t>(k)] =
            smoothed_expectation(trace, marg, k, [](ConstStateView x) { return x[0]; });
      break;
    }
    case ExtractionMode::Kind::BS: {
      const bool use_ar = model.transition_density_bound().has_value();
      auto draws = sample_backward_multi(trace, model, mode_rng, mode.num_trajectories,
                                         use_ar, max_rejections, is_stats);
      const int J = mode.num_trajectories;
      if (J >= 2) out.within_variance.assign(static_cast<std::size_t>(n) + 1, 0.0);
      std::vector<double> vals(static_cast<std::size_t>(J));
      for (int k = 0; k <= n; ++k) {
        for (int j = 0; j < J; ++j) vals[static_cast<std::size_t>(j)] = draws[static_cast<std::size_t>(j)].state(k)[0];
        out.estimate[static_cast<std::size_t>(k)] = mean(vals);
        if (J >= 2) out.within_variance[static_cast<std::size_t>(k)] = sample_variance(vals);
      }
      if (keep_trajectories)
        for (auto& d : draws) out.trajectories.push_back(std::move(d.states));
      break;
    }
  }
  out.tau_s = seconds_since(t0);
  return out;
}

}  // namespace

ChainResult run_chain(const ChainConfig& config, const StateSpaceModel* model) {
  if (config.n_sweeps < 1) throw std::invalid_argument("run_chain: need at least one sweep");
  if (config.n_particles < 1) throw std::invalid_argument("run_chain: need at least one particle");
  const bool pmmh = config.sampler == ChainConfig::Sampler::PMMH;
  if (!pmmh && model == nullptr)
    throw std::invalid_argument("run_chain: fixed-parameter sampler needs a model");
  if (pmmh && !config.factory)
    throw std::invalid_argument("run_chain: parameter sampler needs a model factory");

  Rng master(config.seed);
  ChainResult result;
  result.records.reserve(static_cast<std::size_t>(config.n_sweeps));

  // Initial state: one unconditional filter run, accepted as-is.
  std::unique_ptr<StateSpaceModel> owned_model;
  if (pmmh) owned_model = config.factory(config.theta_init);
  const StateSpaceModel* current_model = pmmh ? owned_model.get() : model;

  ChainState state;
  {
    Rng init_rng = master.substream(0);
    state.trace = std::make_shared<FilterTrace>(
        run_filter(*current_model, config.n_particles, init_rng));
    state.log_z = state.trace->log_z;
    state.theta = config.theta_init;
  }

  std::vector<double> sweep_max_logw;
  sweep_max_logw.reserve(static_cast<std::size_t>(config.n_sweeps));

  for (int r = 0; r < config.n_sweeps; ++r) {
    SweepRecord record;
    record.sweep = r;
    const std::uint64_t base = 3ULL * (static_cast<std::uint64_t>(r) + 1);
    if (pmmh) {
      Rng sweep_rng = master.substream(base);
      state = pmmh_sweep(std::move(state), config.factory, config.param_model, config.n_particles,
                         sweep_rng, record);
      if (record.accepted) {
        owned_model = config.factory(state.theta);
        current_model = owned_model.get();
      }
    } else {
      Rng filter_rng = master.substream(base);
      Rng accept_rng = master.substream(base + 1);
      state = imh_sweep(std::move(state), *current_model, config.n_particles, filter_rng,
                        accept_rng.uniform(), record);
    }
    if (record.accepted) ++result.accept_count;
    if (record.max_log_weight > kNegInf) sweep_max_logw.push_back(record.max_log_weight);

    Rng extract_rng = master.substream(base + 2);
    record.modes.reserve(config.modes.size());
    for (std::size_t m = 0; m < config.modes.size(); ++m) {
      Rng mode_rng = extract_rng.substream(m);
      record.modes.push_back(extract_mode(config.modes[m], *state.trace, *current_model, mode_rng,
                                          config.max_rejections, config.keep_trajectories,
                                          &result.is_stats));
      if (config.modes[m].kind == ExtractionMode::Kind::BS)
        record.tau_bs_s += record.modes.back().tau_s;
    }
    if (config.on_sweep) {
      config.on_sweep(record);
      for (auto& m : record.modes) m.trajectories.clear();
    }
    result.records.push_back(std::move(record));
  }
  result.final_trace = state.trace;

  // Qualitative boundedness diagnostic: proposal-run weight maxima should not
  // keep climbing by orders of magnitude over the run.
  if (sweep_max_logw.size() >= 20) {
    const std::size_t half = sweep_max_logw.size() / 2;
    const double first = *std::max_element(sweep_max_logw.begin(), sweep_max_logw.begin() + half);
    const double last = *std::max_element(sweep_max_logw.begin() + half, sweep_max_logw.end());
    result.weight_growth_warning = last > first + std::log(10.0);
  }
  return result;
}

}  // namespace psmooth
