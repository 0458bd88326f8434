#include "psmooth/discrete_hmm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "psmooth/numerics.hpp"

namespace psmooth {

namespace {

void check_stochastic(const std::vector<double>& row, std::size_t offset, std::size_t len,
                      const char* what) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double v = row[offset + i];
    if (!(v >= 0.0) || !(v <= 1.0))
      throw std::invalid_argument(std::string(what) + ": entries must lie in [0,1]");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(what) + ": rows must sum to 1");
}

}  // namespace

void DiscreteHmmParams::validate() const {
  if (n_states < 1 || n_symbols < 1)
    throw std::invalid_argument("DiscreteHmmParams: need n_states >= 1 and n_symbols >= 1");
  const auto s = static_cast<std::size_t>(n_states);
  const auto m = static_cast<std::size_t>(n_symbols);
  if (initial.size() != s || transition.size() != s * s || emission.size() != s * m)
    throw std::invalid_argument("DiscreteHmmParams: matrix sizes inconsistent with n_states/n_symbols");
  check_stochastic(initial, 0, s, "initial");
  for (int i = 0; i < n_states; ++i) check_stochastic(transition, i * s, s, "transition");
  for (int i = 0; i < n_states; ++i) check_stochastic(emission, i * m, m, "emission");
}

DiscreteHmmModel::DiscreteHmmModel(DiscreteHmmParams params, ObservationRecord obs)
    : params_(std::move(params)), obs_(std::move(obs)) {
  params_.validate();
  obs_.validate();
  if (obs_.obs_dim != 1) throw std::invalid_argument("DiscreteHmmModel: obs_dim must be 1");
  for (double v : obs_.values) {
    const int s = static_cast<int>(std::lround(v));
    if (std::abs(v - s) > 1e-9 || s < 0 || s >= params_.n_symbols)
      throw std::invalid_argument("DiscreteHmmModel: observations must be symbol indices");
  }
}

int DiscreteHmmModel::state_of(ConstStateView x) const {
  const int s = static_cast<int>(std::lround(x[0]));
  if (s < 0 || s >= params_.n_states)
    throw std::invalid_argument("DiscreteHmmModel: state index out of range");
  return s;
}

int DiscreteHmmModel::symbol_at(int k) const {
  return static_cast<int>(std::lround(obs_.values[static_cast<std::size_t>(k)]));
}

double DiscreteHmmModel::initial_logdensity(ConstStateView x) const {
  return std::log(params_.initial[static_cast<std::size_t>(state_of(x))]);
}

double DiscreteHmmModel::initial_proposal_logdensity(ConstStateView x) const {
  return initial_logdensity(x);
}

void DiscreteHmmModel::sample_initial_proposal(Rng& rng, MutableStateView out) const {
  const double u = rng.uniform();
  double acc = 0.0;
  int pick = params_.n_states - 1;
  for (int i = 0; i < params_.n_states; ++i) {
    acc += params_.initial[static_cast<std::size_t>(i)];
    if (u < acc) { pick = i; break; }
  }
  out[0] = static_cast<double>(pick);
}

double DiscreteHmmModel::transition_logdensity(int, ConstStateView x, ConstStateView next) const {
  return std::log(params_.trans(state_of(x), state_of(next)));
}

double DiscreteHmmModel::emission_logdensity(int k, ConstStateView x) const {
  return std::log(params_.emit(state_of(x), symbol_at(k)));
}

double DiscreteHmmModel::proposal_logdensity(int k, ConstStateView x, ConstStateView next) const {
  return transition_logdensity(k, x, next);
}

void DiscreteHmmModel::sample_proposal(int, ConstStateView x, Rng& rng, MutableStateView out) const {
  const int from = state_of(x);
  const double u = rng.uniform();
  double acc = 0.0;
  int pick = params_.n_states - 1;
  for (int j = 0; j < params_.n_states; ++j) {
    acc += params_.trans(from, j);
    if (u < acc) { pick = j; break; }
  }
  out[0] = static_cast<double>(pick);
}

std::optional<double> DiscreteHmmModel::transition_density_bound() const {
  return *std::max_element(params_.transition.begin(), params_.transition.end());
}

ForwardBackwardResult hmm_forward_backward(const DiscreteHmmParams& params,
                                           const ObservationRecord& obs) {
  params.validate();
  obs.validate();
  const int n1 = obs.size();
  const int S = params.n_states;
  ForwardBackwardResult res;
  res.filtered.assign(n1, std::vector<double>(S, 0.0));
  std::vector<double> scale(n1, 0.0);

  for (int k = 0; k < n1; ++k) {
    const int y = static_cast<int>(std::lround(obs.values[static_cast<std::size_t>(k)]));
    if (y < 0 || y >= params.n_symbols)
      throw std::invalid_argument("hmm_forward_backward: observation symbol out of range");
    auto& a = res.filtered[k];
    for (int i = 0; i < S; ++i) {
      double prior = 0.0;
      if (k == 0) {
        prior = params.initial[static_cast<std::size_t>(i)];
      } else {
        for (int j = 0; j < S; ++j) prior += res.filtered[k - 1][j] * params.trans(j, i);
      }
      a[static_cast<std::size_t>(i)] = prior * params.emit(i, y);
    }
    double c = 0.0;
    for (double v : a) c += v;
    if (!(c > 0.0))
      throw std::invalid_argument("hmm_forward_backward: observation has zero likelihood");
    for (auto& v : a) v /= c;
    scale[k] = c;
    res.loglik += std::log(c);
  }

  // beta[i] scaled by the same constants; marginals renormalised per time.
  res.marginals.assign(n1, std::vector<double>(S, 0.0));
  res.pairwise.assign(std::max(0, n1 - 1), std::vector<double>(static_cast<std::size_t>(S) * S, 0.0));
  std::vector<double> beta(S, 1.0), beta_next(S, 1.0);
  res.marginals[n1 - 1] = res.filtered[n1 - 1];
  for (int k = n1 - 2; k >= 0; --k) {
    const int y1 = static_cast<int>(std::lround(obs.values[static_cast<std::size_t>(k + 1)]));
    beta_next = beta;
    for (int i = 0; i < S; ++i) {
      double acc = 0.0;
      for (int j = 0; j < S; ++j) acc += params.trans(i, j) * params.emit(j, y1) * beta_next[j];
      beta[static_cast<std::size_t>(i)] = acc / scale[k + 1];
    }
    double norm = 0.0;
    for (int i = 0; i < S; ++i) {
      res.marginals[k][i] = res.filtered[k][i] * beta[static_cast<std::size_t>(i)];
      norm += res.marginals[k][i];
    }
    for (auto& v : res.marginals[k]) v /= norm;
    // Pairwise joint for (k, k+1), scaled then renormalised.
    auto& pw = res.pairwise[k];
    double pws = 0.0;
    for (int i = 0; i < S; ++i)
      for (int j = 0; j < S; ++j) {
        const double v = res.filtered[k][i] * params.trans(i, j) * params.emit(j, y1) * beta_next[j];
        pw[static_cast<std::size_t>(i) * S + j] = v;
        pws += v;
      }
    for (auto& v : pw) v /= pws;
  }
  return res;
}

SimulatedPath simulate_hmm(const DiscreteHmmParams& params, int n_obs, Rng& rng) {
  if (n_obs < 1) throw std::invalid_argument("simulate_hmm: n_obs must be >= 1");
  params.validate();
  SimulatedPath path;
  path.states.resize(n_obs);
  path.obs.obs_dim = 1;
  path.obs.values.resize(n_obs);
  auto draw = [&rng](const std::vector<double>& probs, std::size_t offset, int len) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < len; ++i) {
      acc += probs[offset + static_cast<std::size_t>(i)];
      if (u < acc) return i;
    }
    return len - 1;
  };
  int state = 0;
  for (int k = 0; k < n_obs; ++k) {
    state = (k == 0) ? draw(params.initial, 0, params.n_states)
                     : draw(params.transition, static_cast<std::size_t>(state) * params.n_states,
                            params.n_states);
    path.states[k] = static_cast<double>(state);
    path.obs.values[k] = static_cast<double>(
        draw(params.emission, static_cast<std::size_t>(state) * params.n_symbols, params.n_symbols));
  }
  return path;
}

}  // namespace psmooth
