#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "psmooth/discrete_hmm.hpp"
#include "psmooth/filter.hpp"
#include "psmooth/growth_model.hpp"
#include "psmooth/kernels.hpp"
#include "psmooth/numerics.hpp"
#include "psmooth/smoother.hpp"
#include "test_util.hpp"

using namespace psmooth;

namespace {

ObservationRecord obs_of(std::vector<double> values) {
  ObservationRecord obs;
  obs.values = std::move(values);
  return obs;
}

DiscreteHmmParams small_hmm() {
  DiscreteHmmParams p;
  p.n_states = 2;
  p.n_symbols = 2;
  p.initial = {0.6, 0.4};
  p.transition = {0.7, 0.3, 0.2, 0.8};
  p.emission = {0.9, 0.1, 0.3, 0.7};
  return p;
}

// Trace over a short growth-model record; the workhorse continuous-state
// fixture for sampler law tests.
FilterTrace growth_trace(int n_obs, int n_particles, std::uint64_t seed, GrowthModel** model_out,
                         std::vector<GrowthModel>& keep_alive) {
  GrowthModelParams gp;
  Rng sim(seed);
  SimulatedPath path = simulate_growth(gp, n_obs, sim);
  keep_alive.emplace_back(gp, path.obs);
  *model_out = &keep_alive.back();
  Rng rng(seed + 1000);
  return run_filter(keep_alive.back(), n_particles, rng);
}

// Exact joint law of the backward index vector for a two-step trace, cell
// (i, j) = P(J_0 = i, J_1 = j), computed from the definition.
std::vector<double> exact_two_step_joint(const FilterTrace& trace, const StateSpaceModel& model) {
  const int N = trace.particle_count();
  std::vector<double> terminal(static_cast<std::size_t>(N));
  normalized_exp(trace.clouds[1].log_weights, terminal);
  std::vector<double> joint(static_cast<std::size_t>(N) * N, 0.0);
  for (int j = 0; j < N; ++j) {
    const auto bw = backward_weights(trace, model, 0, trace.clouds[1].position(j));
    for (int i = 0; i < N; ++i)
      joint[static_cast<std::size_t>(i) * N + j] = terminal[static_cast<std::size_t>(j)] * bw[static_cast<std::size_t>(i)];
  }
  return joint;
}

// Delegating model that reports a loose transition density bound, forcing
// high accept-reject rejection rates.
class InflatedBoundModel final : public StateSpaceModel {
 public:
  InflatedBoundModel(const StateSpaceModel& inner, double factor) : inner_(inner), factor_(factor) {}

  int state_dim() const override { return inner_.state_dim(); }
  int horizon() const override { return inner_.horizon(); }
  double initial_logdensity(ConstStateView x) const override { return inner_.initial_logdensity(x); }
  double initial_proposal_logdensity(ConstStateView x) const override {
    return inner_.initial_proposal_logdensity(x);
  }
  void sample_initial_proposal(Rng& rng, MutableStateView out) const override {
    inner_.sample_initial_proposal(rng, out);
  }
  double transition_logdensity(int k, ConstStateView x, ConstStateView next) const override {
    return inner_.transition_logdensity(k, x, next);
  }
  double emission_logdensity(int k, ConstStateView x) const override {
    return inner_.emission_logdensity(k, x);
  }
  double proposal_logdensity(int k, ConstStateView x, ConstStateView next) const override {
    return inner_.proposal_logdensity(k, x, next);
  }
  void sample_proposal(int k, ConstStateView x, Rng& rng, MutableStateView out) const override {
    inner_.sample_proposal(k, x, rng, out);
  }
  double adjustment_weight(int k, ConstStateView x) const override {
    return inner_.adjustment_weight(k, x);
  }
  std::optional<double> transition_density_bound() const override {
    return *inner_.transition_density_bound() * factor_;
  }

 private:
  const StateSpaceModel& inner_;
  double factor_;
};

}  // namespace

TEST_CASE("backward weights from a hand-built cloud") {
  DiscreteHmmParams hp = small_hmm();
  DiscreteHmmModel model(hp, obs_of({0.0, 0.0}));

  FilterTrace trace;
  ParticleCloud c0;
  c0.time_index = 0;
  c0.positions = {0.0, 1.0};
  c0.log_weights = {std::log(1.0), std::log(2.0)};
  c0.adjustment_weights = {1.0, 1.0};
  ParticleCloud c1;
  c1.time_index = 1;
  c1.positions = {0.0, 1.0};
  c1.log_weights = {0.0, 0.0};
  c1.adjustment_weights = {1.0, 1.0};
  c1.ancestors = {0, 1};
  trace.clouds = {c0, c1};

  // Mass on particle i proportional to w_i q(x_i -> 0): (1*0.7, 2*0.2).
  const double x_next = 0.0;
  const auto bw = backward_weights(trace, model, 0, ConstStateView(&x_next, 1));
  REQUIRE(bw.size() == 2);
  CHECK(bw[0] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
  CHECK(bw[1] == doctest::Approx(4.0 / 11.0).epsilon(1e-12));

  CHECK_THROWS_AS(backward_weights(trace, model, 1, ConstStateView(&x_next, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(backward_weights(trace, model, -1, ConstStateView(&x_next, 1)),
                  std::invalid_argument);

  // A destination no particle can reach kills the kernel.
  DiscreteHmmParams dead = hp;
  dead.transition = {1.0, 0.0, 1.0, 0.0};
  DiscreteHmmModel dead_model(dead, obs_of({0.0, 0.0}));
  const double unreachable = 1.0;
  CHECK_THROWS_AS(backward_weights(trace, dead_model, 0, ConstStateView(&unreachable, 1)),
                  DegenerateCloudError);
}

TEST_CASE("single-particle trace has a single possible trajectory") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(6, 1, 11, &model, keep);

  Rng rng(12);
  Trajectory t = sample_backward_exact(trace, *model, rng);
  REQUIRE(t.horizon() == 5);
  for (int k = 0; k <= 5; ++k) {
    CHECK(t.backward_indices[static_cast<std::size_t>(k)] == 0);
    CHECK(t.state(k)[0] == trace.clouds[static_cast<std::size_t>(k)].position(0)[0]);
  }
}

TEST_CASE("exact backward sampler matches the enumerated joint law") {
  SUBCASE("discrete model") {
    DiscreteHmmParams hp = small_hmm();
    DiscreteHmmModel model(hp, obs_of({0.0, 1.0}));
    Rng frng(21);
    FilterTrace trace = run_filter(model, 2, frng);
    const auto joint = exact_two_step_joint(trace, model);

    Rng rng(22);
    std::vector<long long> counts(4, 0);
    const int draws = 20000;
    for (int d = 0; d < draws; ++d) {
      Trajectory t = sample_backward_exact(trace, model, rng);
      counts[static_cast<std::size_t>(t.backward_indices[0]) * 2 +
             static_cast<std::size_t>(t.backward_indices[1])] += 1;
    }
    CHECK(testutil::chi_square_stat(counts, joint) < testutil::chi_square_crit_001(3));
  }

  SUBCASE("continuous model") {
    std::vector<GrowthModel> keep;
    GrowthModel* model = nullptr;
    FilterTrace trace = growth_trace(2, 2, 31, &model, keep);
    const auto joint = exact_two_step_joint(trace, *model);

    Rng rng(32);
    std::vector<long long> counts(4, 0);
    const int draws = 20000;
    for (int d = 0; d < draws; ++d) {
      Trajectory t = sample_backward_exact(trace, *model, rng);
      counts[static_cast<std::size_t>(t.backward_indices[0]) * 2 +
             static_cast<std::size_t>(t.backward_indices[1])] += 1;
    }
    CHECK(testutil::chi_square_stat(counts, joint) < testutil::chi_square_crit_001(3));
  }
}

TEST_CASE("trajectory states are copied from the selected particles") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(5, 8, 41, &model, keep);

  Rng rng(42);
  for (int d = 0; d < 20; ++d) {
    Trajectory t = sample_backward_exact(trace, *model, rng);
    for (int k = 0; k <= t.horizon(); ++k) {
      const int j = t.backward_indices[static_cast<std::size_t>(k)];
      REQUIRE(j >= 0);
      REQUIRE(j < 8);
      CHECK(t.state(k)[0] == trace.clouds[static_cast<std::size_t>(k)].position(j)[0]);
    }
  }
}

TEST_CASE("accept-reject sampler accepts every proposal at a tight constant bound") {
  // Uniform transition matrix: every density value equals the bound.
  DiscreteHmmParams hp = small_hmm();
  hp.transition = {0.5, 0.5, 0.5, 0.5};
  DiscreteHmmModel model(hp, obs_of({0.0, 1.0, 0.0, 1.0}));
  Rng frng(51);
  FilterTrace trace = run_filter(model, 64, frng);

  Rng rng(52);
  BackwardSamplerStats stats;
  const int draws = 200;
  for (int d = 0; d < draws; ++d) sample_backward_ar(trace, model, rng, 15, &stats);
  CHECK(stats.proposals == stats.accepts);
  CHECK(stats.accepts == static_cast<long long>(draws) * trace.horizon());
  CHECK(stats.fallbacks == 0);
}

TEST_CASE("accept-reject and exact samplers draw from the same law") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(2, 3, 61, &model, keep);

  const int draws = 15000;
  std::vector<long long> exact_counts(9, 0), ar_counts(9, 0);
  Rng rng_e(62), rng_a(63);
  BackwardSamplerStats stats;
  for (int d = 0; d < draws; ++d) {
    Trajectory te = sample_backward_exact(trace, *model, rng_e);
    exact_counts[static_cast<std::size_t>(te.backward_indices[0]) * 3 +
                 static_cast<std::size_t>(te.backward_indices[1])] += 1;
    Trajectory ta = sample_backward_ar(trace, *model, rng_a, 15, &stats);
    ar_counts[static_cast<std::size_t>(ta.backward_indices[0]) * 3 +
              static_cast<std::size_t>(ta.backward_indices[1])] += 1;
  }
  int df = -1;
  for (std::size_t c = 0; c < 9; ++c)
    if (exact_counts[c] + ar_counts[c] > 0) ++df;
  REQUIRE(df >= 1);
  CHECK(testutil::two_sample_chi_square(exact_counts, ar_counts) <
        testutil::chi_square_crit_001(df));
  CHECK(stats.proposals >= stats.accepts);
  CHECK(stats.accepts + stats.fallbacks == static_cast<long long>(draws) * trace.horizon());
}

TEST_CASE("accept-reject index marginals match the deterministic recursion") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(4, 5, 71, &model, keep);
  SmoothingMarginals exact = backward_smoothing_marginals(trace, *model);

  const int draws = 20000;
  std::vector<std::vector<double>> freq(4, std::vector<double>(5, 0.0));
  Rng rng(72);
  for (int d = 0; d < draws; ++d) {
    Trajectory t = sample_backward_ar(trace, *model, rng, 15, nullptr);
    for (int k = 0; k <= 3; ++k)
      freq[static_cast<std::size_t>(k)][static_cast<std::size_t>(
          t.backward_indices[static_cast<std::size_t>(k)])] += 1.0 / draws;
  }
  double max_diff = 0.0;
  for (int k = 0; k <= 3; ++k)
    for (int i = 0; i < 5; ++i)
      max_diff = std::max(max_diff, std::abs(freq[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] -
                                             exact.weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]));
  CHECK(max_diff < 0.02);
}

TEST_CASE("fallback to the exact categorical keeps the law and is counted") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(2, 3, 81, &model, keep);
  InflatedBoundModel loose(*model, 1e4);

  const int draws = 8000;
  std::vector<long long> exact_counts(9, 0), ar_counts(9, 0);
  Rng rng_e(82), rng_a(83);
  BackwardSamplerStats stats;
  for (int d = 0; d < draws; ++d) {
    Trajectory te = sample_backward_exact(trace, *model, rng_e);
    exact_counts[static_cast<std::size_t>(te.backward_indices[0]) * 3 +
                 static_cast<std::size_t>(te.backward_indices[1])] += 1;
    Trajectory ta = sample_backward_ar(trace, loose, rng_a, 3, &stats);
    ar_counts[static_cast<std::size_t>(ta.backward_indices[0]) * 3 +
              static_cast<std::size_t>(ta.backward_indices[1])] += 1;
  }
  CHECK(stats.fallbacks > 0);
  CHECK(stats.proposals > stats.accepts);
  int df = -1;
  for (std::size_t c = 0; c < 9; ++c)
    if (exact_counts[c] + ar_counts[c] > 0) ++df;
  CHECK(testutil::two_sample_chi_square(exact_counts, ar_counts) <
        testutil::chi_square_crit_001(df));
}

TEST_CASE("accept-reject requires a density bound and sane max_rejections") {
  DiscreteHmmParams hp = small_hmm();
  DiscreteHmmModel model(hp, obs_of({0.0, 1.0}));
  Rng frng(91);
  FilterTrace trace = run_filter(model, 8, frng);

  class NoBoundModel final : public StateSpaceModel {
   public:
    explicit NoBoundModel(const StateSpaceModel& inner) : inner_(inner) {}
    int state_dim() const override { return inner_.state_dim(); }
    int horizon() const override { return inner_.horizon(); }
    double initial_logdensity(ConstStateView x) const override { return inner_.initial_logdensity(x); }
    double initial_proposal_logdensity(ConstStateView x) const override {
      return inner_.initial_proposal_logdensity(x);
    }
    void sample_initial_proposal(Rng& rng, MutableStateView out) const override {
      inner_.sample_initial_proposal(rng, out);
    }
    double transition_logdensity(int k, ConstStateView x, ConstStateView next) const override {
      return inner_.transition_logdensity(k, x, next);
    }
    double emission_logdensity(int k, ConstStateView x) const override {
      return inner_.emission_logdensity(k, x);
    }
    double proposal_logdensity(int k, ConstStateView x, ConstStateView next) const override {
      return inner_.proposal_logdensity(k, x, next);
    }
    void sample_proposal(int k, ConstStateView x, Rng& rng, MutableStateView out) const override {
      inner_.sample_proposal(k, x, rng, out);
    }
   private:
    const StateSpaceModel& inner_;
  } unbounded(model);

  Rng rng(92);
  CHECK_THROWS_AS(sample_backward_ar(trace, unbounded, rng, 15, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(sample_backward_ar(trace, model, rng, 0, nullptr), std::invalid_argument);
}

TEST_CASE("multi-draw extraction is substream-deterministic and schedule-free") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(5, 16, 101, &model, keep);

  Rng rng(102);
  const bool was_parallel = kernels::parallel_enabled();

  kernels::set_parallel(false);
  auto serial = sample_backward_multi(trace, *model, rng, 12, true, 15, nullptr);
  kernels::set_parallel(true);
  auto parallel = sample_backward_multi(trace, *model, rng, 12, true, 15, nullptr);
  kernels::set_parallel(was_parallel);

  REQUIRE(serial.size() == 12);
  REQUIRE(parallel.size() == 12);
  for (std::size_t j = 0; j < 12; ++j) {
    CHECK(serial[j].states == parallel[j].states);
    CHECK(serial[j].backward_indices == parallel[j].backward_indices);
  }

  // Draw j is exactly the single-draw sampler run on substream j.
  for (std::size_t j = 0; j < 12; ++j) {
    Rng sub = rng.substream(static_cast<std::uint64_t>(j));
    Trajectory t = sample_backward_ar(trace, *model, sub, 15, nullptr);
    CHECK(t.states == serial[j].states);
    CHECK(t.backward_indices == serial[j].backward_indices);
  }

  BackwardSamplerStats merged;
  auto again = sample_backward_multi(trace, *model, rng, 12, true, 15, &merged);
  BackwardSamplerStats summed;
  for (std::size_t j = 0; j < 12; ++j) {
    BackwardSamplerStats s;
    Rng sub = rng.substream(static_cast<std::uint64_t>(j));
    sample_backward_ar(trace, *model, sub, 15, &s);
    summed.merge(s);
  }
  CHECK(merged.proposals == summed.proposals);
  CHECK(merged.accepts == summed.accepts);
  CHECK(merged.fallbacks == summed.fallbacks);
  CHECK_THROWS_AS(sample_backward_multi(trace, *model, rng, 0, false, 15, nullptr),
                  std::invalid_argument);
}

TEST_CASE("genealogy trace follows stored ancestors from a weighted terminal draw") {
  FilterTrace trace;
  ParticleCloud c0;
  c0.time_index = 0;
  c0.positions = {5.0, 6.0};
  c0.log_weights = {0.0, 0.0};
  c0.adjustment_weights = {1.0, 1.0};
  ParticleCloud c1;
  c1.time_index = 1;
  c1.positions = {7.0, 8.0};
  c1.log_weights = {std::log(0.8), std::log(0.2)};
  c1.adjustment_weights = {1.0, 1.0};
  c1.ancestors = {0, 0};
  trace.clouds = {c0, c1};

  Rng rng(111);
  std::vector<long long> terminal_counts(2, 0);
  const int draws = 5000;
  for (int d = 0; d < draws; ++d) {
    Trajectory t = extract_genealogy(trace, rng);
    CHECK(t.backward_indices[0] == 0);
    CHECK(t.state(0)[0] == 5.0);
    const int j = t.backward_indices[1];
    CHECK(t.state(1)[0] == c1.positions[static_cast<std::size_t>(j)]);
    terminal_counts[static_cast<std::size_t>(j)] += 1;
  }
  const std::vector<double> probs = {0.8, 0.2};
  CHECK(testutil::chi_square_stat(terminal_counts, probs) < testutil::chi_square_crit_001(1));
}

TEST_CASE("genealogy marginals accumulate terminal mass along lineages") {
  FilterTrace trace;
  ParticleCloud c0;
  c0.time_index = 0;
  c0.positions = {5.0, 6.0};
  c0.log_weights = {0.0, 0.0};
  c0.adjustment_weights = {1.0, 1.0};
  ParticleCloud c1;
  c1.time_index = 1;
  c1.positions = {7.0, 8.0};
  c1.log_weights = {std::log(0.8), std::log(0.2)};
  c1.adjustment_weights = {1.0, 1.0};
  c1.ancestors = {0, 0};
  trace.clouds = {c0, c1};

  SmoothingMarginals m = genealogy_marginals(trace);
  REQUIRE(m.horizon() == 1);
  CHECK(m.weights[1][0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.weights[1][1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(m.weights[0][0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.weights[0][1] == 0.0);
  CHECK(!m.pairwise.has_value());
}

TEST_CASE("marginal rows sum to one") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(7, 50, 121, &model, keep);

  SmoothingMarginals gt = genealogy_marginals(trace);
  SmoothingMarginals bsm = backward_smoothing_marginals(trace, *model, true);
  for (int k = 0; k <= trace.horizon(); ++k) {
    const auto& g = gt.weights[static_cast<std::size_t>(k)];
    const auto& b = bsm.weights[static_cast<std::size_t>(k)];
    CHECK(std::abs(std::accumulate(g.begin(), g.end(), 0.0) - 1.0) <= 1e-10);
    CHECK(std::abs(std::accumulate(b.begin(), b.end(), 0.0) - 1.0) <= 1e-10);
    for (double w : b) CHECK(w >= 0.0);
  }
}

TEST_CASE("pairwise weights marginalise to the adjacent rows") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(7, 50, 131, &model, keep);
  const int N = 50;

  SmoothingMarginals m = backward_smoothing_marginals(trace, *model, true);
  REQUIRE(m.pairwise.has_value());
  REQUIRE(m.pairwise->size() == static_cast<std::size_t>(trace.horizon()));
  for (int k = 0; k < trace.horizon(); ++k) {
    const auto& pw = (*m.pairwise)[static_cast<std::size_t>(k)];
    for (int i = 0; i < N; ++i) {
      double row = 0.0;
      for (int j = 0; j < N; ++j) row += pw[static_cast<std::size_t>(i) * N + j];
      CHECK(std::abs(row - m.weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]) <= 1e-10);
    }
    for (int j = 0; j < N; ++j) {
      double col = 0.0;
      for (int i = 0; i < N; ++i) col += pw[static_cast<std::size_t>(i) * N + j];
      CHECK(std::abs(col - m.weights[static_cast<std::size_t>(k) + 1][static_cast<std::size_t>(j)]) <= 1e-10);
    }
  }

  SmoothingMarginals without = backward_smoothing_marginals(trace, *model, false);
  CHECK(!without.pairwise.has_value());
  for (int k = 0; k <= trace.horizon(); ++k)
    CHECK(without.weights[static_cast<std::size_t>(k)] == m.weights[static_cast<std::size_t>(k)]);
}

TEST_CASE("source-independent transitions collapse smoothing onto the filter") {
  // When q(x, x') does not depend on x, the backward kernel equals the
  // filter weights at every time, so all marginal smoothers return them.
  DiscreteHmmParams hp = small_hmm();
  hp.transition = {0.6, 0.4, 0.6, 0.4};
  DiscreteHmmModel model(hp, obs_of({0.0, 1.0, 0.0, 0.0, 1.0}));
  Rng frng(141);
  FilterTrace trace = run_filter(model, 100, frng);

  SmoothingMarginals bsm = backward_smoothing_marginals(trace, model);
  for (int k = 0; k <= trace.horizon(); ++k) {
    std::vector<double> filt(100);
    normalized_exp(trace.clouds[static_cast<std::size_t>(k)].log_weights, filt);
    for (int i = 0; i < 100; ++i)
      CHECK(bsm.weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] ==
            doctest::Approx(filt[static_cast<std::size_t>(i)]).epsilon(1e-10));
  }
}

TEST_CASE("backward-smoothing marginals match exact smoothing on an enumerable model") {
  DiscreteHmmParams hp = small_hmm();
  Rng sim(151);
  SimulatedPath path = simulate_hmm(hp, 6, sim);
  ForwardBackwardResult exact = hmm_forward_backward(hp, path.obs);
  DiscreteHmmModel model(hp, path.obs);

  double tv_sum = 0.0;
  double pair_tv_sum = 0.0;
  int tv_count = 0, pair_count = 0;
  Rng master(152);
  for (int rep = 0; rep < 3; ++rep) {
    Rng rng = master.substream(static_cast<std::uint64_t>(rep));
    FilterTrace trace = run_filter(model, 3000, rng);
    SmoothingMarginals m = backward_smoothing_marginals(trace, model, true);
    for (int k = 0; k <= trace.horizon(); ++k) {
      std::vector<double> est(2, 0.0);
      for (int i = 0; i < 3000; ++i)
        est[static_cast<std::size_t>(std::lround(trace.clouds[static_cast<std::size_t>(k)].position(i)[0]))] +=
            m.weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      tv_sum += testutil::total_variation(est, exact.marginals[static_cast<std::size_t>(k)]);
      ++tv_count;
    }
    for (int k = 0; k < trace.horizon(); ++k) {
      std::vector<double> est(4, 0.0);
      const auto& pw = (*m.pairwise)[static_cast<std::size_t>(k)];
      for (int i = 0; i < 3000; ++i) {
        const int a = static_cast<int>(std::lround(trace.clouds[static_cast<std::size_t>(k)].position(i)[0]));
        for (int j = 0; j < 3000; ++j) {
          const int b = static_cast<int>(std::lround(trace.clouds[static_cast<std::size_t>(k) + 1].position(j)[0]));
          est[static_cast<std::size_t>(a) * 2 + b] += pw[static_cast<std::size_t>(i) * 3000 + j];
        }
      }
      pair_tv_sum += testutil::total_variation(est, exact.pairwise[static_cast<std::size_t>(k)]);
      ++pair_count;
    }
  }
  CHECK(tv_sum / tv_count < 0.02);
  CHECK(pair_tv_sum / pair_count < 0.04);
}

TEST_CASE("genealogy support collapses while the backward recursion keeps full support") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(61, 20, 161, &model, keep);

  SmoothingMarginals gt = genealogy_marginals(trace);
  SmoothingMarginals bsm = backward_smoothing_marginals(trace, *model);

  int gt_support = 0, bsm_support = 0;
  for (int i = 0; i < 20; ++i) {
    if (gt.weights[0][static_cast<std::size_t>(i)] > 0.0) ++gt_support;
    if (bsm.weights[0][static_cast<std::size_t>(i)] > 1e-300) ++bsm_support;
  }
  CHECK(gt_support <= 5);
  CHECK(bsm_support == 20);
  CHECK(gt_support < bsm_support);
}

TEST_CASE("relabelling particles permutes the marginals and nothing else") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(6, 8, 171, &model, keep);
  const int N = 8;
  const int kp = 3;  // permuted time slice

  const std::vector<int> perm = {5, 2, 7, 0, 3, 6, 1, 4};  // new j holds old perm[j]
  std::vector<int> inv(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = j;

  FilterTrace shuffled = trace;
  auto& ck = shuffled.clouds[kp];
  const auto& orig = trace.clouds[kp];
  for (int j = 0; j < N; ++j) {
    const int src = perm[static_cast<std::size_t>(j)];
    ck.positions[static_cast<std::size_t>(j)] = orig.positions[static_cast<std::size_t>(src)];
    ck.log_weights[static_cast<std::size_t>(j)] = orig.log_weights[static_cast<std::size_t>(src)];
    ck.adjustment_weights[static_cast<std::size_t>(j)] = orig.adjustment_weights[static_cast<std::size_t>(src)];
    ck.ancestors[static_cast<std::size_t>(j)] = orig.ancestors[static_cast<std::size_t>(src)];
  }
  auto& next = shuffled.clouds[kp + 1];
  for (int i = 0; i < N; ++i)
    next.ancestors[static_cast<std::size_t>(i)] =
        inv[static_cast<std::size_t>(trace.clouds[kp + 1].ancestors[static_cast<std::size_t>(i)])];

  CHECK(std::abs(log_z_estimate(shuffled) - log_z_estimate(trace)) <= 1e-12);

  SmoothingMarginals base = backward_smoothing_marginals(trace, *model);
  SmoothingMarginals moved = backward_smoothing_marginals(shuffled, *model);
  SmoothingMarginals gt_base = genealogy_marginals(trace);
  SmoothingMarginals gt_moved = genealogy_marginals(shuffled);
  for (int k = 0; k <= trace.horizon(); ++k) {
    for (int j = 0; j < N; ++j) {
      const int src = (k == kp) ? perm[static_cast<std::size_t>(j)] : j;
      CHECK(moved.weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] ==
            doctest::Approx(base.weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(src)])
                .epsilon(1e-9));
      CHECK(gt_moved.weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] ==
            doctest::Approx(gt_base.weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(src)])
                .epsilon(1e-9));
    }
  }
}

TEST_CASE("smoothed expectations integrate the marginal weights") {
  std::vector<GrowthModel> keep;
  GrowthModel* model = nullptr;
  FilterTrace trace = growth_trace(5, 30, 181, &model, keep);
  SmoothingMarginals m = backward_smoothing_marginals(trace, *model);

  for (int k = 0; k <= trace.horizon(); ++k) {
    CHECK(smoothed_expectation(trace, m, k, [](ConstStateView) { return 1.0; }) ==
          doctest::Approx(1.0).epsilon(1e-10));
    double by_hand = 0.0;
    for (int i = 0; i < 30; ++i)
      by_hand += m.weights[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
                 trace.clouds[static_cast<std::size_t>(k)].position(i)[0];
    CHECK(smoothed_expectation(trace, m, k, [](ConstStateView x) { return x[0]; }) ==
          doctest::Approx(by_hand).epsilon(1e-12));
  }
  CHECK_THROWS_AS(
      smoothed_expectation(trace, m, trace.horizon() + 1, [](ConstStateView) { return 1.0; }),
      std::invalid_argument);
}
