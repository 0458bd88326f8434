#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "psmooth/analysis.hpp"
#include "psmooth/numerics.hpp"
#include "psmooth/rng.hpp"

using namespace psmooth;

TEST_CASE("time-average variance constant by hand") {
  // R = 4 keeps exactly one lag: gamma(0) + 2 (1 - 1/4) gamma(1).
  const std::vector<double> rising = {1.0, 2.0, 3.0, 4.0};
  TavcEstimate t = tavc(rising);
  CHECK(t.value == doctest::Approx(1.71875).epsilon(1e-12));
  CHECK_FALSE(t.floored);
  CHECK_FALSE(t.nonstationary);

  const std::vector<double> alternating = {1.0, -1.0, 1.0, -1.0};
  TavcEstimate a = tavc(alternating);
  CHECK(a.value == 0.0);  // raw sum is 1 - 1.5 * 0.75 = -0.125
  CHECK(a.floored);
}

TEST_CASE("constant series have zero variance constant") {
  const std::vector<double> flat(64, 5.0);
  TavcEstimate t = tavc(flat);
  CHECK(t.value == 0.0);
  CHECK_FALSE(t.floored);
  CHECK_FALSE(t.nonstationary);
}

TEST_CASE("independent draws give the marginal variance") {
  Rng rng(301);
  std::vector<double> series(100000);
  for (double& x : series) x = rng.normal();
  TavcEstimate t = tavc(series);
  CHECK(t.value == doctest::Approx(1.0).epsilon(0.15));
  CHECK_FALSE(t.floored);
  CHECK_FALSE(t.nonstationary);
}

TEST_CASE("autoregressive series with known long-run variance") {
  // x_t = 0.5 x_{t-1} + e_t with unit innovations: marginal variance 4/3,
  // autocovariances gamma(l) = (4/3) 0.5^l, long-run sum 4.
  Rng rng(302);
  const int R = 100000;
  std::vector<double> series(static_cast<std::size_t>(R));
  double x = rng.normal(0.0, 4.0 / 3.0);
  for (int t = 0; t < R; ++t) {
    series[static_cast<std::size_t>(t)] = x;
    x = 0.5 * x + rng.normal();
  }
  TavcEstimate t = tavc(series);
  CHECK(t.value == doctest::Approx(4.0).epsilon(0.15));
  CHECK_FALSE(t.nonstationary);
}

TEST_CASE("trending series are flagged nonstationary") {
  std::vector<double> trend(1000);
  for (int i = 0; i < 1000; ++i) trend[static_cast<std::size_t>(i)] = static_cast<double>(i);
  TavcEstimate t = tavc(trend);
  CHECK(t.nonstationary);
  CHECK(t.value > 0.0);
}

TEST_CASE("variance constant needs four points") {
  const std::vector<double> three = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(tavc(three), std::invalid_argument);
}

TEST_CASE("within-sweep variance averages the per-sweep spread") {
  CHECK(within_cloud_variance({{0.0, 2.0}, {0.0, 2.0}}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(within_cloud_variance({{1.0, 1.0, 1.0}, {5.0, 5.0}}) == 0.0);
  CHECK(within_cloud_variance({{0.0, 2.0}, {1.0, 1.0}}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(within_cloud_variance({}), std::invalid_argument);
}

TEST_CASE("estimator variance combines within- and between-sweep parts") {
  CHECK(estimator_variance(2.0, 1.0, 4, 100) == doctest::Approx(0.015).epsilon(1e-12));
  CHECK(estimator_variance(0.0, 1.0, 4, 100) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(estimator_variance(2.0, 0.0, 1, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(estimator_variance(-1.0, 1.0, 4, 100), std::invalid_argument);
  CHECK_THROWS_AS(estimator_variance(1.0, 1.0, 0, 100), std::invalid_argument);
  CHECK_THROWS_AS(estimator_variance(1.0, 1.0, 4, 0), std::invalid_argument);
}

TEST_CASE("trajectory-count rule balances sampling cost against mixing") {
  CHECK(j_opt(4.0, 1.0, 1.0, 4.0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(j_opt(1.0, 1.0, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

  // Scaling both timings leaves the rule unchanged; quadrupling the
  // within-sweep variance doubles it.
  CHECK(j_opt(4.0, 1.0, 10.0, 40.0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(j_opt(16.0, 1.0, 1.0, 4.0) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK_THROWS_AS(j_opt(0.0, 1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(j_opt(1.0, 1.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("recommended trajectory count rounds the geometric mean") {
  const std::vector<double> near_seven = {6.98, 6.98, 6.98};
  CHECK(recommended_j(near_seven) == 7);
  const std::vector<double> two_eight = {2.0, 8.0};
  CHECK(recommended_j(two_eight) == 4);
  const std::vector<double> tiny = {0.2, 0.2};
  CHECK(recommended_j(tiny) == 1);  // floor at one trajectory
  const std::vector<double> single = {25.4};
  CHECK(recommended_j(single) == 25);
}

TEST_CASE("efficiency is inverse variance per unit time") {
  CHECK(efficiency(0.05, 2.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(efficiency(1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(efficiency(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(efficiency(1.0, 0.0), std::invalid_argument);
}
