// Timing comparison of the serial and OpenMP kernel variants, plus the
// end-to-end paths built on them (full filter run, backward-smoothing
// marginals). The variants are bit-identical by construction, so the table
// verifies equality while it measures.
//
// Usage: bench_kernels [N ...]   (default particle counts: 256 1024 4096)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "psmooth/filter.hpp"
#include "psmooth/growth_model.hpp"
#include "psmooth/kernels.hpp"
#include "psmooth/rng.hpp"
#include "psmooth/smoother.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace psmooth;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, s);
  }
  return best;
}

bool equal_values(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i] && !(std::isnan(a[i]) && std::isnan(b[i]))) return false;
  return true;
}

void report(const char* name, int n, double serial_s, double omp_s, bool identical) {
  std::printf("%-24s N=%-6d serial %10.6f s   omp %10.6f s   speedup %5.2fx   %s\n", name, n,
              serial_s, omp_s, omp_s > 0.0 ? serial_s / omp_s : 0.0,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> sizes;
  for (int i = 1; i < argc; ++i) sizes.push_back(std::atoi(argv[i]));
  if (sizes.empty()) sizes = {256, 1024, 4096};

#ifdef _OPENMP
  std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("openmp disabled; the omp variants fall back to the serial code\n");
#endif

  const int n_obs = 20;
  GrowthModelParams params;
  Rng sim_rng(2024);
  const SimulatedPath path = simulate_growth(params, n_obs, sim_rng);
  const GrowthModel model(params, path.obs);

  bool all_identical = true;
  for (const int n : sizes) {
    if (n < 1) continue;
    Rng filter_rng(91 + static_cast<std::uint64_t>(n));
    kernels::set_parallel(true);
    const FilterTrace trace = run_filter(model, n, filter_rng);
    const ParticleCloud& from = trace.clouds[n_obs / 2 - 1];
    const ParticleCloud& to = trace.clouds[n_obs / 2];
    const int reps = n <= 1024 ? 7 : 3;
    const std::size_t nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);

    {
      std::vector<double> l_serial(nn), l_omp(nn);
      const double ts = time_best_of(reps, [&] {
        kernels::transition_matrix_serial(model, from.time_index, from, to, l_serial);
      });
      const double tp = time_best_of(
          reps, [&] { kernels::transition_matrix_omp(model, from.time_index, from, to, l_omp); });
      const bool same = equal_values(l_serial, l_omp);
      all_identical = all_identical && same;
      report("transition_matrix", n, ts, tp, same);
    }
    {
      std::vector<double> l(nn);
      kernels::transition_matrix(model, from.time_index, from, to, l);
      std::vector<double> v_next(static_cast<std::size_t>(n), 1.0 / n);
      std::vector<double> l_s = l, l_p = l, v_serial(static_cast<std::size_t>(n)),
                          v_omp(static_cast<std::size_t>(n));
      const double ts = time_best_of(reps, [&] {
        l_s = l;
        kernels::backward_marginal_step_serial(from.log_weights, l_s, n, n, v_next, v_serial,
                                               from.time_index, false);
      });
      const double tp = time_best_of(reps, [&] {
        l_p = l;
        kernels::backward_marginal_step_omp(from.log_weights, l_p, n, n, v_next, v_omp,
                                            from.time_index, false);
      });
      const bool same = equal_values(v_serial, v_omp);
      all_identical = all_identical && same;
      report("backward_marginal_step", n, ts, tp, same);
    }
    {
      std::vector<double> w_serial(static_cast<std::size_t>(n)), w_omp(static_cast<std::size_t>(n));
      const double ts = time_best_of(reps, [&] {
        kernels::step_log_weights_serial(model, from, to.ancestors, to.positions, w_serial);
      });
      const double tp = time_best_of(reps, [&] {
        kernels::step_log_weights_omp(model, from, to.ancestors, to.positions, w_omp);
      });
      const bool same = equal_values(w_serial, w_omp);
      all_identical = all_identical && same;
      report("step_log_weights", n, ts, tp, same);
    }
    {
      // End to end: one filter run and one full marginal smoothing pass under
      // each dispatch setting, seeded identically.
      const auto run_both = [&](bool parallel, std::vector<double>* out) {
        kernels::set_parallel(parallel);
        Rng rng(7);
        const FilterTrace t = run_filter(model, n, rng);
        const SmoothingMarginals marg = backward_smoothing_marginals(t, model);
        out->clear();
        for (const auto& row : marg.weights) out->insert(out->end(), row.begin(), row.end());
        out->push_back(t.log_z);
      };
      std::vector<double> serial_out, omp_out;
      const double ts = time_best_of(1, [&] { run_both(false, &serial_out); });
      const double tp = time_best_of(1, [&] { run_both(true, &omp_out); });
      const bool same = equal_values(serial_out, omp_out);
      all_identical = all_identical && same;
      report("filter+bsm end-to-end", n, ts, tp, same);
      kernels::set_parallel(true);
    }
  }
  std::printf("%s\n", all_identical ? "all variants bit-identical"
                                    : "MISMATCH between serial and omp variants");
  return all_identical ? 0 : 1;
}
