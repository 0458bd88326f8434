#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace psmooth {

// Seedable generator with a portable draw discipline. All stochastic code in
// the library draws through this class only, so a run is reproducible from
// its seed alone. uniform() and normal() are implemented on top of the
// standard-specified mt19937_64 word sequence rather than std::*_distribution,
// whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();

  // Standard normal via Box-Muller. Stateless across calls: every call
  // consumes exactly two uniforms and no cached mate is kept.
  double normal();

  double normal(double mean, double variance);

  // Independent generator derived from (original seed, stream). Substreams of
  // the same Rng with distinct stream ids are independent regardless of how
  // many draws the parent has consumed; used for parallel backward draws and
  // multi-chain runs.
  Rng substream(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Index into a categorical distribution given its inclusive cumulative sums.
// cdf must be nondecreasing with cdf.back() > 0; u in [0, 1). Returns the
// smallest i with u * cdf.back() < cdf[i].
int sample_from_cdf(std::span<const double> cdf, double u);

// Inclusive prefix sums of nonnegative weights, reused for inverse-CDF draws.
void inclusive_prefix_sums(std::span<const double> weights, std::span<double> out);

}  // namespace psmooth
