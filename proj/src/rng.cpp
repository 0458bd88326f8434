#include "psmooth/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace psmooth {

namespace {

// splitmix64; used only to decorrelate seeds, not as the working generator.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double variance) {
  return mean + std::sqrt(variance) * normal();
}

Rng Rng::substream(std::uint64_t stream) const {
  return Rng(mix64(seed_ ^ mix64(stream + 0x51eedULL)));
}

int sample_from_cdf(std::span<const double> cdf, double u) {
  if (cdf.empty()) throw std::invalid_argument("sample_from_cdf: empty cdf");
  const double total = cdf.back();
  if (!(total > 0.0)) throw std::invalid_argument("sample_from_cdf: zero total mass");
  const double target = u * total;
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  if (it == cdf.end()) --it;
  return static_cast<int>(it - cdf.begin());
}

void inclusive_prefix_sums(std::span<const double> weights, std::span<double> out) {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    out[i] = acc;
  }
}

}  // namespace psmooth
