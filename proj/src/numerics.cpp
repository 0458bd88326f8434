#include "psmooth/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace psmooth {

double gaussian_logpdf(double x, double mean, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian_logpdf: variance must be > 0");
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double logsumexp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("logsumexp: empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (!(m > kNegInf)) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double normalized_exp(std::span<const double> log_values, std::span<double> out) {
  if (log_values.size() != out.size())
    throw std::invalid_argument("normalized_exp: size mismatch");
  if (log_values.empty()) throw std::invalid_argument("normalized_exp: empty input");
  const double m = *std::max_element(log_values.begin(), log_values.end());
  if (!(m > kNegInf)) {
    std::fill(out.begin(), out.end(), 0.0);
    return kNegInf;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < log_values.size(); ++i) {
    out[i] = std::exp(log_values[i] - m);
    acc += out[i];
  }
  for (auto& v : out) v /= acc;
  return m + std::log(acc);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean: empty input");
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("sample_variance: need at least 2 values");
  const double m = mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return acc / static_cast<double>(values.size() - 1);
}

double geometric_mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("geometric_mean: empty input");
  double acc = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) throw std::invalid_argument("geometric_mean: values must be > 0");
    acc += std::log(v);
  }
  return std::exp(acc / static_cast<double>(values.size()));
}

}  // namespace psmooth
