#pragma once

#include <limits>
#include <span>
#include <vector>

namespace psmooth {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log N(x; mean, variance). variance must be > 0.
double gaussian_logpdf(double x, double mean, double variance);

// log sum_i exp(v[i]) with max subtraction; -inf for an all -inf input.
double logsumexp(std::span<const double> values);

// Normalised exp(v[i] - logsumexp(v)). Returns the logsumexp. An all -inf
// input yields -inf and leaves out zero-filled; callers treat that as a
// degenerate distribution.
double normalized_exp(std::span<const double> log_values, std::span<double> out);

// Unbiased sample variance (divide by n-1); n must be >= 2.
double sample_variance(std::span<const double> values);

double mean(std::span<const double> values);

// Geometric mean of strictly positive values.
double geometric_mean(std::span<const double> values);

}  // namespace psmooth
