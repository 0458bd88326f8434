#pragma once

// Shared oracle helpers for the test binaries. Everything here is written
// independently of the library code paths it checks: dense linear algebra for
// the joint-Gaussian smoothing oracle, brute-force path enumeration for small
// HMMs, Simpson quadrature, and chi-square machinery for distributional tests.

#include <cmath>
#include <numbers>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace testutil {

// ----- dense symmetric solve (Cholesky), for matrices up to a few dozen -----

struct Cholesky {
  int n = 0;
  std::vector<double> l;  // lower triangle, row-major n x n

  static Cholesky factor(const std::vector<double>& a, int n) {
    Cholesky c;
    c.n = n;
    c.l.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) {
        double s = a[static_cast<std::size_t>(i) * n + j];
        for (int k = 0; k < j; ++k)
          s -= c.l[static_cast<std::size_t>(i) * n + k] * c.l[static_cast<std::size_t>(j) * n + k];
        if (i == j) {
          if (s <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
          c.l[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
        } else {
          c.l[static_cast<std::size_t>(i) * n + j] = s / c.l[static_cast<std::size_t>(j) * n + j];
        }
      }
    }
    return c;
  }

  std::vector<double> solve(std::vector<double> b) const {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < i; ++k) b[static_cast<std::size_t>(i)] -= l[static_cast<std::size_t>(i) * n + k] * b[static_cast<std::size_t>(k)];
      b[static_cast<std::size_t>(i)] /= l[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
      for (int k = i + 1; k < n; ++k) b[static_cast<std::size_t>(i)] -= l[static_cast<std::size_t>(k) * n + i] * b[static_cast<std::size_t>(k)];
      b[static_cast<std::size_t>(i)] /= l[static_cast<std::size_t>(i) * n + i];
    }
    return b;
  }

  double log_det() const {  // of the factored matrix
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::log(l[static_cast<std::size_t>(i) * n + i]);
    return 2.0 * acc;
  }
};

// Joint-Gaussian smoothing oracle for the scalar AR(1)-plus-noise model:
// prior X_0 ~ N(m0, v0), X_{t+1} = phi X_t + N(0, q), observed y_t = c X_t +
// N(0, r). Conditions the full state vector on all observations at once.
struct JointGaussianResult {
  std::vector<double> means;
  std::vector<double> vars;
  double loglik = 0.0;
};

inline JointGaussianResult joint_gaussian_smoother(double phi, double q, double c, double r,
                                                   double m0, double v0,
                                                   const std::vector<double>& y) {
  const int n = static_cast<int>(y.size());
  // Prior mean and covariance of (X_0 .. X_{n-1}).
  std::vector<double> mu(static_cast<std::size_t>(n));
  std::vector<double> var(static_cast<std::size_t>(n));
  mu[0] = m0;
  var[0] = v0;
  for (int t = 1; t < n; ++t) {
    mu[static_cast<std::size_t>(t)] = phi * mu[static_cast<std::size_t>(t - 1)];
    var[static_cast<std::size_t>(t)] = phi * phi * var[static_cast<std::size_t>(t - 1)] + q;
  }
  std::vector<double> sigma(static_cast<std::size_t>(n) * n);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) {
      const int lo = std::min(s, t);
      sigma[static_cast<std::size_t>(s) * n + t] =
          std::pow(phi, std::abs(s - t)) * var[static_cast<std::size_t>(lo)];
    }
  // Observation covariance S = c^2 Sigma + r I; cross-cov = c Sigma.
  std::vector<double> s_mat(sigma);
  for (auto& v : s_mat) v *= c * c;
  for (int i = 0; i < n; ++i) s_mat[static_cast<std::size_t>(i) * n + i] += r;
  const auto chol = Cholesky::factor(s_mat, n);

  std::vector<double> resid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) resid[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] - c * mu[static_cast<std::size_t>(i)];
  const auto alpha = chol.solve(resid);

  JointGaussianResult res;
  res.means.resize(static_cast<std::size_t>(n));
  res.vars.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double acc = mu[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j)
      acc += c * sigma[static_cast<std::size_t>(i) * n + j] * alpha[static_cast<std::size_t>(j)];
    res.means[static_cast<std::size_t>(i)] = acc;
    // var - (c sigma_i.) S^{-1} (c sigma_.i)
    std::vector<double> cross(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) cross[static_cast<std::size_t>(j)] = c * sigma[static_cast<std::size_t>(i) * n + j];
    const auto w = chol.solve(cross);
    double red = 0.0;
    for (int j = 0; j < n; ++j) red += cross[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)];
    res.vars[static_cast<std::size_t>(i)] = sigma[static_cast<std::size_t>(i) * n + i] - red;
  }
  double quad = 0.0;
  for (int i = 0; i < n; ++i) quad += resid[static_cast<std::size_t>(i)] * alpha[static_cast<std::size_t>(i)];
  res.loglik = -0.5 * (n * std::log(2.0 * std::numbers::pi) + chol.log_det() + quad);
  return res;
}

// ----- brute-force HMM smoothing oracle (tiny state spaces only) -----

struct HmmEnumerationResult {
  std::vector<std::vector<double>> marginals;  // [k][state]
  std::vector<std::vector<double>> pairwise;   // [k][i * S + j]
  double loglik = 0.0;
};

inline HmmEnumerationResult enumerate_hmm_paths(int n_states, const std::vector<double>& initial,
                                                const std::vector<double>& transition,
                                                const std::vector<double>& emission, int n_symbols,
                                                const std::vector<int>& obs) {
  const int n1 = static_cast<int>(obs.size());
  HmmEnumerationResult res;
  res.marginals.assign(static_cast<std::size_t>(n1), std::vector<double>(n_states, 0.0));
  res.pairwise.assign(static_cast<std::size_t>(n1 - 1),
                      std::vector<double>(static_cast<std::size_t>(n_states) * n_states, 0.0));
  double total = 0.0;
  std::vector<int> path(static_cast<std::size_t>(n1), 0);
  const long long n_paths = static_cast<long long>(std::pow(n_states, n1));
  for (long long code = 0; code < n_paths; ++code) {
    long long rest = code;
    for (int k = 0; k < n1; ++k) {
      path[static_cast<std::size_t>(k)] = static_cast<int>(rest % n_states);
      rest /= n_states;
    }
    double p = initial[static_cast<std::size_t>(path[0])] *
               emission[static_cast<std::size_t>(path[0]) * n_symbols + obs[0]];
    for (int k = 1; k < n1; ++k)
      p *= transition[static_cast<std::size_t>(path[static_cast<std::size_t>(k - 1)]) * n_states +
                      path[static_cast<std::size_t>(k)]] *
           emission[static_cast<std::size_t>(path[static_cast<std::size_t>(k)]) * n_symbols +
                    obs[static_cast<std::size_t>(k)]];
    total += p;
    for (int k = 0; k < n1; ++k) res.marginals[static_cast<std::size_t>(k)][static_cast<std::size_t>(path[static_cast<std::size_t>(k)])] += p;
    for (int k = 0; k + 1 < n1; ++k)
      res.pairwise[static_cast<std::size_t>(k)]
                  [static_cast<std::size_t>(path[static_cast<std::size_t>(k)]) * n_states +
                   path[static_cast<std::size_t>(k + 1)]] += p;
  }
  for (auto& row : res.marginals)
    for (auto& v : row) v /= total;
  for (auto& row : res.pairwise)
    for (auto& v : row) v /= total;
  res.loglik = std::log(total);
  return res;
}

// ----- quadrature, chi-square, misc -----

inline double simpson(const std::function<double(double)>& f, double a, double b, int n_panels) {
  const int n = 2 * n_panels;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Upper alpha = 0.001 chi-square quantile by Wilson-Hilferty; accurate to a
// few permille for df >= 1, plenty for a pass/fail threshold.
inline double chi_square_crit_001(int df) {
  const double z = 3.090232306167813;  // Phi^{-1}(0.999)
  const double d = static_cast<double>(df);
  const double t = 1.0 - 2.0 / (9.0 * d) + z * std::sqrt(2.0 / (9.0 * d));
  return d * t * t * t;
}

inline double chi_square_stat(std::span<const long long> counts, std::span<const double> probs) {
  long long total = 0;
  for (auto c : counts) total += c;
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expd = probs[i] * static_cast<double>(total);
    if (expd <= 0.0) {
      if (counts[i] != 0) throw std::runtime_error("chi_square_stat: mass on zero-probability cell");
      continue;
    }
    const double d = static_cast<double>(counts[i]) - expd;
    stat += d * d / expd;
  }
  return stat;
}

// Equal-size two-sample chi-square over shared cells; df = cells - 1.
inline double two_sample_chi_square(std::span<const long long> a, std::span<const long long> b) {
  double stat = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double s = static_cast<double>(a[i] + b[i]);
    if (s == 0.0) continue;
    const double d = static_cast<double>(a[i] - b[i]);
    stat += d * d / s;
  }
  return stat;
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

}  // namespace testutil
