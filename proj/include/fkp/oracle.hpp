#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fkp/model.hpp"
#include "fkp/rng.hpp"

namespace fkp {

// Reference-solution configuration: plain Monte Carlo over the Brownian
// endpoint or deterministic Gauss-Hermite quadrature (d <= 2).
struct OracleConfig {
  enum class Method { kMonteCarlo, kGaussHermite };
  Method method = Method::kGaussHermite;
  int samples = 10000;
  int nodes = 200;
  std::uint64_t seed = 0;

  static OracleConfig monte_carlo(int samples, std::uint64_t seed) {
    if (samples < 1) throw std::domain_error("oracle needs samples >= 1");
    OracleConfig c;
    c.method = Method::kMonteCarlo;
    c.samples = samples;
    c.seed = seed;
    return c;
  }

  static OracleConfig gauss_hermite(int nodes) {
    if (nodes < 2) throw std::domain_error("oracle needs nodes >= 2");
    OracleConfig c;
    c.method = Method::kGaussHermite;
    c.nodes = nodes;
    return c;
  }
};

struct OracleValue {
  double value = 0.0;
  double std_error = 0.0;  // 0 for quadrature
};

namespace detail {

// Implicit-QL diagonalization of a symmetric tridiagonal matrix, tracking
// only the first row of the eigenvector matrix (Golub-Welsch). diag holds
// the eigenvalues ascending on return; first_row the matching first
// eigenvector components.
inline void tridiagonal_eigen_first_row(std::vector<double>& diag,
                                        std::vector<double>& off,
                                        std::vector<double>& first_row) {
  const int n = static_cast<int>(diag.size());
  constexpr double eps = 2.220446049250313e-16;
  off.resize(n);
  off[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    for (int iter = 0;; ++iter) {
      int m = l;
      while (m < n - 1 &&
             std::abs(off[m]) > eps * (std::abs(diag[m]) + std::abs(diag[m + 1])))
        ++m;
      if (m == l) break;
      if (iter >= 60)
        throw std::runtime_error("gauss-hermite eigensolve failed");
      double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
      double r = std::hypot(g, 1.0);
      g = diag[m] - diag[l] + off[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (int i = m - 1; i >= l; --i) {
        double f = s * off[i];
        const double b = c * off[i];
        r = std::hypot(f, g);
        off[i + 1] = r;
        if (r == 0.0) {
          diag[i + 1] -= p;
          off[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = diag[i + 1] - p;
        r = (diag[i] - g) * s + 2.0 * c * b;
        p = s * r;
        diag[i + 1] = g + p;
        g = c * r - b;
        f = first_row[i + 1];
        first_row[i + 1] = s * first_row[i] + c * f;
        first_row[i] = c * first_row[i] - s * f;
      }
      if (underflow) continue;
      diag[l] -= p;
      off[l] = g;
      off[m] = 0.0;
    }
  }
  // Sort eigenvalues ascending, carrying the first-row components.
  for (int i = 0; i < n - 1; ++i) {
    int k = i;
    for (int j = i + 1; j < n; ++j)
      if (diag[j] < diag[k]) k = j;
    std::swap(diag[i], diag[k]);
    std::swap(first_row[i], first_row[k]);
  }
}

}  // namespace detail

// Gauss-Hermite abscissas/weights for int e^{-x^2} f(x) dx via Golub-Welsch
// on the Jacobi matrix (robust for large node counts). Nodes descending.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussHermite(int n) {
    if (n < 2) throw std::domain_error("gauss-hermite needs n >= 2");
    std::vector<double> diag(n, 0.0);
    std::vector<double> off(n, 0.0);
    std::vector<double> first(n, 0.0);
    for (int j = 0; j + 1 < n; ++j) off[j] = std::sqrt((j + 1) / 2.0);
    first[0] = 1.0;
    detail::tridiagonal_eigen_first_row(diag, off, first);
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const double mu0 = std::sqrt(M_PI);  // int e^{-x^2}
    for (int i = 0; i < n; ++i) {
      nodes[i] = diag[n - 1 - i];
      weights[i] = mu0 * first[n - 1 - i] * first[n - 1 - i];
    }
    // The Jacobi matrix is symmetric; enforce exact node symmetry.
    for (int i = 0; i < n / 2; ++i) {
      const double mag = 0.5 * (std::abs(nodes[i]) + std::abs(nodes[n - 1 - i]));
      nodes[i] = mag;
      nodes[n - 1 - i] = -mag;
      const double w = 0.5 * (weights[i] + weights[n - 1 - i]);
      weights[i] = w;
      weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
  }
};

namespace detail {

inline const GaussHermite& cached_gauss_hermite(int n) {
  thread_local GaussHermite rule(2);
  thread_local int cached_n = 2;
  if (cached_n != n) {
    rule = GaussHermite(n);
    cached_n = n;
  }
  return rule;
}

// E[f(Z)] for one standard normal coordinate via Gauss-Hermite.
template <typename Fn>
double gh_normal_expectation(int n, Fn&& f) {
  const auto& rule = cached_gauss_hermite(n);
  const double norm = 1.0 / std::sqrt(M_PI);
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    sum += rule.weights[i] * f(std::sqrt(2.0) * rule.nodes[i]);
  return sum * norm;
}

}  // namespace detail

// Standard normal CDF; U_0 of the built-in Gaussian initial condition.
inline double u0_cumulative(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// Cole-Hopf solution of the d=1 Burgers benchmark:
//   u(t,x) = E[u0(x + nu B_t) e^{-U0(x + nu B_t)/nu^2}]
//          / E[e^{-U0(x + nu B_t)/nu^2}].
// Both expectations use the same draws (ratio estimator).
inline OracleValue burgers_reference_stats(double t, double x, double nu,
                                           const OracleConfig& cfg) {
  if (t < 0.0) throw std::domain_error("burgers_reference: t < 0");
  if (nu <= 0.0) throw std::domain_error("burgers_reference: nu <= 0");
  const double sigma = nu * std::sqrt(t);
  const double inv_nu2 = 1.0 / (nu * nu);
  auto numerator_term = [&](double y) {
    return standard_normal_pdf(y) * std::exp(-u0_cumulative(y) * inv_nu2);
  };
  auto denominator_term = [&](double y) {
    return std::exp(-u0_cumulative(y) * inv_nu2);
  };
  if (cfg.method == OracleConfig::Method::kGaussHermite) {
    const double num = detail::gh_normal_expectation(
        cfg.nodes, [&](double z) { return numerator_term(x + sigma * z); });
    const double den = detail::gh_normal_expectation(
        cfg.nodes, [&](double z) { return denominator_term(x + sigma * z); });
    if (!(den > 0.0))
      throw std::runtime_error("burgers_reference: degenerate denominator");
    return {num / den, 0.0};
  }
  RandomStream stream(cfg.seed, StreamPurpose::kOracle, 0);
  const int m = cfg.samples;
  double sum_a = 0.0, sum_b = 0.0, sum_aa = 0.0, sum_bb = 0.0, sum_ab = 0.0;
  for (int s = 0; s < m; ++s) {
    const double y = x + sigma * stream.normal();
    const double b = denominator_term(y);
    const double a = standard_normal_pdf(y) * b;
    sum_a += a;
    sum_b += b;
    sum_aa += a * a;
    sum_bb += b * b;
    sum_ab += a * b;
  }
  const double mean_a = sum_a / m;
  const double mean_b = sum_b / m;
  if (!(mean_b > 0.0))
    throw std::runtime_error("burgers_reference: degenerate denominator");
  const double ratio = mean_a / mean_b;
  if (m < 2) return {ratio, 0.0};
  const double var_a = (sum_aa / m - mean_a * mean_a) * m / (m - 1.0);
  const double var_b = (sum_bb / m - mean_b * mean_b) * m / (m - 1.0);
  const double cov = (sum_ab / m - mean_a * mean_b) * m / (m - 1.0);
  const double var_ratio =
      (var_a - 2.0 * ratio * cov + ratio * ratio * var_b) /
      (m * mean_b * mean_b);
  return {ratio, std::sqrt(std::max(0.0, var_ratio))};
}

inline double burgers_reference(double t, double x, double nu,
                                const OracleConfig& cfg) {
  return burgers_reference_stats(t, x, nu, cfg).value;
}

// KPZ benchmark u(t,x) = log E[exp(u0(x + nu B_t))] with a d-dimensional
// Brownian endpoint. The initial condition is pluggable for tests.
inline OracleValue kpz_reference_stats(
    double t, std::span<const double> x, double nu, const OracleConfig& cfg,
    const DensityFn& u0 = standard_gaussian_density) {
  if (t < 0.0) throw std::domain_error("kpz_reference: t < 0");
  if (nu <= 0.0) throw std::domain_error("kpz_reference: nu <= 0");
  const int d = static_cast<int>(x.size());
  const double sigma = nu * std::sqrt(t);
  if (cfg.method == OracleConfig::Method::kGaussHermite) {
    if (d > 2)
      throw std::invalid_argument(
          "kpz_reference: quadrature supports d <= 2 only");
    std::vector<double> y(d);
    double mean;
    if (d == 1) {
      mean = detail::gh_normal_expectation(cfg.nodes, [&](double z) {
        y[0] = x[0] + sigma * z;
        return std::exp(u0(y));
      });
    } else {
      mean = detail::gh_normal_expectation(cfg.nodes, [&](double z0) {
        y[0] = x[0] + sigma * z0;
        return detail::gh_normal_expectation(cfg.nodes, [&](double z1) {
          y[1] = x[1] + sigma * z1;
          return std::exp(u0(y));
        });
      });
    }
    return {std::log(mean), 0.0};
  }
  RandomStream stream(cfg.seed, StreamPurpose::kOracle, 1);
  const int m = cfg.samples;
  std::vector<double> y(d);
  double sum = 0.0, sum_sq = 0.0;
  for (int s = 0; s < m; ++s) {
    for (int l = 0; l < d; ++l) y[l] = x[l] + sigma * stream.normal();
    const double v = std::exp(u0(y));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / m;
  if (m < 2) return {std::log(mean), 0.0};
  const double var = (sum_sq / m - mean * mean) * m / (m - 1.0);
  const double se_mean = std::sqrt(std::max(0.0, var) / m);
  return {std::log(mean), se_mean / mean};
}

inline double kpz_reference(double t, std::span<const double> x, double nu,
                            const OracleConfig& cfg,
                            const DensityFn& u0 = standard_gaussian_density) {
  return kpz_reference_stats(t, x, nu, cfg, u0).value;
}

// Exact Fokker-Planck solution: the N(0, 1 + nu^2 t) density (d = 1).
inline double fokker_planck_reference(double t, double x, double nu) {
  const double variance = 1.0 + nu * nu * t;
  return std::exp(-0.5 * x * x / variance) /
         std::sqrt(2.0 * M_PI * variance);
}

}  // namespace fkp
