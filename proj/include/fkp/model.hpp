#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fkp/rng.hpp"

namespace fkp {

using DriftFn =
    std::function<std::vector<double>(double, std::span<const double>)>;
// Row-major d x p matrix.
using DiffusionFn =
    std::function<std::vector<double>(double, std::span<const double>)>;
using LambdaFn = std::function<double(double, std::span<const double>, double,
                                      std::span<const double>)>;
using DensityFn = std::function<double(std::span<const double>)>;
using SamplerFn = std::function<void(RandomStream&, std::span<double>)>;

// One PDE instance: dimension, horizon, SDE coefficients, weighting function
// and initial density. Immutable after construction; samplers take an
// explicit stream so there is no hidden mutable state.
struct ProblemSpec {
  std::string name;
  int dim = 1;
  double horizon = 0.1;     // T
  int noise_dim = 1;        // p, columns of the diffusion matrix
  DriftFn drift;            // g
  DiffusionFn diffusion;    // Phi
  LambdaFn lambda_raw;      // Lambda before any clipping
  DensityFn u0_density;
  SamplerFn u0_sampler;
  std::optional<double> lambda_cap;  // |Lambda| <= cap when set
  double y_floor = 1e-12;            // used by problems dividing by u
  bool gaussian_u0 = false;  // u0 is the standard Gaussian on R^dim
  double nu = 0.0;           // scalar diffusion level of the built-ins

  // Effective weighting function; all callers go through this.
  double lambda(double t, std::span<const double> x, double y,
                std::span<const double> z) const {
    double v = lambda_raw(t, x, y, z);
    if (lambda_cap) {
      const double cap = *lambda_cap;
      if (v > cap) v = cap;
      if (v < -cap) v = -cap;
    }
    return v;
  }
};

// Standard normal density on R^dim.
inline double standard_gaussian_density(std::span<const double> x) {
  double q = 0.0;
  for (double v : x) q += v * v;
  const double dim = static_cast<double>(x.size());
  return std::exp(-0.5 * q) * std::pow(2.0 * M_PI, -0.5 * dim);
}

namespace detail {

// Simpson integral of the 1-d standard Gaussian density over [-12, 12].
inline double gaussian_quadrature_mass() {
  const double a = -12.0, b = 12.0;
  const int n = 4096;  // even
  const double h = (b - a) / n;
  double sum = 0.0;
  auto phi = [](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  };
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * phi(a + i * h);
  }
  return sum * h / 3.0;
}

inline void check_gaussian_u0_mass(int dim) {
  static const double one_dim_mass = gaussian_quadrature_mass();
  const double mass = std::pow(one_dim_mass, dim);
  if (std::abs(mass - 1.0) > 1e-6)
    throw std::runtime_error("u0 density does not integrate to 1");
}

inline ProblemSpec gaussian_sde_problem(std::string name, int dim, double nu,
                                        double horizon) {
  if (nu <= 0.0) throw std::domain_error("nu must be positive");
  if (dim < 1) throw std::domain_error("dimension must be >= 1");
  check_gaussian_u0_mass(dim);
  ProblemSpec p;
  p.name = std::move(name);
  p.dim = dim;
  p.noise_dim = dim;
  p.horizon = horizon;
  p.drift = [dim](double, std::span<const double>) {
    return std::vector<double>(dim, 0.0);
  };
  p.diffusion = [dim, nu](double, std::span<const double>) {
    std::vector<double> m(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) m[static_cast<std::size_t>(i) * dim + i] = nu;
    return m;
  };
  p.u0_density = standard_gaussian_density;
  p.u0_sampler = [](RandomStream& stream, std::span<double> out) {
    stream.fill_normal(out);
  };
  p.gaussian_u0 = true;
  p.nu = nu;
  return p;
}

}  // namespace detail

// Uniform grid 0 = t_0 < ... < t_n = T with dt = T/n; t_k is k*dt exactly.
struct TimeGrid {
  int steps = 1;  // n
  double horizon = 0.0;
  double dt = 0.0;
  std::vector<double> times;
};

inline TimeGrid make_time_grid(double horizon, int steps) {
  if (steps < 1) throw std::domain_error("time grid needs at least one step");
  if (horizon <= 0.0) throw std::domain_error("horizon must be positive");
  TimeGrid grid;
  grid.steps = steps;
  grid.horizon = horizon;
  grid.dt = horizon / steps;
  grid.times.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) grid.times[k] = k * grid.dt;
  return grid;
}

// Piecewise-constant time projection: the grid point t_k with t_k <= s <
// t_{k+1}; s = T maps to t_n.
inline double r_map(double s, const TimeGrid& grid) {
  if (s < 0.0 || s > grid.horizon)
    throw std::domain_error("r_map: time outside [0, T]");
  int k = static_cast<int>(std::floor(s / grid.dt));
  if (k > grid.steps) k = grid.steps;
  while (k + 1 <= grid.steps && grid.times[k + 1] <= s) ++k;
  while (k > 0 && grid.times[k] > s) --k;
  return grid.times[k];
}

// Viscid Burgers in d = 1: Phi = nu, g = 0, Lambda(t,x,y,z) = z.
inline ProblemSpec make_burgers(double nu,
                                std::optional<double> lambda_cap = {},
                                double horizon = 0.1) {
  ProblemSpec p = detail::gaussian_sde_problem("burgers", 1, nu, horizon);
  p.lambda_raw = [](double, std::span<const double>, double,
                    std::span<const double> z) { return z[0]; };
  p.lambda_cap = lambda_cap;
  return p;
}

// KPZ in d dimensions: Phi = nu*I, g = 0, Lambda(t,x,y,z) = |z|^2 / y with
// y floored away from zero before dividing.
inline ProblemSpec make_kpz(int dim, double nu,
                            std::optional<double> lambda_cap = {},
                            double y_floor = 1e-12, double horizon = 0.1) {
  if (y_floor <= 0.0) throw std::domain_error("y_floor must be positive");
  ProblemSpec p = detail::gaussian_sde_problem("kpz", dim, nu, horizon);
  const double floor = y_floor;
  p.lambda_raw = [floor](double, std::span<const double>, double y,
                         std::span<const double> z) {
    double z2 = 0.0;
    for (double v : z) z2 += v * v;
    return z2 / std::max(y, floor);
  };
  p.lambda_cap = lambda_cap;
  p.y_floor = y_floor;
  return p;
}

// Fokker-Planck sanity problem: Lambda = 0; the exact solution stays the
// centered Gaussian with variance 1 + nu^2 t.
inline ProblemSpec make_fokker_planck(double nu, double horizon = 0.1) {
  ProblemSpec p =
      detail::gaussian_sde_problem("fokker-planck", 1, nu, horizon);
  p.lambda_raw = [](double, std::span<const double>, double,
                    std::span<const double>) { return 0.0; };
  return p;
}

inline ProblemSpec problem_by_name(const std::string& name, int dim, double nu,
                                   std::optional<double> lambda_cap = {},
                                   double y_floor = 1e-12,
                                   double horizon = 0.1) {
  if (name == "fokker-planck") return make_fokker_planck(nu, horizon);
  if (name == "burgers") return make_burgers(nu, lambda_cap, horizon);
  if (name == "kpz") return make_kpz(dim, nu, lambda_cap, y_floor, horizon);
  throw std::invalid_argument("unknown problem: " + name);
}

}  // namespace fkp
