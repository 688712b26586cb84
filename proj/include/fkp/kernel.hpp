#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fkp {

// Mollifier K with its scaled family K_eps(x) = eps^-d K(x/eps). The built-in
// base kernel is the standard Gaussian product density; its sup and Lipschitz
// constants are found numerically on a fine radial grid at construction and
// only feed test bounds.
struct MollifierKernel {
  std::string name = "gaussian";
  int dim = 1;
  double epsilon = 1.0;
  double sup_base = 0.0;           // ||K||_inf
  double sup_base_grad = 0.0;      // ||grad K||_inf
  double lipschitz_base = 0.0;     // L_K
  double lipschitz_base_grad = 0.0;  // L_{grad K}

  double base_value(std::span<const double> x) const {
    double q = 0.0;
    for (double v : x) q += v * v;
    return norm_const_ * std::exp(-0.5 * q);
  }

  void base_gradient(std::span<const double> x, std::span<double> out) const {
    const double k = base_value(x);
    for (int l = 0; l < dim; ++l) out[l] = -x[l] * k;
  }

  // K_eps(x) = eps^-d K(x/eps)
  double value(std::span<const double> x) const {
    double q = 0.0;
    for (double v : x) q += v * v;
    return inv_eps_d_ * norm_const_ * std::exp(-0.5 * q * inv_eps2_);
  }

  // grad K_eps(x) = eps^-(d+1) (grad K)(x/eps) = -x/eps^2 * K_eps(x)
  void gradient(std::span<const double> x, std::span<double> out) const {
    const double k = value(x);
    for (int l = 0; l < dim; ++l) out[l] = -x[l] * inv_eps2_ * k;
  }

  double norm_const_ = 0.0;  // (2*pi)^(-d/2)
  double inv_eps_d_ = 0.0;   // eps^-d
  double inv_eps2_ = 0.0;    // eps^-2
};

inline MollifierKernel gaussian_kernel(int dim, double epsilon) {
  if (dim < 1) throw std::domain_error("kernel dimension must be >= 1");
  if (epsilon <= 0.0) throw std::domain_error("bandwidth must be positive");
  MollifierKernel k;
  k.dim = dim;
  k.epsilon = epsilon;
  k.norm_const_ = std::pow(2.0 * M_PI, -0.5 * dim);
  k.inv_eps_d_ = std::pow(epsilon, -dim);
  k.inv_eps2_ = 1.0 / (epsilon * epsilon);
  k.sup_base = k.norm_const_;

  // Unit mass check: the product structure reduces the d-dimensional
  // integral to a 1-d Simpson rule raised to the d-th power.
  {
    const double a = -12.0, b = 12.0;
    const int n = 4096;
    const double h = (b - a) / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double x = a + i * h;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      sum += w * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    }
    const double mass = std::pow(sum * h / 3.0, dim);
    if (std::abs(mass - 1.0) > 1e-8)
      throw std::runtime_error("mollifier does not integrate to 1");
  }

  // Radial scan for the gradient and Hessian extrema. |grad K|(r) = r K(r);
  // the Hessian (x x^t - I) K(x) has eigenvalues (r^2 - 1) K(r) along x and
  // -K(r) across it.
  double sup_grad = 0.0;
  double sup_hess = 0.0;
  const double rmax = 12.0;
  const int steps = 120000;
  for (int i = 0; i <= steps; ++i) {
    const double r = rmax * i / steps;
    const double kr = k.norm_const_ * std::exp(-0.5 * r * r);
    sup_grad = std::max(sup_grad, r * kr);
    double h = std::abs(r * r - 1.0) * kr;
    if (dim > 1) h = std::max(h, kr);
    sup_hess = std::max(sup_hess, h);
  }
  k.sup_base_grad = sup_grad;
  k.lipschitz_base = sup_grad;
  k.lipschitz_base_grad = sup_hess;
  return k;
}

inline MollifierKernel kernel_by_name(const std::string& name, int dim,
                                      double epsilon) {
  if (name == "gaussian") return gaussian_kernel(dim, epsilon);
  throw std::invalid_argument("unknown kernel: " + name);
}

// Free-function forms of the two kernel queries.
inline double mollifier_value(const MollifierKernel& kernel,
                              std::span<const double> x) {
  return kernel.value(x);
}

inline std::vector<double> mollifier_gradient(const MollifierKernel& kernel,
                                              std::span<const double> x) {
  std::vector<double> out(kernel.dim);
  kernel.gradient(x, out);
  return out;
}

}  // namespace fkp
