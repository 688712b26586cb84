#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fkp/estimator.hpp"
#include "fkp/kernel.hpp"
#include "fkp/model.hpp"
#include "fkp/parallel.hpp"
#include "fkp/simulate.hpp"

namespace fkp {

// One multiplicative weight update: G * exp(lambda * dt).
inline double weight_step(double weight, double lambda_val, double dt) {
  if (!(weight > 0.0)) throw std::domain_error("weight must be positive");
  return weight * std::exp(lambda_val * dt);
}

// exp(dt * sum of lambda samples); the closed form of iterating weight_step.
inline double path_weight(std::span<const double> lambda_samples, double dt) {
  double s = 0.0;
  for (double v : lambda_samples) s += v;
  return std::exp(dt * s);
}

// The t_0 density K_eps * u0: a closed-form Gaussian when u0 is the standard
// Gaussian (convolution of two centered Gaussians), a unit-weight particle
// KDE otherwise.
class InitialDensity {
 public:
  static InitialDensity closed_form(int dim, double epsilon) {
    InitialDensity d;
    d.dim_ = dim;
    d.variance_ = 1.0 + epsilon * epsilon;
    d.norm_ = std::pow(2.0 * M_PI * d.variance_, -0.5 * dim);
    return d;
  }

  static InitialDensity particle_kde(DensityEstimate estimate) {
    InitialDensity d;
    d.dim_ = estimate.ensemble().dim;
    d.kde_.emplace(std::move(estimate));
    return d;
  }

  bool is_closed_form() const { return !kde_.has_value(); }

  Evaluation evaluate(std::span<const double> x) const {
    Evaluation out;
    out.gradient.assign(dim_, 0.0);
    double value;
    evaluate_batch(x, {&value, 1}, out.gradient);
    out.value = value;
    return out;
  }

  void evaluate_batch(std::span<const double> queries,
                      std::span<double> values,
                      std::span<double> gradients) const {
    if (kde_) {
      kde_->evaluate_batch(queries, values, gradients);
      return;
    }
    const std::size_t q_count = values.size();
    parallel_for(q_count, [&](std::size_t begin, std::size_t end) {
      for (std::size_t qi = begin; qi < end; ++qi) {
        const double* q = queries.data() + qi * dim_;
        double q2 = 0.0;
        for (int l = 0; l < dim_; ++l) q2 += q[l] * q[l];
        const double v = norm_ * std::exp(-0.5 * q2 / variance_);
        values[qi] = v;
        double* g = gradients.data() + qi * dim_;
        for (int l = 0; l < dim_; ++l) g[l] = -q[l] / variance_ * v;
      }
    });
  }

 private:
  int dim_ = 1;
  double variance_ = 1.0;
  double norm_ = 0.0;
  std::optional<DensityEstimate> kde_;
};

inline InitialDensity init_estimate(const ProblemSpec& problem,
                                    const MollifierKernel& kernel) {
  if (problem.dim != kernel.dim)
    throw std::invalid_argument("problem/kernel dimension mismatch");
  if (!problem.gaussian_u0)
    throw std::invalid_argument(
        "closed-form initial estimate needs Gaussian u0; pass the initial "
        "particle slice instead");
  return InitialDensity::closed_form(problem.dim, kernel.epsilon);
}

inline InitialDensity init_estimate(const ProblemSpec& problem,
                                    const MollifierKernel& kernel,
                                    std::vector<double> initial_points,
                                    EvalMode mode) {
  if (problem.dim != kernel.dim)
    throw std::invalid_argument("problem/kernel dimension mismatch");
  const std::size_t n = initial_points.size() / kernel.dim;
  auto ens = make_ensemble(problem.dim, std::move(initial_points),
                           std::vector<double>(n, 1.0), kernel);
  return InitialDensity::particle_kde(DensityEstimate(std::move(ens), mode));
}

// How the per-step self-queries are evaluated.
struct EvalPolicy {
  enum class Kind { kNaive, kTree, kAuto };
  Kind kind = Kind::kAuto;
  double tau = 1e-8;

  static EvalPolicy naive() { return {Kind::kNaive, 0.0}; }
  static EvalPolicy tree(double tau) { return {Kind::kTree, tau}; }
  static EvalPolicy automatic(double tau = 1e-8) { return {Kind::kAuto, tau}; }

  EvalMode resolve(int n_particles) const {
    switch (kind) {
      case Kind::kNaive:
        return EvalMode::naive();
      case Kind::kTree:
        return EvalMode::tree(tau);
      case Kind::kAuto:
      default:
        return n_particles >= 10000 ? EvalMode::tree(tau) : EvalMode::naive();
    }
  }
};

// Full state of one scheme run: trajectories, the weight table G_k^i, the
// recorded Lambda samples and handles to the per-step estimates.
struct SchemeState {
  TimeGrid grid;
  MollifierKernel kernel;
  EvalMode mode;
  PathBundle bundle;
  std::vector<double> weights;         // (n+1) x N, step-major
  std::vector<double> lambda_samples;  // n x N, step-major
  InitialDensity initial_estimate;

  std::span<const double> weights_at(int k) const {
    const std::size_t n = bundle.n_particles;
    return {weights.data() + static_cast<std::size_t>(k) * n, n};
  }

  std::span<const double> lambda_at(int k) const {
    const std::size_t n = bundle.n_particles;
    return {lambda_samples.data() + static_cast<std::size_t>(k) * n, n};
  }

  // Lambda samples of particle i across the first `steps` steps.
  std::vector<double> lambda_path(int i, int steps) const {
    std::vector<double> out(steps);
    const std::size_t n = bundle.n_particles;
    for (int k = 0; k < steps; ++k)
      out[k] = lambda_samples[static_cast<std::size_t>(k) * n + i];
    return out;
  }

  // Weighted KDE gamma-bar at grid time t_k.
  DensityEstimate estimate(int k) const {
    const auto slice = bundle.slice(k);
    const auto w = weights_at(k);
    auto ens = make_ensemble(bundle.dim,
                             std::vector<double>(slice.begin(), slice.end()),
                             std::vector<double>(w.begin(), w.end()), kernel);
    return DensityEstimate(std::move(ens), mode);
  }

  DensityEstimate final_estimate() const { return estimate(grid.steps); }
};

// Runs the explicit time-stepping scheme: initialization with K_eps * u0,
// then n rounds of (evaluate u and grad u at the particles, update weights).
// Deterministic in (problem, grid, kernel, N, seed, policy).
inline SchemeState run_scheme(const ProblemSpec& problem, const TimeGrid& grid,
                              const MollifierKernel& kernel, int n_particles,
                              std::uint64_t seed,
                              EvalPolicy policy = EvalPolicy::automatic()) {
  if (problem.dim != kernel.dim)
    throw std::invalid_argument("problem/kernel dimension mismatch");
  SchemeState state;
  state.grid = grid;
  state.kernel = kernel;
  state.mode = policy.resolve(n_particles);
  state.bundle = simulate_paths(problem, grid, n_particles, seed);

  const int n = n_particles;
  const int d = problem.dim;
  const int steps = grid.steps;
  state.weights.assign(static_cast<std::size_t>(steps + 1) * n, 1.0);
  state.lambda_samples.assign(static_cast<std::size_t>(steps) * n, 0.0);

  const auto slice0 = state.bundle.slice(0);
  state.initial_estimate =
      problem.gaussian_u0
          ? init_estimate(problem, kernel)
          : init_estimate(problem, kernel,
                          std::vector<double>(slice0.begin(), slice0.end()),
                          state.mode);

  std::vector<double> values(n);
  std::vector<double> grads(static_cast<std::size_t>(n) * d);
  for (int k = 0; k < steps; ++k) {
    const auto slice = state.bundle.slice(k);
    if (k == 0) {
      state.initial_estimate.evaluate_batch(slice, values, grads);
    } else {
      state.estimate(k).evaluate_self(values, grads);
    }
    const double t_k = grid.times[k];
    const double* w_prev = state.weights.data() + static_cast<std::size_t>(k) * n;
    double* w_next = state.weights.data() + static_cast<std::size_t>(k + 1) * n;
    double* lambda_row =
        state.lambda_samples.data() + static_cast<std::size_t>(k) * n;
    parallel_for(static_cast<std::size_t>(n),
                 [&](std::size_t begin, std::size_t end) {
                   for (std::size_t i = begin; i < end; ++i) {
                     const std::span<const double> x{
                         slice.data() + i * d, static_cast<std::size_t>(d)};
                     const std::span<const double> z{
                         grads.data() + i * d, static_cast<std::size_t>(d)};
                     const double lam =
                         problem.lambda(t_k, x, values[i], z);
                     lambda_row[i] = lam;
                     w_next[i] = weight_step(w_prev[i], lam, grid.dt);
                   }
                 });
  }
  return state;
}

}  // namespace fkp
