#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fkp/model.hpp"
#include "fkp/oracle.hpp"
#include "fkp/rng.hpp"
#include "fkp/solver.hpp"

using namespace fkp;

TEST_CASE("closed-form initial estimate is the Gaussian convolution") {
  const ProblemSpec p = make_burgers(0.1);
  const MollifierKernel k = gaussian_kernel(1, 0.3);
  const InitialDensity init = init_estimate(p, k);
  REQUIRE(init.is_closed_form());
  const double x0[1] = {0.0};
  // (2 pi (1 + eps^2))^{-1/2} at the origin
  CHECK(init.evaluate(x0).value ==
        Catch::Approx(0.3821174024545592).epsilon(1e-12));
  CHECK(init.evaluate(x0).gradient[0] == 0.0);

  const InitialDensity tight = init_estimate(p, gaussian_kernel(1, 1e-4));
  CHECK(std::abs(tight.evaluate(x0).value - p.u0_density(x0)) < 1e-6);

  // matches direct convolution N(0, 1 + eps^2) at generic points
  for (double x : {-1.2, 0.4, 2.0}) {
    const double q[1] = {x};
    const double var = 1.0 + 0.09;
    const double want = std::exp(-0.5 * x * x / var) / std::sqrt(2 * M_PI * var);
    const auto ev = init.evaluate(q);
    CHECK(ev.value == Catch::Approx(want).epsilon(1e-12));
    CHECK(ev.gradient[0] == Catch::Approx(-x / var * want).epsilon(1e-12));
  }
}

TEST_CASE("initial estimate without Gaussian u0 falls back to a particle KDE") {
  ProblemSpec p = make_burgers(0.1);
  p.gaussian_u0 = false;
  const MollifierKernel k = gaussian_kernel(1, 0.3);
  CHECK_THROWS_AS(init_estimate(p, k), std::invalid_argument);

  const TimeGrid grid = make_time_grid(0.1, 5);
  const SchemeState state = run_scheme(p, grid, k, 4000, 11);
  CHECK_FALSE(state.initial_estimate.is_closed_form());
  const double x0[1] = {0.0};
  const double closed = 0.3821174024545592;
  CHECK(std::abs(state.initial_estimate.evaluate(x0).value - closed) < 0.05);
}

TEST_CASE("weight_step closed form") {
  CHECK(weight_step(1.3, 0.0, 0.01) == 1.3);
  CHECK(weight_step(1.0, 2.0, 0.01) ==
        Catch::Approx(1.0202013400267558).epsilon(1e-12));
  double g = 1.0;
  for (int k = 0; k < 7; ++k) g = weight_step(g, 0.8, 0.01);
  CHECK(g == Catch::Approx(std::exp(0.8 * 7 * 0.01)).epsilon(1e-12));
  CHECK_THROWS_AS(weight_step(0.0, 1.0, 0.01), std::domain_error);
  CHECK_THROWS_AS(weight_step(-1.0, 1.0, 0.01), std::domain_error);
}

TEST_CASE("path_weight telescopes the weight recursion") {
  CHECK(path_weight({}, 0.01) == 1.0);
  const double two[] = {2.0};
  CHECK(path_weight({two, 1}, 0.01) ==
        Catch::Approx(1.0202013400267558).epsilon(1e-12));

  RandomStream s(3, StreamPurpose::kGeneric, 0);
  std::vector<double> lambdas(20);
  for (auto& v : lambdas) v = 4.0 * (s.uniform() - 0.5);
  double g = 1.0;
  for (double lam : lambdas) g = weight_step(g, lam, 0.005);
  CHECK(path_weight(lambdas, 0.005) == Catch::Approx(g).epsilon(1e-12));
}

TEST_CASE("zero weighting keeps unit weights and a plain KDE") {
  const ProblemSpec p = make_fokker_planck(0.1);
  const TimeGrid grid = make_time_grid(0.1, 10);
  const MollifierKernel k = gaussian_kernel(1, 0.2);
  const SchemeState state = run_scheme(p, grid, k, 500, 21);
  for (int step = 0; step <= 10; ++step)
    for (double w : state.weights_at(step)) CHECK(w == 1.0);
  CHECK(state.final_estimate().total_mass() == 1.0);

  // final estimate equals the unweighted KDE over the final slice
  const auto est = state.final_estimate();
  const auto slice = state.bundle.slice(10);
  auto plain = make_ensemble(
      1, std::vector<double>(slice.begin(), slice.end()),
      std::vector<double>(500, 1.0), k);
  const DensityEstimate kde(std::move(plain), state.mode);
  for (double x : {-0.7, 0.0, 1.1}) {
    const double q[1] = {x};
    CHECK(est.evaluate(q).value == kde.evaluate(q).value);
  }
}

TEST_CASE("constant weighting telescopes to e^{cT} total mass") {
  ProblemSpec p = make_fokker_planck(0.1);
  p.lambda_raw = [](double, std::span<const double>, double,
                    std::span<const double>) { return 1.0; };
  const TimeGrid grid = make_time_grid(0.1, 10);
  const SchemeState state =
      run_scheme(p, grid, gaussian_kernel(1, 0.2), 300, 5);
  CHECK(state.final_estimate().total_mass() ==
        Catch::Approx(1.1051709180756477).epsilon(1e-9));
}

TEST_CASE("weights equal the path functional on every particle and step") {
  const ProblemSpec p = make_burgers(0.1, 1.0);
  const TimeGrid grid = make_time_grid(0.1, 10);
  const SchemeState state =
      run_scheme(p, grid, gaussian_kernel(1, 0.25), 200, 17);
  for (int i = 0; i < 200; ++i) {
    for (int k = 0; k <= 10; ++k) {
      const auto lambdas = state.lambda_path(i, k);
      const double want = path_weight(lambdas, grid.dt);
      const double got = state.weights_at(k)[i];
      CHECK(got == Catch::Approx(want).epsilon(1e-12));
    }
  }
  // G_0 = 1 and the one-step ratio identity
  for (int i = 0; i < 200; ++i) CHECK(state.weights_at(0)[i] == 1.0);
  for (int k = 0; k < 10; ++k)
    for (int i = 0; i < 200; ++i) {
      const double ratio = state.weights_at(k + 1)[i] / state.weights_at(k)[i];
      CHECK(ratio ==
            Catch::Approx(std::exp(state.lambda_at(k)[i] * grid.dt))
                .epsilon(1e-12));
    }
}

TEST_CASE("run_scheme is deterministic given the seed") {
  const ProblemSpec p = make_burgers(0.1);
  const TimeGrid grid = make_time_grid(0.1, 5);
  const MollifierKernel k = gaussian_kernel(1, 0.3);
  const SchemeState a = run_scheme(p, grid, k, 300, 77);
  const SchemeState b = run_scheme(p, grid, k, 300, 77);
  CHECK(a.weights == b.weights);
  CHECK(a.bundle.positions == b.bundle.positions);
  const SchemeState c = run_scheme(p, grid, k, 300, 78);
  CHECK(a.weights != c.weights);
}

TEST_CASE("fokker-planck run lands near the exact Gaussian") {
  const ProblemSpec p = make_fokker_planck(0.1);
  const TimeGrid grid = make_time_grid(0.1, 10);
  const SchemeState state =
      run_scheme(p, grid, gaussian_kernel(1, 0.2), 10000, 33);
  const auto est = state.final_estimate();
  // L1 distance against N(0, 1.001138...) by midpoint quadrature
  const int cells = 400;
  const double lo = -5.0, hi = 5.0, h = (hi - lo) / cells;
  double l1 = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double x[1] = {lo + (c + 0.5) * h};
    l1 += std::abs(est.evaluate(x).value -
                   fokker_planck_reference(0.1, x[0], 0.1)) * h;
  }
  CHECK(l1 < 0.05);
}

TEST_CASE("weight recursions driven by close inputs stay close") {
  // Lambda = clip(L v, M); streams differing by eta per step keep
  // |G_k - G'_k| <= L e^{T M} (k dt) eta.
  const double lip = 0.8, cap = 1.0, dt = 0.01, eta = 0.05;
  const int steps = 10;
  auto lambda = [&](double v) {
    return std::clamp(lip * v, -cap, cap);
  };
  RandomStream s(5, StreamPurpose::kGeneric, 0);
  for (int trial = 0; trial < 500; ++trial) {
    double g = 1.0, gp = 1.0;
    for (int k = 1; k <= steps; ++k) {
      const double v = 2.0 * (s.uniform() - 0.5);
      const double vp = v + eta * (2.0 * s.uniform() - 1.0);
      g = weight_step(g, lambda(v), dt);
      gp = weight_step(gp, lambda(vp), dt);
      const double bound =
          lip * std::exp(steps * dt * cap) * (k * dt) * eta * (1 + 1e-9);
      CHECK(std::abs(g - gp) <= bound);
    }
  }
}

TEST_CASE("sup-norm step increments shrink like sqrt(dt)") {
  const ProblemSpec p = make_burgers(0.1, 1.0);
  const MollifierKernel k = gaussian_kernel(1, 0.3);
  std::vector<double> xs;
  for (double x = -3.0; x <= 3.0; x += 0.1) xs.push_back(x);
  auto max_increment = [&](int steps) {
    const TimeGrid grid = make_time_grid(0.1, steps);
    const SchemeState state = run_scheme(p, grid, k, 2000, 4);
    double worst = 0.0;
    for (int step = 0; step < steps; ++step) {
      const auto a = state.estimate(step);
      const auto b = state.estimate(step + 1);
      for (double x : xs) {
        const double q[1] = {x};
        worst = std::max(worst,
                         std::abs(a.evaluate(q).value - b.evaluate(q).value));
      }
    }
    return worst;
  };
  const double m10 = max_increment(10);
  const double m20 = max_increment(20);
  const double m40 = max_increment(40);
  const double c_emp = m10 / std::sqrt(0.1 / 10);
  CHECK(m20 <= c_emp * std::sqrt(0.1 / 20) * 1.5);
  CHECK(m40 <= c_emp * std::sqrt(0.1 / 40) * 2.0);
}
