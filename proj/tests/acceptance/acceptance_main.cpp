// Acceptance suite: one self-contained check per numbered criterion, one
// PASS/FAIL line each. Exit code is the number of failures.
//
//   fkp_acceptance --tier fast   criteria 1,2,3,5,6,7,8,9  (minutes)
//   fkp_acceptance --tier long   criterion 4               (tens of minutes)
//   fkp_acceptance --tier all
//   fkp_acceptance --criterion K

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fkp/harness.hpp"
#include "fkp/model.hpp"
#include "fkp/oracle.hpp"
#include "fkp/parallel.hpp"
#include "fkp/rng.hpp"
#include "fkp/solver.hpp"

using namespace fkp;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Least squares slope of log(y) against log(x).
double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  double mx = 0, my = 0;
  for (const auto& [x, y] : pts) {
    mx += std::log(x);
    my += std::log(y);
  }
  mx /= pts.size();
  my /= pts.size();
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (std::log(x) - mx) * (std::log(x) - mx);
    sxy += (std::log(x) - mx) * (std::log(y) - my);
  }
  return sxy / sxx;
}

// --- criterion 1: mass identities -----------------------------------------

Outcome criterion_mass() {
  Outcome out;
  std::ostringstream os;
  const TimeGrid grid = make_time_grid(0.1, 10);
  const MollifierKernel kernel = gaussian_kernel(1, 0.2);

  const ProblemSpec fp = make_fokker_planck(0.1);
  const double mass0 =
      run_scheme(fp, grid, kernel, 2000, 7).final_estimate().total_mass();
  const bool zero_ok = std::abs(mass0 - 1.0) <= 1e-12;

  ProblemSpec constant = make_fokker_planck(0.1);
  constant.lambda_raw = [](double, std::span<const double>, double,
                           std::span<const double>) { return 1.0; };
  const double mass1 =
      run_scheme(constant, grid, kernel, 2000, 7).final_estimate().total_mass();
  const double want = std::exp(0.1);  // 1.10517092
  const bool const_ok = std::abs(mass1 - want) <= 1e-9 * want;

  out.pass = zero_ok && const_ok;
  os << "mass(lambda=0)=" << mass0 << " mass(lambda=1)=" << mass1
     << " target=" << want;
  out.detail = os.str();
  return out;
}

// --- criterion 2: Fokker-Planck sanity -------------------------------------

Outcome criterion_fokker_planck() {
  Outcome out;
  set_threads(1);
  const double t0 = now_seconds();
  const ProblemSpec p = make_fokker_planck(0.1);
  const SweepRecord rec =
      run_experiment(p, 10, 10000, 0.2, 5, 500, 42,
                     OracleConfig::gauss_hermite(200));
  const double elapsed = now_seconds() - t0;
  std::ostringstream os;
  os << "l1_mean=" << rec.l1_mean << " (limit 0.05), runtime=" << elapsed
     << "s (limit 30)";
  out.detail = os.str();
  out.pass = rec.l1_mean < 0.05 && elapsed < 30.0;
  return out;
}

// --- criterion 3: Burgers N-rate -------------------------------------------

Outcome criterion_burgers_rate() {
  Outcome out;
  const double t0 = now_seconds();
  const ProblemSpec p = make_burgers(0.1);
  const OracleConfig oracle = OracleConfig::gauss_hermite(200);
  const EvalPolicy policy = EvalPolicy::automatic(1e-5);
  std::vector<std::pair<double, double>> pts;
  std::ostringstream os;
  os << "l1(N):";
  for (int n : {1000, 3162, 10000, 31623}) {
    const SweepRecord rec =
        run_experiment(p, 10, n, 0.2, 20, 500, 42, oracle, policy);
    pts.emplace_back(static_cast<double>(n), rec.l1_mean);
    os << ' ' << n << "->" << rec.l1_mean;
  }
  const double slope = loglog_slope(pts);
  const double elapsed = now_seconds() - t0;
  os << " slope=" << slope << " (band [-0.75,-0.25]), runtime=" << elapsed
     << "s (limit 600)";
  out.detail = os.str();
  out.pass = slope >= -0.75 && slope <= -0.25 && elapsed < 600.0;
  return out;
}

// --- criterion 4: Burgers bandwidth trade-off (long tier) ------------------

Outcome criterion_burgers_tradeoff() {
  Outcome out;
  const double t0 = now_seconds();
  const ProblemSpec p = make_burgers(0.1);
  const OracleConfig oracle = OracleConfig::gauss_hermite(200);
  const EvalPolicy policy = EvalPolicy::tree(1e-5);
  const std::vector<int> ns{1000, 3162, 10000, 31623, 50000};
  const std::vector<double> eps{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const auto records = sweep(p, 10, ns, eps, 20, 500, 42, oracle, policy);
  const auto optima = optimal_bandwidths(records);
  bool monotone = true;
  for (std::size_t i = 1; i < optima.size(); ++i)
    if (optima[i].second > optima[i - 1].second) monotone = false;
  const SlopeFit fit = fit_slope(optima);
  const double elapsed = now_seconds() - t0;
  std::ostringstream os;
  os << "eps_opt:";
  for (const auto& [n, e] : optima) os << ' ' << n << "->" << e;
  os << " slope=" << fit.slope
     << " (target -0.21 +- 0.10), monotone=" << (monotone ? "yes" : "no")
     << ", runtime=" << elapsed << "s (limit 2700)";
  out.detail = os.str();
  out.pass = monotone && fit.slope >= -0.31 && fit.slope <= -0.11 &&
             elapsed < 2700.0;
  return out;
}

// --- criterion 5: KPZ desk scale --------------------------------------------

Outcome criterion_kpz() {
  Outcome out;
  const ProblemSpec p = make_kpz(5, 0.1, 1e3);
  const OracleConfig oracle = OracleConfig::monte_carlo(10000, 42);
  const std::vector<int> ns{1000, 3162, 10000};
  const std::vector<double> eps{0.2, 0.3, 0.4, 0.5, 0.6};
  const auto records = sweep(p, 10, ns, eps, 5, 200, 42, oracle);

  auto curve = [&](int n) {
    std::vector<double> l1;
    for (const auto& rec : records)
      if (rec.n_particles == n) l1.push_back(rec.l1_mean);
    return l1;
  };
  const std::vector<double> high = curve(10000);
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < high.size(); ++i)
    if (high[i] < high[argmin]) argmin = i;
  const bool u_shaped = argmin > 0 && argmin + 1 < high.size();

  const auto optima = optimal_bandwidths(records);
  double opt_low = 0, opt_high = 0;
  for (const auto& [n, e] : optima) {
    if (n == 1000) opt_low = e;
    if (n == 10000) opt_high = e;
  }
  std::ostringstream os;
  os << "l1(N=10000):";
  for (std::size_t i = 0; i < high.size(); ++i)
    os << ' ' << eps[i] << "->" << high[i];
  os << " eps_opt(1000)=" << opt_low << " eps_opt(10000)=" << opt_high;
  out.detail = os.str();
  out.pass = u_shaped && opt_high <= opt_low;
  return out;
}

// --- criterion 6: tree vs naive ---------------------------------------------

Outcome criterion_tree_vs_naive() {
  Outcome out;
  std::ostringstream os;
  bool bounds_ok = true;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = (trial % 2 == 0) ? 1 : 5;
    const double epsv = (dim == 1) ? 0.3 : 0.4;
    RandomStream s(1000 + trial, StreamPurpose::kGeneric, 0);
    const int n = 5000;
    std::vector<double> points(static_cast<std::size_t>(n) * dim);
    std::vector<double> weights(n);
    for (auto& v : points) v = s.normal();
    for (auto& w : weights) w = 0.8 + 0.4 * s.uniform();
    auto ens = make_ensemble(dim, points, weights, gaussian_kernel(dim, epsv));
    const DensityEstimate naive(ens, EvalMode::naive());
    const DensityEstimate tree(ens, EvalMode::tree(1e-8));
    double max_w = 0;
    for (double w : weights) max_w = std::max(max_w, w);
    const auto& kern = ens.kernel;
    const double vbound = 1e-8 * max_w * kern.sup_base * kern.inv_eps_d_;
    const double gbound =
        1e-8 * max_w * kern.sup_base_grad * kern.inv_eps_d_ / kern.epsilon;
    std::vector<double> q(dim);
    for (int trial_q = 0; trial_q < 50; ++trial_q) {
      for (auto& v : q) v = s.normal();
      const auto a = naive.evaluate(q);
      const auto b = tree.evaluate(q);
      const double verr = std::abs(a.value - b.value);
      if (verr > vbound) bounds_ok = false;
      if (a.value > 0) worst_rel = std::max(worst_rel, verr / a.value);
      double gerr2 = 0;
      for (int l = 0; l < dim; ++l) {
        const double d = a.gradient[l] - b.gradient[l];
        gerr2 += d * d;
      }
      if (std::sqrt(gerr2) > gbound) bounds_ok = false;
    }
  }
  const bool rel_ok = worst_rel < 1e-6;

  // speedup at N = 50000, d = 1, Q = N self-queries
  RandomStream s(77, StreamPurpose::kGeneric, 0);
  const int big_n = 50000;
  std::vector<double> points(big_n), weights(big_n, 1.0);
  for (auto& v : points) v = s.normal();
  auto ens =
      make_ensemble(1, points, weights, gaussian_kernel(1, 0.05));
  std::vector<double> values(big_n), grads(big_n);
  const DensityEstimate naive(ens, EvalMode::naive());
  const double tn0 = now_seconds();
  naive.evaluate_batch(points, values, grads);
  const double naive_time = now_seconds() - tn0;
  const double tt0 = now_seconds();
  const DensityEstimate tree(ens, EvalMode::tree(1e-8));
  tree.evaluate_batch(points, values, grads);
  const double tree_time = now_seconds() - tt0;
  const double speedup = naive_time / tree_time;

  os << "worst relative value gap=" << worst_rel
     << " (limit 1e-6), bound violations=" << (bounds_ok ? "none" : "SOME")
     << ", speedup=" << speedup << "x (need >= 3, naive " << naive_time
     << "s vs tree " << tree_time << "s)";
  out.detail = os.str();
  out.pass = bounds_ok && rel_ok && speedup >= 3.0;
  return out;
}

// --- criterion 7: spatial Lipschitz bounds ----------------------------------

Outcome criterion_lipschitz() {
  Outcome out;
  const double cap = 1.0, horizon = 0.1, epsv = 0.25;
  const ProblemSpec p = make_burgers(0.1, cap);
  const TimeGrid grid = make_time_grid(horizon, 10);
  const MollifierKernel kernel = gaussian_kernel(1, epsv);
  const SchemeState state = run_scheme(p, grid, kernel, 2000, 13);
  const double weight_cap = std::exp(cap * horizon) * (1 + 1e-12);
  bool weights_ok = true;
  for (int k = 0; k <= 10; ++k)
    for (double w : state.weights_at(k))
      if (w > weight_cap) weights_ok = false;

  const auto est = state.final_estimate();
  const double value_lip =
      std::exp(cap * horizon) * kernel.lipschitz_base / std::pow(epsv, 2);
  const double grad_lip =
      std::exp(cap * horizon) * kernel.lipschitz_base_grad / std::pow(epsv, 3);
  RandomStream s(29, StreamPurpose::kGeneric, 0);
  int violations = 0;
  for (int pair = 0; pair < 10000; ++pair) {
    const double x[1] = {4.0 * (s.uniform() - 0.5) * 2.0};
    const double y[1] = {4.0 * (s.uniform() - 0.5) * 2.0};
    const double gap = std::abs(x[0] - y[0]);
    const auto ex = est.evaluate(x);
    const auto ey = est.evaluate(y);
    if (std::abs(ex.value - ey.value) > value_lip * gap * (1 + 1e-9))
      ++violations;
    if (std::abs(ex.gradient[0] - ey.gradient[0]) >
        grad_lip * gap * (1 + 1e-9))
      ++violations;
  }
  std::ostringstream os;
  os << "weight cap ok=" << (weights_ok ? "yes" : "no")
     << ", pair violations=" << violations << "/10000 (need 0)";
  out.detail = os.str();
  out.pass = weights_ok && violations == 0;
  return out;
}

// --- criterion 8: gradient and weight identities ----------------------------

Outcome criterion_identities() {
  Outcome out;
  const ProblemSpec p = make_burgers(0.1, 1.0);
  const TimeGrid grid = make_time_grid(0.1, 10);
  const MollifierKernel kernel = gaussian_kernel(1, 0.25);
  const SchemeState state = run_scheme(p, grid, kernel, 500, 19);

  const auto est = state.final_estimate();
  RandomStream s(23, StreamPurpose::kGeneric, 0);
  const double h = 1e-4 * 0.25;
  double worst_fd = 0.0;
  for (int q = 0; q < 100; ++q) {
    const double x = 2.5 * s.normal();
    const double xc[1] = {x}, xp[1] = {x + h}, xm[1] = {x - h};
    const double grad = est.evaluate(xc).gradient[0];
    const double fd = (est.evaluate(xp).value - est.evaluate(xm).value) / (2 * h);
    worst_fd = std::max(worst_fd,
                        std::abs(grad - fd) / std::max(std::abs(grad), 1e-8));
  }

  double worst_weight = 0.0;
  for (int i = 0; i < 500; ++i)
    for (int k = 0; k <= 10; ++k) {
      const double want = path_weight(state.lambda_path(i, k), grid.dt);
      const double got = state.weights_at(k)[i];
      worst_weight =
          std::max(worst_weight, std::abs(got - want) / std::abs(want));
    }
  std::ostringstream os;
  os << "max FD relative gap=" << worst_fd
     << " (limit 1e-5), max weight identity gap=" << worst_weight
     << " (limit 1e-12)";
  out.detail = os.str();
  out.pass = worst_fd < 1e-5 && worst_weight < 1e-12;
  return out;
}

// --- criterion 9: oracle cross-validation -----------------------------------

Outcome criterion_oracles() {
  Outcome out;
  const OracleConfig quad = OracleConfig::gauss_hermite(200);
  const OracleConfig mc = OracleConfig::monte_carlo(100000, 42);
  int failures = 0;
  double worst_z = 0.0;
  const double ts[2] = {0.05, 0.1};
  const double xs[5] = {-1.5, -0.5, 0.0, 0.7, 1.5};
  for (double t : ts)
    for (double x : xs) {
      const double want = burgers_reference(t, x, 0.1, quad);
      const auto got = burgers_reference_stats(t, x, 0.1, mc);
      const double z = std::abs(got.value - want) / got.std_error;
      worst_z = std::max(worst_z, z);
      if (z > 3.0) ++failures;
    }
  for (double t : ts)
    for (double x : xs) {
      const double xv[1] = {x};
      const double want = kpz_reference(t, xv, 0.1, quad);
      const auto got = kpz_reference_stats(t, xv, 0.1, mc);
      const double z = std::abs(got.value - want) / got.std_error;
      worst_z = std::max(worst_z, z);
      if (z > 3.0) ++failures;
    }
  std::ostringstream os;
  os << "probe points outside 3 SE: " << failures << "/20, worst |z|="
     << worst_z;
  out.detail = os.str();
  out.pass = failures == 0;
  return out;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
  bool long_tier;
};

}  // namespace

int main(int argc, char** argv) {
  std::string tier = "all";
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--tier") == 0 && i + 1 < argc) tier = argv[++i];
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      only = std::atoi(argv[++i]);
  }
  set_threads(1);

  const std::vector<Criterion> criteria = {
      {1, "mass identities", criterion_mass, false},
      {2, "fokker-planck sanity", criterion_fokker_planck, false},
      {3, "burgers N-rate", criterion_burgers_rate, false},
      {4, "burgers bandwidth trade-off", criterion_burgers_tradeoff, true},
      {5, "kpz desk scale", criterion_kpz, false},
      {6, "tree vs naive", criterion_tree_vs_naive, false},
      {7, "spatial Lipschitz bounds", criterion_lipschitz, false},
      {8, "gradient and weight identities", criterion_identities, false},
      {9, "oracle cross-validation", criterion_oracles, false},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    if (only == 0) {
      if (tier == "fast" && c.long_tier) continue;
      if (tier == "long" && !c.long_tier) continue;
    }
    const double t0 = now_seconds();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double elapsed = now_seconds() - t0;
    std::printf("[%s] criterion %d (%s): %s [%.1fs]\n",
                outcome.pass ? "PASS" : "FAIL", c.id, c.name,
                outcome.detail.c_str(), elapsed);
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures;
}
