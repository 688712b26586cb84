#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fkp/estimator.hpp"
#include "fkp/model.hpp"
#include "fkp/oracle.hpp"
#include "fkp/solver.hpp"

namespace fkp {

// Outcome of one (problem, N, epsilon, n, M, Q, seed) experiment cell.
struct SweepRecord {
  std::string problem;
  int dim = 1;
  double horizon = 0.1;
  int steps = 10;        // n
  int n_particles = 0;   // N
  double epsilon = 0.0;
  int replicates = 0;    // M
  int eval_points = 0;   // Q
  std::uint64_t seed = 0;
  double l1_mean = 0.0;
  double l1_std = 0.0;
  double runtime_ms = 0.0;
};

using ReferenceFn = std::function<double(std::span<const double>)>;

// Terminal-time reference u_T(x) for a built-in problem. For Burgers the
// scheme's weighting Lambda(z) = z makes it solve u_t = (nu^2/2) u_xx +
// u u_x, whose solution is x -> w(t, -x) for the Cole-Hopf solution w of the
// usual minus-sign equation when u0 is even; the reference is therefore
// evaluated at the mirrored point.
inline ReferenceFn make_reference(const ProblemSpec& problem,
                                  const OracleConfig& cfg) {
  const double T = problem.horizon;
  const double nu = problem.nu;
  if (problem.name == "fokker-planck") {
    return [T, nu](std::span<const double> x) {
      return fokker_planck_reference(T, x[0], nu);
    };
  }
  if (problem.name == "burgers") {
    return [T, nu, cfg](std::span<const double> x) {
      return burgers_reference(T, -x[0], nu, cfg);
    };
  }
  if (problem.name == "kpz") {
    return [T, nu, cfg](std::span<const double> x) {
      return kpz_reference(T, x, nu, cfg);
    };
  }
  throw std::invalid_argument("no reference for problem: " + problem.name);
}

// Monte Carlo L1 error (1/(M Q)) sum_{i,j} |u_i(X_j) - ref(X_j)| / u0(X_j).
inline double l1_error(std::span<const DensityEstimate> estimates,
                       const ReferenceFn& reference,
                       std::span<const double> points,
                       const DensityFn& u0_density) {
  if (estimates.empty()) throw std::domain_error("l1_error: no estimates");
  const int dim = estimates[0].ensemble().dim;
  const std::size_t q_count = points.size() / dim;
  if (q_count == 0) throw std::domain_error("l1_error: no points");
  std::vector<double> ref(q_count), inv_u0(q_count);
  for (std::size_t j = 0; j < q_count; ++j) {
    const std::span<const double> x{points.data() + j * dim,
                                    static_cast<std::size_t>(dim)};
    const double u0 = u0_density(x);
    if (!(u0 > 0.0)) throw std::domain_error("l1_error: u0(X_j) = 0");
    ref[j] = reference(x);
    inv_u0[j] = 1.0 / u0;
  }
  std::vector<double> values(q_count);
  std::vector<double> grads(q_count * dim);
  double total = 0.0;
  for (const auto& est : estimates) {
    est.evaluate_batch(points, values, grads);
    for (std::size_t j = 0; j < q_count; ++j)
      total += std::abs(values[j] - ref[j]) * inv_u0[j];
  }
  return total / (static_cast<double>(estimates.size()) * q_count);
}

// Q i.i.d. evaluation points drawn from u0, on a substream independent of
// every particle stream.
inline std::vector<double> draw_eval_points(const ProblemSpec& problem,
                                            int q_count, std::uint64_t seed) {
  std::vector<double> points(static_cast<std::size_t>(q_count) * problem.dim);
  RandomStream stream(seed, StreamPurpose::kEvalPoints, 0);
  for (int j = 0; j < q_count; ++j)
    problem.u0_sampler(stream,
                       {points.data() + static_cast<std::size_t>(j) * problem.dim,
                        static_cast<std::size_t>(problem.dim)});
  return points;
}

// Runs M independent scheme replicates against an explicit reference
// function. Replicate r uses the derived seed (seed, r).
inline SweepRecord run_experiment_with_reference(
    const ProblemSpec& problem, int steps, int n_particles, double epsilon,
    int replicates, int eval_points, std::uint64_t seed,
    const ReferenceFn& reference, EvalPolicy policy = EvalPolicy::automatic()) {
  if (replicates < 1 || eval_points < 1 || n_particles < 1)
    throw std::domain_error("run_experiment: parameters must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const TimeGrid grid = make_time_grid(problem.horizon, steps);
  const MollifierKernel kernel = gaussian_kernel(problem.dim, epsilon);
  const std::vector<double> points =
      draw_eval_points(problem, eval_points, seed);

  std::vector<DensityEstimate> finals;
  finals.reserve(replicates);
  for (int r = 0; r < replicates; ++r) {
    const std::uint64_t rep_seed = derive_seed(seed, r);
    SchemeState state =
        run_scheme(problem, grid, kernel, n_particles, rep_seed, policy);
    finals.push_back(state.final_estimate());
  }

  // Per-replicate errors for mean/std, sharing the single reference pass.
  std::vector<double> errors(replicates);
  for (int r = 0; r < replicates; ++r)
    errors[r] = l1_error({&finals[r], 1}, reference, points,
                         problem.u0_density);
  double mean = 0.0;
  for (double e : errors) mean += e;
  mean /= replicates;
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  const double stddev =
      replicates > 1 ? std::sqrt(var / (replicates - 1)) : 0.0;

  const auto t1 = std::chrono::steady_clock::now();
  SweepRecord rec;
  rec.problem = problem.name;
  rec.dim = problem.dim;
  rec.horizon = problem.horizon;
  rec.steps = steps;
  rec.n_particles = n_particles;
  rec.epsilon = epsilon;
  rec.replicates = replicates;
  rec.eval_points = eval_points;
  rec.seed = seed;
  rec.l1_mean = mean;
  rec.l1_std = stddev;
  rec.runtime_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  return rec;
}

inline SweepRecord run_experiment(const ProblemSpec& problem, int steps,
                                  int n_particles, double epsilon,
                                  int replicates, int eval_points,
                                  std::uint64_t seed, const OracleConfig& cfg,
                                  EvalPolicy policy = EvalPolicy::automatic()) {
  return run_experiment_with_reference(problem, steps, n_particles, epsilon,
                                       replicates, eval_points, seed,
                                       make_reference(problem, cfg), policy);
}

// Full Cartesian (N, epsilon) grid, rows emitted N-major then epsilon.
inline std::vector<SweepRecord> sweep(const ProblemSpec& problem, int steps,
                                      std::span<const int> n_particles,
                                      std::span<const double> epsilons,
                                      int replicates, int eval_points,
                                      std::uint64_t seed,
                                      const OracleConfig& cfg,
                                      EvalPolicy policy =
                                          EvalPolicy::automatic()) {
  std::vector<SweepRecord> records;
  records.reserve(n_particles.size() * epsilons.size());
  const ReferenceFn reference = make_reference(problem, cfg);
  for (int n : n_particles)
    for (double eps : epsilons)
      records.push_back(run_experiment_with_reference(
          problem, steps, n, eps, replicates, eval_points, seed, reference,
          policy));
  return records;
}

// For each N, the epsilon minimizing l1_mean; ties favour the smaller
// epsilon. Output sorted by N.
inline std::vector<std::pair<int, double>> optimal_bandwidths(
    std::span<const SweepRecord> records) {
  std::map<int, std::pair<double, double>> best;  // N -> (epsilon, l1)
  for (const auto& rec : records) {
    auto it = best.find(rec.n_particles);
    if (it == best.end()) {
      best[rec.n_particles] = {rec.epsilon, rec.l1_mean};
    } else {
      auto& [eps, l1] = it->second;
      if (rec.l1_mean < l1 || (rec.l1_mean == l1 && rec.epsilon < eps)) {
        eps = rec.epsilon;
        l1 = rec.l1_mean;
      }
    }
  }
  std::vector<std::pair<int, double>> out;
  out.reserve(best.size());
  for (const auto& [n, pair] : best) out.emplace_back(n, pair.first);
  return out;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares of log(epsilon_opt) against log(N).
inline SlopeFit fit_slope(std::span<const std::pair<int, double>> points) {
  std::vector<std::pair<double, double>> logs;
  for (const auto& [n, eps] : points) {
    if (n < 1 || !(eps > 0.0))
      throw std::domain_error("fit_slope: invalid point");
    logs.emplace_back(std::log(static_cast<double>(n)), std::log(eps));
  }
  double distinct = 0;
  for (std::size_t i = 0; i < logs.size(); ++i)
    if (i == 0 || logs[i].first != logs[i - 1].first) ++distinct;
  if (logs.size() < 2 || distinct < 2)
    throw std::domain_error("fit_slope: need at least two distinct N");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : logs) {
    mx += x;
    my += y;
  }
  mx /= logs.size();
  my /= logs.size();
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : logs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

// ---------------------------------------------------------------------------
// CSV / plot-data output
// ---------------------------------------------------------------------------

inline constexpr const char* kSweepCsvHeader =
    "problem,d,T,n,N,epsilon,M,Q,seed,l1_mean,l1_std,runtime_ms";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string sweep_record_row(const SweepRecord& rec) {
  std::ostringstream os;
  os << rec.problem << ',' << rec.dim << ',' << format_double(rec.horizon)
     << ',' << rec.steps << ',' << rec.n_particles << ','
     << format_double(rec.epsilon) << ',' << rec.replicates << ','
     << rec.eval_points << ',' << rec.seed << ','
     << format_double(rec.l1_mean) << ',' << format_double(rec.l1_std) << ','
     << format_double(rec.runtime_ms);
  return os.str();
}

inline std::string sweep_csv(std::span<const SweepRecord> records) {
  std::ostringstream os;
  os << kSweepCsvHeader << '\n';
  for (const auto& rec : records) os << sweep_record_row(rec) << '\n';
  return os.str();
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::exists(parent))
    throw std::runtime_error("output directory does not exist: " +
                             parent.string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing: " + path);
}

inline std::vector<SweepRecord> parse_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader)
    throw std::runtime_error("sweep csv: bad or missing header");
  std::vector<SweepRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 12)
      throw std::runtime_error("sweep csv: bad row: " + line);
    SweepRecord rec;
    try {
      rec.problem = fields[0];
      rec.dim = std::stoi(fields[1]);
      rec.horizon = std::stod(fields[2]);
      rec.steps = std::stoi(fields[3]);
      rec.n_particles = std::stoi(fields[4]);
      rec.epsilon = std::stod(fields[5]);
      rec.replicates = std::stoi(fields[6]);
      rec.eval_points = std::stoi(fields[7]);
      rec.seed = std::stoull(fields[8]);
      rec.l1_mean = std::stod(fields[9]);
      rec.l1_std = std::stod(fields[10]);
      rec.runtime_ms = std::stod(fields[11]);
    } catch (const std::exception&) {
      throw std::runtime_error("sweep csv: bad row: " + line);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<SweepRecord> read_sweep_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open csv: " + path);
  return parse_sweep_csv(in);
}

// Two-column TSV curves: error vs N (one file per epsilon), error vs epsilon
// (one per N) and the epsilon_opt vs N curve. Returns the written paths.
inline std::vector<std::string> write_plot_data(
    std::span<const SweepRecord> records, const std::string& dir) {
  if (records.empty()) return {};
  const std::string problem = records[0].problem;
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& body) {
    const std::string path = (std::filesystem::path(dir) / name).string();
    write_text_file(path, body);
    written.push_back(path);
  };

  std::vector<double> epsilons;
  std::vector<int> ns;
  for (const auto& rec : records) {
    if (std::find(epsilons.begin(), epsilons.end(), rec.epsilon) ==
        epsilons.end())
      epsilons.push_back(rec.epsilon);
    if (std::find(ns.begin(), ns.end(), rec.n_particles) == ns.end())
      ns.push_back(rec.n_particles);
  }
  std::sort(epsilons.begin(), epsilons.end());
  std::sort(ns.begin(), ns.end());

  for (double eps : epsilons) {
    std::ostringstream body;
    for (int n : ns)
      for (const auto& rec : records)
        if (rec.epsilon == eps && rec.n_particles == n)
          body << n << '\t' << format_double(rec.l1_mean) << '\n';
    char name[128];
    std::snprintf(name, sizeof(name), "%s_err_vs_N_eps%g.tsv",
                  problem.c_str(), eps);
    emit(name, body.str());
  }
  for (int n : ns) {
    std::ostringstream body;
    for (double eps : epsilons)
      for (const auto& rec : records)
        if (rec.epsilon == eps && rec.n_particles == n)
          body << format_double(eps) << '\t' << format_double(rec.l1_mean)
               << '\n';
    char name[128];
    std::snprintf(name, sizeof(name), "%s_err_vs_eps_N%d.tsv",
                  problem.c_str(), n);
    emit(name, body.str());
  }
  {
    std::ostringstream body;
    for (const auto& [n, eps] : optimal_bandwidths(records))
      body << n << '\t' << format_double(eps) << '\n';
    emit(problem + "_eps_opt.tsv", body.str());
  }
  return written;
}

}  // namespace fkp
