#pragma once

#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fkp/config.hpp"
#include "fkp/harness.hpp"
#include "fkp/parallel.hpp"

namespace fkp::cli {

inline void emit(const RunConfig& cfg, const std::string& content) {
  if (cfg.out.empty()) {
    std::cout << content;
  } else {
    write_text_file(cfg.out, content);
  }
}

inline void setup_threads(const RunConfig& cfg) {
  set_threads(resolve_threads(cfg));
}

// run: one experiment cell, one CSV data row.
inline int cmd_run(const RunConfig& cfg) {
  setup_threads(cfg);
  const ProblemSpec problem = build_problem(cfg);
  const SweepRecord rec = run_experiment(
      problem, cfg.n, cfg.N, cfg.epsilon, resolve_replicates(cfg), cfg.Q,
      cfg.seed, resolve_oracle(cfg, problem.dim), resolve_policy(cfg));
  emit(cfg, sweep_csv({&rec, 1}));
  return 0;
}

// sweep: the full (N, epsilon) grid plus optional plot data.
inline int cmd_sweep(const RunConfig& cfg) {
  setup_threads(cfg);
  const ProblemSpec problem = build_problem(cfg);
  const std::vector<int> ns = cfg.Ns.empty() ? std::vector<int>{cfg.N} : cfg.Ns;
  const std::vector<double> epsilons =
      cfg.epsilons.empty() ? std::vector<double>{cfg.epsilon} : cfg.epsilons;
  const auto records =
      sweep(problem, cfg.n, ns, epsilons, resolve_replicates(cfg), cfg.Q,
            cfg.seed, resolve_oracle(cfg, problem.dim), resolve_policy(cfg));
  emit(cfg, sweep_csv(records));
  if (!cfg.plot_dir.empty()) write_plot_data(records, cfg.plot_dir);
  return 0;
}

// oracle: reference values at the configured (t, x) list, as CSV.
inline int cmd_oracle(const RunConfig& cfg) {
  setup_threads(cfg);
  const ProblemSpec problem = build_problem(cfg);
  const OracleConfig oracle_cfg = resolve_oracle(cfg, problem.dim);
  std::ostringstream os;
  os << "problem,t";
  for (int l = 0; l < problem.dim; ++l) os << ",x" << (l + 1);
  os << ",value\n";
  for (double t : cfg.ts) {
    for (const auto& x : cfg.xs) {
      if (static_cast<int>(x.size()) != problem.dim)
        throw std::invalid_argument("oracle point has wrong dimension");
      double value = 0.0;
      if (problem.name == "fokker-planck")
        value = fokker_planck_reference(t, x[0], problem.nu);
      else if (problem.name == "burgers")
        value = burgers_reference(t, x[0], problem.nu, oracle_cfg);
      else if (problem.name == "kpz")
        value = kpz_reference(t, x, problem.nu, oracle_cfg);
      else
        throw std::invalid_argument("no oracle for problem: " + problem.name);
      os << problem.name << ',' << format_double(t);
      for (double c : x) os << ',' << format_double(c);
      os << ',' << format_double(value) << '\n';
    }
  }
  emit(cfg, os.str());
  return 0;
}

// fit: epsilon_opt table and log-log slope from a sweep CSV.
inline int cmd_fit(const std::string& csv_path, const RunConfig& cfg) {
  const auto records = read_sweep_csv(csv_path);
  const auto optima = optimal_bandwidths(records);
  const SlopeFit fit = fit_slope(optima);
  std::ostringstream os;
  os << "N,epsilon_opt\n";
  for (const auto& [n, eps] : optima)
    os << n << ',' << format_double(eps) << '\n';
  os << "slope," << format_double(fit.slope) << '\n';
  os << "intercept," << format_double(fit.intercept) << '\n';
  emit(cfg, os.str());
  return 0;
}

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Forward Feynman-Kac particle solver for semilinear PDEs"};
  app.require_subcommand(1);

  // Every config key doubles as a flag; flags override the config file.
  std::map<std::string, std::string> overrides;
  std::string config_path;
  std::string csv_path;
  auto add_common = [&](CLI::App* sub, bool with_out = true) {
    sub->add_option("--config", config_path, "run manifest (key = value)");
    static const std::vector<std::string> keys = {
        "problem", "d",       "nu",          "T",
        "n",       "N",       "Ns",          "epsilon",
        "epsilons", "M",      "Q",           "seed",
        "kernel",  "oracle",  "oracle_samples", "oracle_nodes",
        "lambda_cap", "y_floor", "mode",     "tau",
        "threads", "plot_dir", "ts",         "xs"};
    for (const auto& key : keys) {
      sub->add_option_function<std::string>(
          "--" + key,
          [&overrides, key](const std::string& v) { overrides[key] = v; });
    }
    if (with_out)
      sub->add_option_function<std::string>(
          "--out", [&overrides](const std::string& v) { overrides["out"] = v; });
  };

  CLI::App* run = app.add_subcommand("run", "single experiment, one CSV row");
  add_common(run);
  CLI::App* sw = app.add_subcommand("sweep", "(N, epsilon) grid sweep");
  add_common(sw);
  CLI::App* orac =
      app.add_subcommand("oracle", "reference values at (t, x) points");
  add_common(orac);
  CLI::App* fit = app.add_subcommand("fit", "bandwidth fit from sweep CSV");
  fit->add_option("csv", csv_path, "sweep CSV path")->required();
  add_common(fit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open config: " + config_path);
      cfg = parse_config(in);
    }
    for (const auto& [key, value] : overrides)
      apply_config_entry(cfg, key, value);
    if (run->parsed()) return cmd_run(cfg);
    if (sw->parsed()) return cmd_sweep(cfg);
    if (orac->parsed()) return cmd_oracle(cfg);
    if (fit->parsed()) return cmd_fit(csv_path, cfg);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fkp::cli
