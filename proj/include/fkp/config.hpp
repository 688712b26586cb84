#pragma once

#include <cstdint>
#include <cstdlib>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fkp/model.hpp"
#include "fkp/oracle.hpp"
#include "fkp/solver.hpp"

namespace fkp {

// Flat key = value run manifest. Every key is also a CLI flag of the same
// name; serialize_config/parse_config round-trip exactly.
struct RunConfig {
  std::string problem = "fokker-planck";
  int d = 1;
  double nu = 0.1;
  double T = 0.1;
  int n = 10;
  int N = 10000;
  std::vector<int> Ns;            // sweep grid; falls back to {N}
  double epsilon = 0.2;
  std::vector<double> epsilons;   // sweep grid; falls back to {epsilon}
  int M = 0;                      // 0 = problem default (20, KPZ 5)
  int Q = 500;
  std::uint64_t seed = 42;
  std::string kernel = "gaussian";
  std::string oracle = "auto";    // auto | gauss-hermite | monte-carlo
  int oracle_samples = 10000;
  int oracle_nodes = 200;
  std::optional<double> lambda_cap;
  double y_floor = 1e-12;
  std::string mode = "auto";      // naive | tree | auto
  double tau = 1e-8;
  int threads = 0;                // 0 = FKP_THREADS, then hardware
  std::string out;
  std::string plot_dir;
  std::vector<double> ts;              // oracle subcommand: times
  std::vector<std::vector<double>> xs; // oracle subcommand: points

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

inline int parse_int(const std::string& v) {
  std::size_t pos = 0;
  const int out = std::stoi(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("bad integer: " + v);
  return out;
}

inline double parse_dbl(const std::string& v) {
  std::size_t pos = 0;
  const double out = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("bad number: " + v);
  return out;
}

inline std::string fmt_dbl(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& raw_value) {
  using detail::parse_dbl;
  using detail::parse_int;
  const std::string value = detail::trim(raw_value);
  if (key == "problem") cfg.problem = value;
  else if (key == "d") cfg.d = parse_int(value);
  else if (key == "nu") cfg.nu = parse_dbl(value);
  else if (key == "T") cfg.T = parse_dbl(value);
  else if (key == "n") cfg.n = parse_int(value);
  else if (key == "N") cfg.N = parse_int(value);
  else if (key == "Ns") {
    cfg.Ns.clear();
    if (!value.empty())
      for (const auto& part : detail::split(value, ','))
        cfg.Ns.push_back(parse_int(part));
  } else if (key == "epsilon") cfg.epsilon = parse_dbl(value);
  else if (key == "epsilons") {
    cfg.epsilons.clear();
    if (!value.empty())
      for (const auto& part : detail::split(value, ','))
        cfg.epsilons.push_back(parse_dbl(part));
  } else if (key == "M") cfg.M = parse_int(value);
  else if (key == "Q") cfg.Q = parse_int(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "kernel") cfg.kernel = value;
  else if (key == "oracle") cfg.oracle = value;
  else if (key == "oracle_samples") cfg.oracle_samples = parse_int(value);
  else if (key == "oracle_nodes") cfg.oracle_nodes = parse_int(value);
  else if (key == "lambda_cap") {
    if (value.empty()) cfg.lambda_cap.reset();
    else cfg.lambda_cap = parse_dbl(value);
  } else if (key == "y_floor") cfg.y_floor = parse_dbl(value);
  else if (key == "mode") cfg.mode = value;
  else if (key == "tau") cfg.tau = parse_dbl(value);
  else if (key == "threads") cfg.threads = parse_int(value);
  else if (key == "out") cfg.out = value;
  else if (key == "plot_dir") cfg.plot_dir = value;
  else if (key == "ts") {
    cfg.ts.clear();
    if (!value.empty())
      for (const auto& part : detail::split(value, ','))
        cfg.ts.push_back(parse_dbl(part));
  } else if (key == "xs") {
    cfg.xs.clear();
    if (!value.empty())
      for (const auto& point : detail::split(value, ';')) {
        std::vector<double> coords;
        for (const auto& c : detail::split(point, ','))
          coords.push_back(parse_dbl(c));
        cfg.xs.push_back(std::move(coords));
      }
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

inline RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    apply_config_entry(cfg, key, value);
  }
  return cfg;
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline std::string serialize_config(const RunConfig& cfg) {
  using detail::fmt_dbl;
  std::ostringstream os;
  os << "problem = " << cfg.problem << '\n';
  os << "d = " << cfg.d << '\n';
  os << "nu = " << fmt_dbl(cfg.nu) << '\n';
  os << "T = " << fmt_dbl(cfg.T) << '\n';
  os << "n = " << cfg.n << '\n';
  os << "N = " << cfg.N << '\n';
  os << "Ns = ";
  for (std::size_t i = 0; i < cfg.Ns.size(); ++i)
    os << (i ? "," : "") << cfg.Ns[i];
  os << '\n';
  os << "epsilon = " << fmt_dbl(cfg.epsilon) << '\n';
  os << "epsilons = ";
  for (std::size_t i = 0; i < cfg.epsilons.size(); ++i)
    os << (i ? "," : "") << fmt_dbl(cfg.epsilons[i]);
  os << '\n';
  os << "M = " << cfg.M << '\n';
  os << "Q = " << cfg.Q << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "kernel = " << cfg.kernel << '\n';
  os << "oracle = " << cfg.oracle << '\n';
  os << "oracle_samples = " << cfg.oracle_samples << '\n';
  os << "oracle_nodes = " << cfg.oracle_nodes << '\n';
  os << "lambda_cap = "
     << (cfg.lambda_cap ? fmt_dbl(*cfg.lambda_cap) : "") << '\n';
  os << "y_floor = " << fmt_dbl(cfg.y_floor) << '\n';
  os << "mode = " << cfg.mode << '\n';
  os << "tau = " << fmt_dbl(cfg.tau) << '\n';
  os << "threads = " << cfg.threads << '\n';
  os << "out = " << cfg.out << '\n';
  os << "plot_dir = " << cfg.plot_dir << '\n';
  os << "ts = ";
  for (std::size_t i = 0; i < cfg.ts.size(); ++i)
    os << (i ? "," : "") << fmt_dbl(cfg.ts[i]);
  os << '\n';
  os << "xs = ";
  for (std::size_t i = 0; i < cfg.xs.size(); ++i) {
    if (i) os << ';';
    for (std::size_t j = 0; j < cfg.xs[i].size(); ++j)
      os << (j ? "," : "") << fmt_dbl(cfg.xs[i][j]);
  }
  os << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Resolution of derived settings
// ---------------------------------------------------------------------------

inline ProblemSpec build_problem(const RunConfig& cfg) {
  return problem_by_name(cfg.problem, cfg.d, cfg.nu, cfg.lambda_cap,
                         cfg.y_floor, cfg.T);
}

inline int resolve_replicates(const RunConfig& cfg) {
  if (cfg.M > 0) return cfg.M;
  return cfg.problem == "kpz" ? 5 : 20;
}

inline EvalPolicy resolve_policy(const RunConfig& cfg) {
  if (cfg.mode == "naive") return EvalPolicy::naive();
  if (cfg.mode == "tree") return EvalPolicy::tree(cfg.tau);
  if (cfg.mode == "auto") return EvalPolicy::automatic(cfg.tau);
  throw std::invalid_argument("unknown mode: " + cfg.mode);
}

inline OracleConfig resolve_oracle(const RunConfig& cfg, int dim) {
  // The oracle draws on the kOracle purpose stream, disjoint from particle
  // and evaluation-point streams even under the same base seed.
  const std::uint64_t oracle_seed = cfg.seed;
  if (cfg.oracle == "monte-carlo")
    return OracleConfig::monte_carlo(cfg.oracle_samples, oracle_seed);
  if (cfg.oracle == "gauss-hermite")
    return OracleConfig::gauss_hermite(cfg.oracle_nodes);
  if (cfg.oracle == "auto") {
    if (dim <= 2) return OracleConfig::gauss_hermite(cfg.oracle_nodes);
    return OracleConfig::monte_carlo(cfg.oracle_samples, oracle_seed);
  }
  throw std::invalid_argument("unknown oracle method: " + cfg.oracle);
}

inline int resolve_threads(const RunConfig& cfg) {
  if (cfg.threads != 0) return cfg.threads;
  if (const char* env = std::getenv("FKP_THREADS")) {
    try {
      const int v = detail::parse_int(env);
      if (v != 0) return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("FKP_THREADS is not an integer");
    }
  }
  return 0;  // auto
}

}  // namespace fkp
