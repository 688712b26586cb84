#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fkp/model.hpp"
#include "fkp/parallel.hpp"
#include "fkp/rng.hpp"

namespace fkp {

// All N particle trajectories on the time grid, slice-major: slice k holds
// the N*d coordinates at time t_k.
struct PathBundle {
  int n_particles = 0;
  int steps = 0;  // n
  int dim = 0;
  std::uint64_t seed = 0;
  std::vector<double> positions;  // (steps+1) * n_particles * dim

  std::span<const double> slice(int k) const {
    const std::size_t stride =
        static_cast<std::size_t>(n_particles) * static_cast<std::size_t>(dim);
    return {positions.data() + static_cast<std::size_t>(k) * stride, stride};
  }

  std::span<const double> position(int k, int i) const {
    const auto s = slice(k);
    return s.subspan(static_cast<std::size_t>(i) * dim, dim);
  }
};

// One Euler-Maruyama move: x + Phi(t,x) * sqrt(dt) * noise + g(t,x) * dt.
inline std::vector<double> euler_step(std::span<const double> x, double t,
                                      double dt, std::span<const double> noise,
                                      const ProblemSpec& problem) {
  if (dt <= 0.0) throw std::domain_error("euler_step: dt must be positive");
  if (static_cast<int>(noise.size()) != problem.noise_dim)
    throw std::invalid_argument("euler_step: noise dimension mismatch");
  const int d = problem.dim;
  const int p = problem.noise_dim;
  const std::vector<double> phi = problem.diffusion(t, x);
  const std::vector<double> g = problem.drift(t, x);
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> out(x.begin(), x.end());
  for (int i = 0; i < d; ++i) {
    double diff = 0.0;
    for (int j = 0; j < p; ++j)
      diff += phi[static_cast<std::size_t>(i) * p + j] * noise[j];
    out[i] += diff * sqrt_dt + g[i] * dt;
  }
  return out;
}

// Simulates the N independent Euler paths. Particle i consumes only the
// substream (seed, kParticles, i), so the result is a pure function of the
// arguments no matter how the loop is scheduled.
inline PathBundle simulate_paths(const ProblemSpec& problem,
                                 const TimeGrid& grid, int n_particles,
                                 std::uint64_t seed) {
  if (n_particles < 1)
    throw std::domain_error("simulate_paths: need at least one particle");
  PathBundle bundle;
  bundle.n_particles = n_particles;
  bundle.steps = grid.steps;
  bundle.dim = problem.dim;
  bundle.seed = seed;
  const int d = problem.dim;
  const int p = problem.noise_dim;
  const std::size_t stride =
      static_cast<std::size_t>(n_particles) * static_cast<std::size_t>(d);
  bundle.positions.assign(stride * (grid.steps + 1), 0.0);

  const std::uint64_t key = derive_key(seed, StreamPurpose::kParticles);
  parallel_for(static_cast<std::size_t>(n_particles),
               [&](std::size_t begin, std::size_t end) {
                 std::vector<double> noise(p);
                 for (std::size_t i = begin; i < end; ++i) {
                   RandomStream stream(key, static_cast<std::uint64_t>(i));
                   std::span<double> x0{
                       bundle.positions.data() + i * d,
                       static_cast<std::size_t>(d)};
                   problem.u0_sampler(stream, x0);
                   for (int k = 0; k < grid.steps; ++k) {
                     stream.fill_normal(noise);
                     const double* cur =
                         bundle.positions.data() + k * stride + i * d;
                     const auto next =
                         euler_step({cur, static_cast<std::size_t>(d)},
                                    grid.times[k], grid.dt, noise, problem);
                     double* nxt =
                         bundle.positions.data() + (k + 1) * stride + i * d;
                     for (int l = 0; l < d; ++l) nxt[l] = next[l];
                   }
                 }
               });
  return bundle;
}

}  // namespace fkp
