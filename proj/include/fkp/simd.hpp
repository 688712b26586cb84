#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

// Vectorized inner loops for the weighted kernel sums. Everything here is
// plain GCC/Clang vector-extension code; other compilers fall back to the
// scalar path selected at the bottom.

#if defined(__GNUC__) || defined(__clang__)
#define FKP_HAVE_VECTOR_EXT 1
#else
#define FKP_HAVE_VECTOR_EXT 0
#endif

namespace fkp::simd {

#if FKP_HAVE_VECTOR_EXT

#if defined(__AVX512F__)
inline constexpr int kWidth = 8;
#elif defined(__AVX__)
inline constexpr int kWidth = 4;
#else
inline constexpr int kWidth = 2;
#endif

typedef double VecD __attribute__((vector_size(kWidth * sizeof(double))));
typedef std::int64_t VecI __attribute__((vector_size(kWidth * sizeof(double))));

inline VecD broadcast(double v) {
  VecD out;
  for (int i = 0; i < kWidth; ++i) out[i] = v;
  return out;
}

inline VecD load(const double* p) {
  VecD out;
  std::memcpy(&out, p, sizeof(out));
  return out;
}

inline void store(double* p, VecD v) { std::memcpy(p, &v, sizeof(v)); }

inline double horizontal_sum(VecD v) {
  double s = 0.0;
  for (int i = 0; i < kWidth; ++i) s += v[i];
  return s;
}

// exp(x) lane-wise, |relative error| < 1e-14 on [-708, 708]. Arguments are
// saturated at +-708, so underflowing inputs return ~3e-308 instead of 0.
inline VecD exp(VecD x) {
  const VecD lo = broadcast(-708.0);
  const VecD hi = broadcast(708.0);
  x = (x < lo) ? lo : x;
  x = (x > hi) ? hi : x;
  // Round x/ln2 to the nearest integer with the 1.5*2^52 shift trick; the
  // integer lands in the low 32 bits of the double's mantissa.
  const VecD shift = broadcast(6755399441055744.0);
  VecD kd = x * broadcast(1.4426950408889634074) + shift;
  VecI ki = (std::bit_cast<VecI>(kd) << 32) >> 32;
  kd -= shift;
  VecD r = x - kd * broadcast(6.93147180369123816490e-01);
  r -= kd * broadcast(1.90821492927058770002e-10);
  VecD p = broadcast(1.0 / 479001600.0);
  p = p * r + broadcast(1.0 / 39916800.0);
  p = p * r + broadcast(1.0 / 3628800.0);
  p = p * r + broadcast(1.0 / 362880.0);
  p = p * r + broadcast(1.0 / 40320.0);
  p = p * r + broadcast(1.0 / 5040.0);
  p = p * r + broadcast(1.0 / 720.0);
  p = p * r + broadcast(1.0 / 120.0);
  p = p * r + broadcast(1.0 / 24.0);
  p = p * r + broadcast(1.0 / 6.0);
  p = p * r + broadcast(0.5);
  p = p * r + broadcast(1.0);
  p = p * r + broadcast(1.0);
  return std::bit_cast<VecD>(std::bit_cast<VecI>(p) + (ki << 52));
}

#endif  // FKP_HAVE_VECTOR_EXT

// Scalar counterpart of simd::exp with identical saturation behaviour.
inline double scalar_exp(double x) {
  if (x < -708.0) x = -708.0;
  if (x > 708.0) x = 708.0;
  constexpr double kShift = 6755399441055744.0;
  double kd = x * 1.4426950408889634074 + kShift;
  const std::int64_t ki = (std::bit_cast<std::int64_t>(kd) << 32) >> 32;
  kd -= kShift;
  double r = x - kd * 6.93147180369123816490e-01;
  r -= kd * 1.90821492927058770002e-10;
  double p = 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  return std::bit_cast<double>(std::bit_cast<std::int64_t>(p) + (ki << 52));
}

// value  += sum_i w[i] * exp(-(q - x[i])^2 * inv_two_eps2)
// grad   += sum_i w[i] * exp(...) * (x[i] - q)      (unscaled direction)
// over the index range [begin, end) of a one-dimensional source array.
inline void accumulate_1d(const double* xs, const double* ws, std::size_t begin,
                          std::size_t end, double q, double inv_two_eps2,
                          double& value, double& grad) {
  double sv = 0.0;
  double sg = 0.0;
  std::size_t i = begin;
#if FKP_HAVE_VECTOR_EXT
  if (end - begin >= static_cast<std::size_t>(kWidth)) {
    VecD accv = broadcast(0.0);
    VecD accg = broadcast(0.0);
    const VecD qv = broadcast(q);
    const VecD scale = broadcast(-inv_two_eps2);
    for (; i + kWidth <= end; i += kWidth) {
      const VecD dx = qv - load(xs + i);
      const VecD e = load(ws + i) * exp(dx * dx * scale);
      accv += e;
      accg -= e * dx;
    }
    sv = horizontal_sum(accv);
    sg = horizontal_sum(accg);
  }
#endif
  for (; i < end; ++i) {
    const double dx = q - xs[i];
    const double e = ws[i] * scalar_exp(-dx * dx * inv_two_eps2);
    sv += e;
    sg -= e * dx;
  }
  value += sv;
  grad += sg;
}

// Same contraction for d-dimensional sources stored coordinate-major
// (coords[l] is the array of l-th coordinates). grad[l] accumulates the
// unscaled direction sum_i w[i]*e_i*(x_l[i]-q_l).
inline void accumulate_nd(const double* const* coords, const double* ws,
                          int dim, std::size_t begin, std::size_t end,
                          const double* q, double inv_two_eps2, double& value,
                          double* grad) {
  constexpr int kMaxDim = 16;
  if (dim > kMaxDim) {
    for (std::size_t i = begin; i < end; ++i) {
      double dist2 = 0.0;
      for (int l = 0; l < dim; ++l) {
        const double dx = q[l] - coords[l][i];
        dist2 += dx * dx;
      }
      const double e = ws[i] * scalar_exp(-dist2 * inv_two_eps2);
      value += e;
      for (int l = 0; l < dim; ++l) grad[l] += e * (coords[l][i] - q[l]);
    }
    return;
  }
  std::size_t i = begin;
  double sv = 0.0;
  double sg[kMaxDim] = {0.0};
#if FKP_HAVE_VECTOR_EXT
  if (dim <= kMaxDim && end - begin >= static_cast<std::size_t>(kWidth)) {
    VecD accv = broadcast(0.0);
    VecD accg[kMaxDim];
    VecD qv[kMaxDim];
    for (int l = 0; l < dim; ++l) {
      accg[l] = broadcast(0.0);
      qv[l] = broadcast(q[l]);
    }
    const VecD scale = broadcast(-inv_two_eps2);
    for (; i + kWidth <= end; i += kWidth) {
      VecD dist2 = broadcast(0.0);
      VecD dx[kMaxDim];
      for (int l = 0; l < dim; ++l) {
        dx[l] = qv[l] - load(coords[l] + i);
        dist2 += dx[l] * dx[l];
      }
      const VecD e = load(ws + i) * exp(dist2 * scale);
      accv += e;
      for (int l = 0; l < dim; ++l) accg[l] -= e * dx[l];
    }
    sv = horizontal_sum(accv);
    for (int l = 0; l < dim; ++l) sg[l] = horizontal_sum(accg[l]);
  }
#endif
  for (; i < end; ++i) {
    double dist2 = 0.0;
    for (int l = 0; l < dim; ++l) {
      const double dx = q[l] - coords[l][i];
      dist2 += dx * dx;
    }
    const double e = ws[i] * scalar_exp(-dist2 * inv_two_eps2);
    sv += e;
    for (int l = 0; l < dim; ++l) sg[l] += e * (coords[l][i] - q[l]);
  }
  value += sv;
  for (int l = 0; l < dim; ++l) grad[l] += sg[l];
}

}  // namespace fkp::simd
