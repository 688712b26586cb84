#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "fkp/kernel.hpp"
#include "fkp/parallel.hpp"
#include "fkp/simd.hpp"

namespace fkp {

// One weighted particle slice together with the kernel that turns it into a
// density estimate.
struct ParticleEnsemble {
  int dim = 1;
  std::vector<double> points;   // N x dim, row-major
  std::vector<double> weights;  // N, all positive
  MollifierKernel kernel;

  int size() const { return static_cast<int>(weights.size()); }
};

inline ParticleEnsemble make_ensemble(int dim, std::vector<double> points,
                                      std::vector<double> weights,
                                      MollifierKernel kernel) {
  if (dim < 1) throw std::domain_error("ensemble dimension must be >= 1");
  if (kernel.dim != dim)
    throw std::invalid_argument("kernel/ensemble dimension mismatch");
  if (points.size() != weights.size() * static_cast<std::size_t>(dim))
    throw std::invalid_argument("points/weights size mismatch");
  for (double w : weights)
    if (!(w > 0.0)) throw std::domain_error("ensemble weights must be > 0");
  return ParticleEnsemble{dim, std::move(points), std::move(weights),
                          std::move(kernel)};
}

struct EvalMode {
  enum class Kind { kNaive, kTree };
  Kind kind = Kind::kNaive;
  double tau = 0.0;

  static EvalMode naive() { return {Kind::kNaive, 0.0}; }
  static EvalMode tree(double tau) {
    if (!(tau > 0.0 && tau < 1.0))
      throw std::domain_error("tree tolerance must lie in (0, 1)");
    return {Kind::kTree, tau};
  }
};

struct Evaluation {
  double value = 0.0;
  std::vector<double> gradient;
};

namespace detail {

// Scaled radius multiplier S(tau): beyond S the Gaussian falls below
// tau*K(0) and |x| phi(x) falls below tau * sup|grad K|, so dropping sources
// farther than eps*S keeps both the value and the gradient truncation error
// inside their advertised bounds.
inline double truncation_multiplier(double tau) {
  const double big_l = std::log(1.0 / tau);
  const double s_value = std::sqrt(2.0 * big_l);
  double s = std::sqrt(2.0 * big_l + 1.0);
  for (int i = 0; i < 32; ++i)
    s = std::sqrt(2.0 * std::log(s) + 2.0 * big_l + 1.0);
  while (s * std::exp(-0.5 * s * s) > tau * std::exp(-0.5)) s *= 1.0 + 1e-9;
  return std::max(s, s_value);
}

// Static kd-tree over the source points, leaves scanned as contiguous
// coordinate-major blocks.
class KdTree {
 public:
  static constexpr int kLeafSize = 64;

  KdTree() = default;

  KdTree(int dim, const std::vector<double>& points, int count)
      : dim_(dim), count_(count) {
    order_.resize(count);
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * (count / kLeafSize + 1));
    build(points, 0, count);
  }

  const std::vector<int>& order() const { return order_; }

  // Invokes visit(begin, end) on every leaf whose box is within radius of q.
  template <typename Visit>
  void for_each_leaf_in_range(const double* q, double radius,
                              Visit&& visit) const {
    const double r2 = radius * radius;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      double dist2 = 0.0;
      const double* lo = bbox_lo_.data() + node.bbox * dim_;
      const double* hi = bbox_hi_.data() + node.bbox * dim_;
      for (int l = 0; l < dim_; ++l) {
        double excess = 0.0;
        if (q[l] < lo[l]) excess = lo[l] - q[l];
        else if (q[l] > hi[l]) excess = q[l] - hi[l];
        dist2 += excess * excess;
      }
      if (dist2 > r2) continue;
      if (node.left < 0) {
        visit(node.begin, node.end);
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
  }

 private:
  struct Node {
    int left = -1;
    int right = -1;
    int begin = 0;
    int end = 0;
    int bbox = 0;
  };

  int build(const std::vector<double>& points, int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    const int bbox = static_cast<int>(bbox_lo_.size()) / dim_;
    bbox_lo_.resize(bbox_lo_.size() + dim_);
    bbox_hi_.resize(bbox_hi_.size() + dim_);
    double* lo = bbox_lo_.data() + bbox * dim_;
    double* hi = bbox_hi_.data() + bbox * dim_;
    for (int l = 0; l < dim_; ++l) {
      lo[l] = std::numeric_limits<double>::infinity();
      hi[l] = -std::numeric_limits<double>::infinity();
    }
    for (int i = begin; i < end; ++i) {
      const double* p = points.data() + static_cast<std::size_t>(order_[i]) * dim_;
      for (int l = 0; l < dim_; ++l) {
        lo[l] = std::min(lo[l], p[l]);
        hi[l] = std::max(hi[l], p[l]);
      }
    }
    nodes_[id].bbox = bbox;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= kLeafSize) return id;
    int axis = 0;
    double widest = -1.0;
    for (int l = 0; l < dim_; ++l) {
      const double w = hi[l] - lo[l];
      if (w > widest) {
        widest = w;
        axis = l;
      }
    }
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](int a, int b) {
                       return points[static_cast<std::size_t>(a) * dim_ + axis] <
                              points[static_cast<std::size_t>(b) * dim_ + axis];
                     });
    const int left = build(points, begin, mid);
    const int right = build(points, mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  int dim_ = 0;
  int count_ = 0;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  std::vector<double> bbox_lo_;
  std::vector<double> bbox_hi_;
};

}  // namespace detail

// Queryable density estimate u(x) = (1/N) sum_i G_i K_eps(x - xi_i) together
// with its gradient. Immutable after construction; all query methods are
// const and safe to call concurrently.
class DensityEstimate {
 public:
  DensityEstimate(ParticleEnsemble ensemble, EvalMode mode)
      : ensemble_(std::move(ensemble)), mode_(mode) {
    if (mode_.kind == EvalMode::Kind::kTree &&
        !(mode_.tau > 0.0 && mode_.tau < 1.0))
      throw std::domain_error("tree tolerance must lie in (0, 1)");
    const int n = ensemble_.size();
    const int d = ensemble_.dim;
    coords_.assign(d, {});
    const bool sorted = use_sorted_1d();
    if (sorted || use_kdtree()) {
      if (sorted) {
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0);
        const auto& pts = ensemble_.points;
        std::sort(order_.begin(), order_.end(),
                  [&pts](int a, int b) { return pts[a] < pts[b]; });
      } else {
        tree_ = detail::KdTree(d, ensemble_.points, n);
        order_ = tree_.order();
      }
    } else {
      order_.resize(n);
      std::iota(order_.begin(), order_.end(), 0);
    }
    for (int l = 0; l < d; ++l) coords_[l].resize(n);
    weights_.resize(n);
    for (int i = 0; i < n; ++i) {
      const double* p =
          ensemble_.points.data() + static_cast<std::size_t>(order_[i]) * d;
      for (int l = 0; l < d; ++l) coords_[l][i] = p[l];
      weights_[i] = ensemble_.weights[order_[i]];
    }
  }

  const ParticleEnsemble& ensemble() const { return ensemble_; }
  const EvalMode& mode() const { return mode_; }

  // Radius beyond which tree mode drops source points.
  double truncation_radius() const {
    if (mode_.kind != EvalMode::Kind::kTree) return 0.0;
    return ensemble_.kernel.epsilon * detail::truncation_multiplier(mode_.tau);
  }

  Evaluation evaluate(std::span<const double> x) const {
    Evaluation out;
    out.gradient.assign(ensemble_.dim, 0.0);
    std::array<double, 1> value{0.0};
    evaluate_batch(x, value, out.gradient);
    out.value = value[0];
    return out;
  }

  // Element-wise evaluation of Q query points (flat Q x dim). values gets Q
  // entries, gradients Q x dim.
  void evaluate_batch(std::span<const double> queries,
                      std::span<double> values,
                      std::span<double> gradients) const {
    const int n = ensemble_.size();
    if (n == 0) throw std::domain_error("evaluate on empty ensemble");
    const int d = ensemble_.dim;
    const std::size_t q_count = values.size();
    if (queries.size() != q_count * static_cast<std::size_t>(d) ||
        gradients.size() != q_count * static_cast<std::size_t>(d))
      throw std::invalid_argument("evaluate_batch: size mismatch");

    const double inv_two_eps2 = 0.5 * ensemble_.kernel.inv_eps2_;
    const double radius = truncation_radius();
    parallel_for(q_count, [&](std::size_t begin, std::size_t end) {
      std::vector<const double*> coord_ptrs(d);
      for (int l = 0; l < d; ++l) coord_ptrs[l] = coords_[l].data();
      for (std::size_t qi = begin; qi < end; ++qi) {
        const double* q = queries.data() + qi * d;
        double value = 0.0;
        double* grad = gradients.data() + qi * d;
        for (int l = 0; l < d; ++l) grad[l] = 0.0;
        if (mode_.kind == EvalMode::Kind::kNaive) {
          accumulate_range(q, 0, n, inv_two_eps2, value, grad);
        } else if (use_sorted_1d()) {
          const auto& xs = coords_[0];
          const auto lo = std::lower_bound(xs.begin(), xs.end(), q[0] - radius);
          const auto hi = std::upper_bound(xs.begin(), xs.end(), q[0] + radius);
          accumulate_range(q, lo - xs.begin(), hi - xs.begin(), inv_two_eps2,
                           value, grad);
        } else {
          tree_.for_each_leaf_in_range(q, radius, [&](int b, int e) {
            accumulate_range(q, b, e, inv_two_eps2, value, grad);
          });
        }
        finalize(value, grad, values.data() + qi, grad);
      }
    });
  }

  // Evaluates the estimate at the ensemble's own points (the per-step
  // self-queries of the scheme). In sorted 1-d tree mode each source pair is
  // visited once and contributes to both sides.
  void evaluate_self(std::span<double> values,
                     std::span<double> gradients) const {
    const int n = ensemble_.size();
    if (n == 0) throw std::domain_error("evaluate on empty ensemble");
    const int d = ensemble_.dim;
    if (mode_.kind == EvalMode::Kind::kTree && use_sorted_1d()) {
      symmetric_self_1d(values, gradients);
      return;
    }
    evaluate_batch({ensemble_.points.data(), ensemble_.points.size()}, values,
                   gradients);
  }

  // (1/N) sum_i G_i; equals the estimate's total integral since the kernel
  // has unit mass.
  double total_mass() const {
    const int n = ensemble_.size();
    if (n == 0) throw std::domain_error("total_mass on empty ensemble");
    double s = 0.0;
    for (double w : ensemble_.weights) s += w;
    return s / n;
  }

 private:
  // d = 1 always uses the sorted layout, so a tree query whose window covers
  // every source point reduces to exactly the naive full-range scan.
  bool use_sorted_1d() const { return ensemble_.dim == 1; }
  bool use_kdtree() const {
    return ensemble_.dim > 1 && mode_.kind == EvalMode::Kind::kTree;
  }

  void accumulate_range(const double* q, std::ptrdiff_t begin,
                        std::ptrdiff_t end, double inv_two_eps2, double& value,
                        double* grad) const {
    if (begin >= end) return;
    if (ensemble_.dim == 1) {
      simd::accumulate_1d(coords_[0].data(), weights_.data(), begin, end, q[0],
                          inv_two_eps2, value, grad[0]);
    } else {
      const double* ptrs[16];
      const int d = ensemble_.dim;
      if (d <= 16) {
        for (int l = 0; l < d; ++l) ptrs[l] = coords_[l].data();
        simd::accumulate_nd(ptrs, weights_.data(), d, begin, end, q,
                            inv_two_eps2, value, grad);
      } else {
        std::vector<const double*> hptrs(d);
        for (int l = 0; l < d; ++l) hptrs[l] = coords_[l].data();
        simd::accumulate_nd(hptrs.data(), weights_.data(), d, begin, end, q,
                            inv_two_eps2, value, grad);
      }
    }
  }

  // Scale the raw kernel sums into density units: value *= K(0)-norm / (N
  // eps^d); gradient additionally picks up the 1/eps^2 direction factor.
  void finalize(double raw_value, const double* raw_grad, double* value_out,
                double* grad_out) const {
    const auto& k = ensemble_.kernel;
    const double scale =
        k.norm_const_ * k.inv_eps_d_ / static_cast<double>(ensemble_.size());
    const double gscale = scale * k.inv_eps2_;
    *value_out = raw_value * scale;
    for (int l = 0; l < ensemble_.dim; ++l)
      grad_out[l] = raw_grad[l] * gscale;
  }

  void symmetric_self_1d(std::span<double> values,
                         std::span<double> gradients) const {
    const int n = ensemble_.size();
    const auto& xs = coords_[0];
    const auto& ws = weights_;
    const double inv_two_eps2 = 0.5 * ensemble_.kernel.inv_eps2_;
    const double radius = truncation_radius();
    // Raw sums in sorted order; each i starts from its self term K(0).
    std::vector<double> raw_v(n), raw_g(n, 0.0);
    for (int i = 0; i < n; ++i) raw_v[i] = ws[i];
    std::size_t hi = 0;
    for (int i = 0; i < n; ++i) {
      if (hi < static_cast<std::size_t>(i) + 1) hi = i + 1;
      while (hi < static_cast<std::size_t>(n) && xs[hi] - xs[i] <= radius) ++hi;
      symmetric_block(xs.data(), ws.data(), raw_v.data(), raw_g.data(), i,
                      i + 1, hi, inv_two_eps2);
    }
    for (int i = 0; i < n; ++i) {
      const int orig = order_[i];
      finalize(raw_v[i], &raw_g[i], values.data() + orig,
               gradients.data() + orig);
    }
  }

  // Adds the contributions of sources j in [begin, end) to slot i and the
  // reciprocal contributions of i to every j. Gradient slots hold unscaled
  // direction sums, sign chosen so that grad u at x_i sums e * (x_j - x_i).
  static void symmetric_block(const double* xs, const double* ws,
                              double* raw_v, double* raw_g, int i,
                              std::size_t begin, std::size_t end,
                              double inv_two_eps2) {
    const double xi = xs[i];
    const double wi = ws[i];
    double acc_v = 0.0;
    double acc_g = 0.0;
    std::size_t j = begin;
#if FKP_HAVE_VECTOR_EXT
    {
      using simd::VecD;
      using simd::kWidth;
      if (end - begin >= static_cast<std::size_t>(kWidth)) {
        VecD accv = simd::broadcast(0.0);
        VecD accg = simd::broadcast(0.0);
        const VecD xiv = simd::broadcast(xi);
        const VecD wiv = simd::broadcast(wi);
        const VecD scale = simd::broadcast(-inv_two_eps2);
        for (; j + kWidth <= end; j += kWidth) {
          const VecD dx = simd::load(xs + j) - xiv;  // x_j - x_i
          const VecD e = simd::exp(dx * dx * scale);
          const VecD ej = simd::load(ws + j) * e;
          accv += ej;
          accg += ej * dx;
          const VecD ei = wiv * e;
          simd::store(raw_v + j, simd::load(raw_v + j) + ei);
          simd::store(raw_g + j, simd::load(raw_g + j) - ei * dx);
        }
        acc_v = simd::horizontal_sum(accv);
        acc_g = simd::horizontal_sum(accg);
      }
    }
#endif
    for (; j < end; ++j) {
      const double dx = xs[j] - xi;
      const double e = simd::scalar_exp(-dx * dx * inv_two_eps2);
      acc_v += ws[j] * e;
      acc_g += ws[j] * e * dx;
      raw_v[j] += wi * e;
      raw_g[j] -= wi * e * dx;
    }
    raw_v[i] += acc_v;
    raw_g[i] += acc_g;
  }

  ParticleEnsemble ensemble_;
  EvalMode mode_;
  std::vector<std::vector<double>> coords_;  // sorted/reordered, per axis
  std::vector<double> weights_;              // matching order
  std::vector<int> order_;                   // position -> original index
  detail::KdTree tree_;
};

// Spec-facing free functions.
inline Evaluation evaluate(const DensityEstimate& est,
                           std::span<const double> x) {
  return est.evaluate(x);
}

inline std::vector<Evaluation> evaluate_batch(
    const DensityEstimate& est, std::span<const double> queries) {
  const int d = est.ensemble().dim;
  const std::size_t q_count = queries.size() / d;
  std::vector<double> values(q_count);
  std::vector<double> grads(q_count * d);
  est.evaluate_batch(queries, values, grads);
  std::vector<Evaluation> out(q_count);
  for (std::size_t i = 0; i < q_count; ++i) {
    out[i].value = values[i];
    out[i].gradient.assign(grads.begin() + i * d, grads.begin() + (i + 1) * d);
  }
  return out;
}

inline std::vector<Evaluation> tree_evaluate(const DensityEstimate& est,
                                             std::span<const double> queries) {
  if (est.mode().kind != EvalMode::Kind::kTree)
    throw std::domain_error("tree_evaluate requires tree mode");
  return evaluate_batch(est, queries);
}

inline double total_mass(const DensityEstimate& est) {
  return est.total_mass();
}

}  // namespace fkp
