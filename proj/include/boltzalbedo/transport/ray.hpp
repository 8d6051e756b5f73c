#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/parallel.hpp"
#include "boltzalbedo/geometry.hpp"
#include "boltzalbedo/transport/linear.hpp"
#include "boltzalbedo/transport/operators.hpp"
#include "boltzalbedo/transport/source.hpp"

namespace boltzalbedo {

struct RayValue {
  double h0 = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
  double total() const { return h0 + h1 + h2; }
};

/// Pointwise evaluation of the truncated Duhamel series (N <= 2) along backward
/// characteristics, for sources concentrated in velocity and space.
///
/// Only velocity nodes where the source is non-negligible are kept. Each
/// characteristic integral is restricted to the stretch where it can meet the
/// source support: a tube of radius 7 sigma_x around the line through x0
/// along the source velocity for h1, and the slab spanned by that line and
/// the intermediate velocity for h2. The trapezoid step resolves sigma_x and
/// sigma_t along the path.
class RayEvaluator {
 public:
  static constexpr double kTubeWidths = 7.0;

  RayEvaluator(const TransportOperators& ops, BoundarySource source) : ops_(ops), source_(std::move(source)) {
    ops_.validate();
    source_.validate();
    const auto& vg = ops_.grid->velocity;
    double peak = 0.0;
    for (std::size_t j = 0; j < vg.size(); ++j) peak = std::max(peak, source_.velocity_profile(vg.node(j)));
    for (std::size_t j = 0; j < vg.size(); ++j)
      if (peak > 0.0 && source_.velocity_profile(vg.node(j)) > 1e-14 * peak) support_.push_back(j);
    radius_ = kTubeWidths * source_.sigma_x;
  }

  const std::vector<std::size_t>& support() const { return support_; }
  const BoundarySource& source() const { return source_; }

  double h0(double t, const Vec3& x, std::size_t vi) const {
    return gminus_value(source_, ops_.grid->domain, t, x, ops_.grid->velocity.node(vi), ops_.nu[vi]);
  }

  /// int_0^{min(t, tau_-)} e^{-nu_i s} (K h0)(t - s, y - s v_i, v_i) ds.
  double h1(double t, const Vec3& y, std::size_t vi) const {
    if (!ops_.K || t <= 0.0) return 0.0;
    const auto& vg = ops_.grid->velocity;
    const Vec3& v = vg.node(vi);
    const double L = std::min(t, exit_time(ops_.grid->domain, y, v, Direction::Backward));
    double acc = 0.0;
    for (std::size_t j : support_) {
      if (j == vi) continue;
      const double m = ops_.K->row(j, 1)[vi];
      if (m == 0.0) continue;
      double lo = 0.0, hi = L;
      if (!tube_interval(y, v, vg.node(j), lo, hi)) continue;
      const double ds = step(v, vg.node(j));
      acc += m * trapezoid(lo, hi, ds, [&](double s) { return std::exp(-ops_.nu[vi] * s) * h0(t - s, y - s * v, j); });
    }
    return acc;
  }

  /// h0 + h1 + h2 at (t, x, v_k), truncated at the given order.
  RayValue evaluate(double t, const Vec3& x, std::size_t k, int order = 2) const {
    RayValue out;
    out.h0 = h0(t, x, k);
    if (order >= 1) out.h1 = h1(t, x, k);
    if (order >= 2) out.h2 = h2(t, x, k);
    return out;
  }

 private:
  double h2(double t, const Vec3& x, std::size_t k) const {
    if (!ops_.K || t <= 0.0) return 0.0;
    const auto& vg = ops_.grid->velocity;
    const Vec3& vk = vg.node(k);
    const double L = std::min(t, exit_time(ops_.grid->domain, x, vk, Direction::Backward));
    const std::vector<double>& col = ops_.K->column(k, ops_.threads);
    for (std::size_t j : support_) ops_.K->row(j, ops_.threads);
    std::vector<double> part(vg.size(), 0.0);
    parallel_for(vg.size(), ops_.threads, [&](std::size_t i) {
      if (i == k || col[i] == 0.0) return;
      const Vec3& vi = vg.node(i);
      double lo = 0.0, hi = L;
      double ds = step(vk, vi);
      bool any = false;
      double ilo = hi, ihi = lo;
      for (std::size_t j : support_) {
        double a = 0.0, b = L;
        if (!slab_interval(x, vk, vi, vg.node(j), a, b)) continue;
        any = true;
        ilo = std::min(ilo, a);
        ihi = std::max(ihi, b);
        ds = std::min(ds, step(vk, vg.node(j)));
      }
      if (!any) return;
      lo = ilo;
      hi = ihi;
      part[i] = col[i] * trapezoid(lo, hi, ds, [&](double s) {
                  return std::exp(-ops_.nu[k] * s) * h1(t - s, x - s * vk, i);
                });
    });
    double acc = 0.0;
    for (double p : part) acc += p;
    return acc;
  }

  // Step that resolves the source's spatial and temporal widths along a path with velocity v
  // meeting a source beam with velocity vs.
  double step(const Vec3& v, const Vec3& vs) const {
    const double sv = norm(v), ss = norm(vs);
    const double by_space = source_.sigma_x / (2.0 * (sv + ss));
    const double by_time = source_.sigma_t / (2.0 * (1.0 + sv / std::max(ss, 1e-300)));
    const double by_grid = ops_.grid->space.dx() / std::max(sv, 1e-300);
    return std::min({by_space, by_time, by_grid});
  }

  // s-range where y - s v lies within the source tube around x0 + lambda vs; clipped to [lo, hi].
  bool tube_interval(const Vec3& y, const Vec3& v, const Vec3& vs, double& lo, double& hi) const {
    const Vec3 e = normalized(vs);
    const Vec3 d = y - source_.x0;
    const Vec3 a = d - dot(d, e) * e;
    const Vec3 b = v - dot(v, e) * e;
    const double bb = norm2(b), r2 = radius_ * radius_;
    if (bb < 1e-24 * norm2(v)) {
      if (norm2(a) > r2) return false;
    } else {
      const double ab = dot(a, b);
      const double disc = ab * ab - bb * (norm2(a) - r2);
      if (disc < 0.0) return false;
      const double sq = std::sqrt(disc);
      lo = std::max(lo, (ab - sq) / bb);
      hi = std::min(hi, (ab + sq) / bb);
    }
    return hi > lo;
  }

  // s-range where x - s v lies within radius_ of the plane through x0 spanned by vs and vi.
  bool slab_interval(const Vec3& x, const Vec3& v, const Vec3& vi, const Vec3& vs, double& lo, double& hi) const {
    Vec3 n = cross(vs, vi);
    const double nn = norm(n);
    if (nn < 1e-12 * norm(vs) * norm(vi)) return tube_interval(x, v, vs, lo, hi);
    n = n / nn;
    const double c = dot(n, x - source_.x0), w = dot(n, v);
    if (std::abs(w) < 1e-300) {
      if (std::abs(c) > radius_) return false;
    } else {
      const double s1 = (c - radius_) / w, s2 = (c + radius_) / w;
      lo = std::max(lo, std::min(s1, s2));
      hi = std::min(hi, std::max(s1, s2));
    }
    return hi > lo;
  }

  template <class F>
  static double trapezoid(double lo, double hi, double ds, F&& f) {
    const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / ds)));
    const double h = (hi - lo) / n;
    double acc = 0.5 * (f(lo) + f(hi));
    for (int i = 1; i < n; ++i) acc += f(lo + i * h);
    return acc * h;
  }

  TransportOperators ops_;
  BoundarySource source_;
  std::vector<std::size_t> support_;
  double radius_ = 0.0;
};

}  // namespace boltzalbedo
