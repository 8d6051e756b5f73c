#pragma once

#include <algorithm>
#include <cmath>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/vec3.hpp"

namespace boltzalbedo {

enum class BoundaryClass { Incoming, Outgoing, Grazing };

enum class Direction { Backward, Forward };

inline const char* to_string(BoundaryClass c) {
  switch (c) {
    case BoundaryClass::Incoming: return "incoming";
    case BoundaryClass::Outgoing: return "outgoing";
    default: return "grazing";
  }
}

/// Ball {x : |x - center| < R}.
class BallDomain {
 public:
  static constexpr double kBoundaryTol = 1e-9;

  BallDomain(Vec3 center, double radius) : center_(center), radius_(radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("BallDomain: radius must be positive");
  }

  const Vec3& center() const { return center_; }
  double radius() const { return radius_; }
  double diameter() const { return 2.0 * radius_; }

  bool contains(const Vec3& x) const { return norm2(x - center_) < radius_ * radius_; }
  bool in_closure(const Vec3& x) const { return norm(x - center_) <= radius_ * (1.0 + kBoundaryTol) + kBoundaryTol; }
  bool on_boundary(const Vec3& x) const { return std::abs(norm(x - center_) - radius_) <= kBoundaryTol; }

  /// Outer unit normal at a boundary point.
  Vec3 normal(const Vec3& x) const { return (x - center_) / radius_; }

  /// Chord of the line x + t v: roots t_lo <= t_hi of |x + t v - c| = R, if any.
  bool chord(const Vec3& x, const Vec3& v, double& t_lo, double& t_hi) const {
    const Vec3 d = x - center_;
    const double a = norm2(v);
    const double b = dot(d, v);
    const double c = norm2(d) - radius_ * radius_;
    const double disc = b * b - a * c;
    if (disc < 0.0) return false;
    const double sq = std::sqrt(disc);
    // Cancellation-free pair of roots.
    const double qq = b >= 0.0 ? -(b + sq) : -(b - sq);
    if (qq == 0.0) {
      t_lo = t_hi = 0.0;
      return true;
    }
    const double r1 = qq / a, r2 = c / qq;
    t_lo = std::min(r1, r2);
    t_hi = std::max(r1, r2);
    return true;
  }

 private:
  Vec3 center_;
  double radius_;
};

/// Backward: tau_-(x, v) = sup{t >= 0 : x - t v in Omega}; forward: the same along +v.
inline double exit_time(const BallDomain& domain, const Vec3& x, const Vec3& v, Direction direction) {
  if (norm2(v) == 0.0) throw DomainError("exit_time: v must be nonzero");
  if (!domain.in_closure(x)) throw DomainError("exit_time: x lies outside the closed domain");
  const Vec3 dir = direction == Direction::Backward ? -v : v;
  double lo = 0.0, hi = 0.0;
  if (!domain.chord(x, dir, lo, hi)) return 0.0;
  return std::max(0.0, hi);
}

/// Outgoing if n.v > eps, Incoming if n.v < -eps, else Grazing; eps = 1e-8 |v|.
inline BoundaryClass classify_boundary(const BallDomain& domain, const Vec3& x, const Vec3& v) {
  if (!domain.on_boundary(x)) throw DomainError("classify_boundary: x is not on the boundary");
  const double nv = dot(domain.normal(x), v);
  const double eps = 1e-8 * norm(v);
  if (nv > eps) return BoundaryClass::Outgoing;
  if (nv < -eps) return BoundaryClass::Incoming;
  return BoundaryClass::Grazing;
}

struct BackwardTrace {
  Vec3 footpoint;
  double tau = 0.0;
};

inline BackwardTrace trace_backward(const BallDomain& domain, const Vec3& x, const Vec3& v) {
  const double tau = exit_time(domain, x, v, Direction::Backward);
  return {x - tau * v, tau};
}

}  // namespace boltzalbedo
