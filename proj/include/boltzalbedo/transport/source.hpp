#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/vec3.hpp"
#include "boltzalbedo/geometry.hpp"

namespace boltzalbedo {

/// Gaussian bump on R_+ x Gamma_-:
///   g(t, x, v) = A exp(-(t-t0)^2/st^2) exp(-|x-x0|^2/sx^2) exp(-|v-v0|^2/sv^2),
/// zero for t <= 0 and on Gamma_+ and Gamma_0.
///
/// With window > 0 the time profile is replaced by its integral over
/// [t - window, t]; by time invariance the solution for that source at time t
/// equals the time integral of the original solution over the same window.
struct BoundarySource {
  double amplitude = 1.0;
  double t0 = 0.0;
  double sigma_t = 1.0;
  Vec3 x0{};
  double sigma_x = 1.0;
  Vec3 v0{};
  double sigma_v = 1.0;
  double window = 0.0;

  void validate() const {
    if (!(sigma_t > 0.0 && sigma_x > 0.0 && sigma_v > 0.0)) throw DomainError("BoundarySource: widths must be positive");
    if (!std::isfinite(amplitude)) throw DomainError("BoundarySource: amplitude must be finite");
    if (window < 0.0) throw DomainError("BoundarySource: window must be nonnegative");
  }

  BoundarySource scaled(double s) const {
    BoundarySource out = *this;
    out.amplitude *= s;
    return out;
  }

  BoundarySource windowed(double length) const {
    BoundarySource out = *this;
    out.window = length;
    return out;
  }

  double time_profile(double t) const {
    if (t <= 0.0) return 0.0;
    if (window <= 0.0) {
      const double z = (t - t0) / sigma_t;
      return std::exp(-z * z);
    }
    const double lo = std::max(0.0, t - window);
    return 0.5 * std::sqrt(std::numbers::pi) * sigma_t *
           (std::erf((t - t0) / sigma_t) - std::erf((lo - t0) / sigma_t));
  }

  double space_profile(const Vec3& x) const { return std::exp(-norm2(x - x0) / (sigma_x * sigma_x)); }
  double velocity_profile(const Vec3& v) const { return std::exp(-norm2(v - v0) / (sigma_v * sigma_v)); }

  /// Value for (x, v) already known to lie in Gamma_-.
  double incoming(double t, const Vec3& x, const Vec3& v) const {
    if (amplitude == 0.0) return 0.0;
    const double tp = time_profile(t);
    if (tp == 0.0) return 0.0;
    return amplitude * tp * space_profile(x) * velocity_profile(v);
  }

  /// Value at a boundary point; zero unless (x, v) is incoming.
  double operator()(const BallDomain& domain, double t, const Vec3& x, const Vec3& v) const {
    if (classify_boundary(domain, x, v) != BoundaryClass::Incoming) return 0.0;
    return incoming(t, x, v);
  }

  /// int_0^inf of the (unwindowed) time profile.
  double time_mass() const {
    return 0.5 * std::sqrt(std::numbers::pi) * sigma_t * (1.0 + std::erf(t0 / sigma_t));
  }
};

}  // namespace boltzalbedo
