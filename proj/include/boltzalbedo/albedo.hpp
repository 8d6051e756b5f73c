#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/vec3.hpp"
#include "boltzalbedo/geometry.hpp"
#include "boltzalbedo/transport/linear.hpp"
#include "boltzalbedo/transport/ray.hpp"

namespace boltzalbedo {

struct AlbedoSample {
  double t = 0.0;
  Vec3 x;
  Vec3 v;
  double value = 0.0;
};

struct TraceQuery {
  double t = 0.0;
  Vec3 x;
  Vec3 v;
};

namespace detail {
inline std::size_t require_node(const VelocityGrid& vg, const Vec3& v, const char* who) {
  const std::size_t k = vg.nearest(v);
  if (norm(vg.node(k) - v) > 1e-12 * std::max(1.0, norm(v)))
    throw DomainError(std::string(who) + ": velocity is not a node of the velocity set");
  return k;
}

inline void require_outgoing(const BallDomain& domain, const Vec3& x, const Vec3& v, const char* who) {
  const BoundaryClass c = classify_boundary(domain, x, v);
  if (c != BoundaryClass::Outgoing)
    throw DomainError(std::string(who) + ": sample (x, v) is " + to_string(c) + ", not outgoing");
}
}  // namespace detail

/// Outgoing trace of a grid solution at boundary points.
///
/// The ballistic part is evaluated exactly on the characteristic. The scattered
/// part is read from the lattice at x - delta v/|v| and time t - delta/|v|
/// (delta = dx/2, one-sided, away from the boundary mask) and carried to the
/// boundary with the factor exp(-nu delta/|v|).
inline std::vector<AlbedoSample> outgoing_trace(const LinearSolution& sol, const BoundarySource& source,
                                                const TransportOperators& ops, const std::vector<TraceQuery>& queries) {
  const auto& g = *ops.grid;
  const double dt = sol.times.size() > 1 ? sol.times[1] - sol.times[0] : 0.0;
  const double horizon = sol.times.empty() ? 0.0 : sol.times.back();
  const double delta = 0.5 * g.space.dx();
  std::vector<AlbedoSample> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    detail::require_outgoing(g.domain, q.x, q.v, "outgoing_trace");
    if (q.t < 0.0 || q.t > horizon * (1.0 + 1e-12)) throw DomainError("outgoing_trace: sample time outside horizon");
    const std::size_t k = detail::require_node(g.velocity, q.v, "outgoing_trace");
    double value = gminus_value(source, g.domain, q.t, q.x, q.v, ops.nu[k]);
    if (!sol.scattered.empty() && dt > 0.0) {
      const double speed = norm(q.v);
      const double lag = delta / speed;
      const double ts = q.t - lag;
      if (ts > 0.0) {
        const Vec3 p = q.x - delta * (q.v / speed);
        const double pos = ts / dt;
        const std::size_t n0 = std::min(static_cast<std::size_t>(pos), sol.scattered.size() - 1);
        const std::size_t n1 = std::min(n0 + 1, sol.scattered.size() - 1);
        const double f = n1 == n0 ? 0.0 : pos - static_cast<double>(n0);
        const double a = sol.scattered[n0].interpolate(p, k), b = sol.scattered[n1].interpolate(p, k);
        value += std::exp(-ops.nu[k] * lag) * ((1.0 - f) * a + f * b);
      }
    }
    out.push_back({q.t, q.x, q.v, value});
  }
  return out;
}

struct BallisticCoefficient {
  double attenuation = 1.0;
  Vec3 footpoint;
  double tau = 0.0;
};

/// exp(-nu(v) tau_-(x, v)): the coefficient of the ballistic delta chain.
inline BallisticCoefficient ballistic_coefficient(const BallDomain& domain, const Vec3& x, const Vec3& v, double nu) {
  detail::require_outgoing(domain, x, v, "ballistic_coefficient");
  const BackwardTrace tr = trace_backward(domain, x, v);
  if (classify_boundary(domain, tr.footpoint, v) != BoundaryClass::Incoming)
    throw DomainError("ballistic_coefficient: footpoint is grazing");
  return {std::exp(-nu * tr.tau), tr.footpoint, tr.tau};
}

struct ScatterVertex {
  double s = 0.0;           // x - s v is the vertex
  Vec3 vertex;
  double tau_in = 0.0;      // tau_-(vertex, v')
  Vec3 footpoint;           // vertex - tau_in v'
  double amplitude = 0.0;   // exp(-nu(v) s) exp(-nu(v') tau_in) ktilde(v' -> v)
  double dphi = 0.0;        // d/ds [s + tau_-(x - s v, v')]
  double foot_speed = 0.0;  // |d footpoint / ds|
};

struct SingleScatter {
  std::vector<ScatterVertex> vertices;  // empty: no vertex for this lag
  bool has_vertex() const { return !vertices.empty(); }
};

/// Vertices x - s v, s in [0, tau_-(x, v)], solving s + tau_-(x - s v, v') = lag.
///
/// The constraint map is scanned and bracketed roots refined by bisection; it
/// need not be monotone, so every root is returned. ktilde is the kernel of the
/// weighted operator with input v' and output v.
inline SingleScatter single_scatter_value(const BallDomain& domain, const Vec3& x, const Vec3& v, const Vec3& vp,
                                          double lag, double nu_v, double nu_vp, double ktilde) {
  if (v == vp) throw DomainError("single_scatter_value: v must differ from v'");
  detail::require_outgoing(domain, x, v, "single_scatter_value");
  const double L = exit_time(domain, x, v, Direction::Backward);
  auto tau_in = [&](double s) { return exit_time(domain, x - s * v, vp, Direction::Backward); };
  auto phi = [&](double s) { return s + tau_in(std::clamp(s, 0.0, L)) - lag; };
  SingleScatter out;
  const int scan = 400;
  double s_prev = 0.0, f_prev = phi(0.0);
  auto refine = [&](double a, double b, double fa) {
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, L); ++it) {
      const double m = 0.5 * (a + b);
      const double fm = phi(m);
      if ((fm < 0.0) == (fa < 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    return 0.5 * (a + b);
  };
  std::vector<double> roots;
  if (f_prev == 0.0) roots.push_back(0.0);
  for (int i = 1; i <= scan; ++i) {
    const double s = L * i / scan;
    const double f = phi(s);
    if (f == 0.0) {
      roots.push_back(s);
    } else if ((f < 0.0) != (f_prev < 0.0) && f_prev != 0.0) {
      roots.push_back(refine(s_prev, s, f_prev));
    }
    s_prev = s;
    f_prev = f;
  }
  const double h = 1e-6 * L;
  for (double s : roots) {
    ScatterVertex vx;
    vx.s = s;
    vx.vertex = x - s * v;
    vx.tau_in = tau_in(s);
    vx.footpoint = vx.vertex - vx.tau_in * vp;
    if (classify_boundary(domain, vx.footpoint, vp) != BoundaryClass::Incoming) continue;
    const double a = std::max(0.0, s - h), b = std::min(L, s + h);
    vx.dphi = (phi(b) - phi(a)) / (b - a);
    const Vec3 fa = (x - a * v) - tau_in(a) * vp, fb = (x - b * v) - tau_in(b) * vp;
    vx.foot_speed = norm(fb - fa) / (b - a);
    vx.amplitude = std::exp(-nu_v * s) * std::exp(-nu_vp * vx.tau_in) * ktilde;
    out.vertices.push_back(vx);
  }
  return out;
}

/// Width sequences and normalisations of the limiting probes.
struct ProbeSpec {
  std::vector<double> nu_widths{0.2, 0.1, 0.05};
  std::vector<std::pair<double, double>> ktilde_widths{{0.2, 0.2}, {0.1, 0.1}, {0.05, 0.05}};
  double window_multiplier = 6.0;
  double velocity_width_scale = 1e-3;  // sigma_v = eps * scale; far below node spacing, a node delta

  void validate() const {
    auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
    if (nu_widths.size() < 2 || ktilde_widths.size() < 2) throw ConfigurationError("probe: need at least two widths");
    for (double e : nu_widths)
      if (!positive(e)) throw ConfigurationError("probe: widths must be positive");
    for (auto [a, b] : ktilde_widths)
      if (!positive(a) || !positive(b)) throw ConfigurationError("probe: widths must be positive");
    if (!positive(window_multiplier) || !positive(velocity_width_scale))
      throw ConfigurationError("probe: window and velocity scale must be positive");
  }
};

struct ProbeResult {
  std::vector<double> widths;
  std::vector<double> estimates;
  double extrapolated = 0.0;
  double normalization_error = 0.0;  // |quadrature mass - 1| of the probe bump
};

namespace detail {

// First-order Richardson step on the last two estimates.
inline double richardson(const std::vector<double>& eps, const std::vector<double>& est) {
  const std::size_t n = est.size();
  const double e1 = eps[n - 2], e2 = eps[n - 1];
  return (e1 * est[n - 1] - e2 * est[n - 2]) / (e1 - e2);
}

inline void check_sequence(const std::vector<double>& est, const char* who) {
  double scale = 0.0;
  for (double e : est) scale = std::max(scale, std::abs(e));
  for (std::size_t i = 2; i < est.size(); ++i) {
    const double d1 = std::abs(est[i - 1] - est[i - 2]), d2 = std::abs(est[i] - est[i - 1]);
    if (d2 > d1 + 1e-6 * scale) throw NonconvergenceError(std::string(who) + ": estimates do not settle", est);
  }
}

// Unit-mass check of the Gaussian time profile on a fine trapezoid grid.
inline double time_mass_error(double sigma_t, double t0) {
  const int n = 4000;
  const double lo = std::max(0.0, t0 - 10.0 * sigma_t), hi = t0 + 10.0 * sigma_t;
  const double h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = (lo + i * h - t0) / sigma_t;
    acc += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(-z * z);
  }
  return std::abs(acc * h / (std::sqrt(std::numbers::pi) * sigma_t) - 1.0);
}

}  // namespace detail

/// Limiting probe for exp(-nu(v) tau_-(x, v)).
///
/// For each width eps the source is a bump of spatial width eps R centred at
/// the footpoint, temporal width eps R/|v| with unit time mass, and a node delta
/// at v. The outgoing trace at (x, v) is integrated over a window of
/// window_multiplier sigma_t around the ballistic arrival; scattered
/// contributions shrink with the spatial support of the bump.
inline ProbeResult probe_nu(const TransportOperators& ops, const Vec3& x, const Vec3& v, const ProbeSpec& spec = {},
                            int order = 2) {
  spec.validate();
  const auto& g = *ops.grid;
  const std::size_t k = detail::require_node(g.velocity, v, "probe_nu");
  const BallisticCoefficient bc = ballistic_coefficient(g.domain, x, v, ops.nu[k]);
  const double R = g.domain.radius(), speed = norm(v);
  ProbeResult out;
  for (double eps : spec.nu_widths) {
    BoundarySource src;
    src.sigma_x = eps * R;
    src.sigma_t = eps * R / speed;
    src.t0 = 6.0 * src.sigma_t;
    src.x0 = bc.footpoint;
    src.v0 = v;
    src.sigma_v = eps * spec.velocity_width_scale;
    src.amplitude = 1.0 / (std::sqrt(std::numbers::pi) * src.sigma_t);
    const double half = 0.5 * spec.window_multiplier * src.sigma_t;
    const double t_end = src.t0 + bc.tau + half;
    const RayEvaluator ray(ops, src.windowed(2.0 * half));
    const double captured = std::erf(half / src.sigma_t);
    out.widths.push_back(eps);
    out.estimates.push_back(ray.evaluate(t_end, x, k, order).total() / captured);
    out.normalization_error = std::max(out.normalization_error, detail::time_mass_error(src.sigma_t, src.t0));
  }
  detail::check_sequence(out.estimates, "probe_nu");
  out.extrapolated = detail::richardson(out.widths, out.estimates);
  return out;
}

/// Limiting probe for ktilde(v' -> v) at the vertex x - s v.
///
/// The source sits at the single-scatter pre-image (footpoint of the vertex
/// along v', emission time t0) with velocity mass 1 concentrated on the node
/// v', spatial width eps1 R and temporal width eps1 R/|v'| with unit time mass.
/// The outgoing trace at (x, v) at the single-scatter arrival time, times the
/// Gaussian-averaged Jacobian sqrt(phi'^2 + (|x'_s| sigma_t / sigma_x)^2) and
/// divided by the two attenuation factors, estimates ktilde.
inline ProbeResult probe_ktilde(const TransportOperators& ops, const Vec3& x, double s, const Vec3& v, const Vec3& vp,
                                const ProbeSpec& spec = {}, int order = 2) {
  spec.validate();
  if (v == vp) throw DomainError("probe_ktilde: v must differ from v'");
  // v - v' along a lattice axis puts a line of nodes in the plane of v and v'; double scattering
  // through them stays singular as the probe narrows.
  if ((v.x == vp.x) + (v.y == vp.y) + (v.z == vp.z) >= 2)
    throw DomainError("probe_ktilde: v - v' is parallel to a velocity lattice axis");
  const auto& g = *ops.grid;
  const std::size_t k = detail::require_node(g.velocity, v, "probe_ktilde");
  const std::size_t kp = detail::require_node(g.velocity, vp, "probe_ktilde");
  detail::require_outgoing(g.domain, x, v, "probe_ktilde");
  const double L = exit_time(g.domain, x, v, Direction::Backward);
  if (!(s > 0.0 && s < L)) throw DomainError("probe_ktilde: no scattering vertex for this s");
  const Vec3 y = x - s * v;
  const double tau_in = exit_time(g.domain, y, vp, Direction::Backward);
  const double lag = s + tau_in;
  const SingleScatter ss = single_scatter_value(g.domain, x, v, vp, lag, ops.nu[k], ops.nu[kp], 1.0);
  const ScatterVertex* vx = nullptr;
  for (const auto& c : ss.vertices)
    if (!vx || std::abs(c.s - s) < std::abs(vx->s - s)) vx = &c;
  if (!vx || std::abs(vx->s - s) > 1e-9 * L) throw DomainError("probe_ktilde: no scattering vertex for this s");
  const double W = g.velocity.lebesgue_weights()[kp];
  const double R = g.domain.radius();
  ProbeResult out;
  for (auto [e1, e2] : spec.ktilde_widths) {
    BoundarySource src;
    src.sigma_x = e1 * R;
    src.sigma_t = e1 * R / norm(vp);
    src.t0 = 6.0 * src.sigma_t;
    src.x0 = vx->footpoint;
    src.v0 = vp;
    src.sigma_v = e2 * spec.velocity_width_scale;
    src.amplitude = 1.0 / (std::sqrt(std::numbers::pi) * src.sigma_t * W);
    const RayEvaluator ray(ops, src);
    const double m = ray.evaluate(src.t0 + lag, x, k, order).total();
    const double ratio = vx->foot_speed * src.sigma_t / src.sigma_x;
    const double jac = std::sqrt(vx->dphi * vx->dphi + ratio * ratio);
    out.widths.push_back(e1);
    out.estimates.push_back(m * jac / vx->amplitude);
    out.normalization_error = std::max(out.normalization_error, detail::time_mass_error(src.sigma_t, src.t0));
  }
  detail::check_sequence(out.estimates, "probe_ktilde");
  out.extrapolated = detail::richardson(out.widths, out.estimates);
  return out;
}

struct BallisticRay {
  Vec3 x;
  Vec3 v;
  double attenuation = 1.0;
  double tau = 0.0;
  Vec3 footpoint;
};

struct ScatterRecord {
  Vec3 x;
  Vec3 v;        // measured (output) velocity
  Vec3 vp;       // source (input) velocity
  double lag = 0.0;
  double s = 0.0;
  double tau_in = 0.0;
  double amplitude = 0.0;
  double dphi = 0.0;
};

struct ResidualRecord {
  double t = 0.0;
  Vec3 x;
  Vec3 v;
  double total = 0.0;
  double residual = 0.0;  // contribution beyond single scattering
};

/// Ballistic attenuations, single-scatter amplitudes and multiple-scatter residuals.
struct SingularDecomposition {
  std::vector<BallisticRay> ballistic;
  std::vector<ScatterRecord> single_scatter;
  std::vector<ResidualRecord> residual;
};

}  // namespace boltzalbedo
