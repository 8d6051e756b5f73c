#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/vec3.hpp"
#include "boltzalbedo/quadrature.hpp"

namespace boltzalbedo {

inline constexpr double kHalfPi = 0.5 * std::numbers::pi;

/// q(theta, rho) = c * rho * cos(theta).
struct HardSphere {
  double c = 1.0;
};

/// q(theta, rho) = rho^gamma * q0(theta), q0 tabulated on a uniform grid over [0, pi/2].
struct SeparablePower {
  double gamma = 0.0;
  std::vector<double> q0;  // q0[k] = q0(k * (pi/2) / (n-1))
  double c_cut = 1.0;
};

/// Grad-cutoff hard-potential collision kernel.
class CollisionKernel {
 public:
  using Form = std::variant<HardSphere, SeparablePower>;

  static constexpr int kDefaultTableSize = 256;

  static CollisionKernel hard_sphere(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("HardSphere: c must be positive");
    return CollisionKernel(HardSphere{c});
  }

  static CollisionKernel separable(double gamma, std::vector<double> q0, double c_cut) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("SeparablePower: gamma must lie in [0, 1]");
    if (!(c_cut > 0.0)) throw DomainError("SeparablePower: cutoff constant must be positive");
    if (q0.size() < 2) throw DomainError("SeparablePower: q0 table needs at least 2 samples");
    const double h = kHalfPi / static_cast<double>(q0.size() - 1);
    for (std::size_t k = 0; k < q0.size(); ++k) {
      const double bound = c_cut * std::cos(k * h);
      if (!std::isfinite(q0[k]) || q0[k] < 0.0 || q0[k] > bound + 1e-12 * c_cut)
        throw DomainError("SeparablePower: q0 violates 0 <= q0(theta) <= C cos(theta) at sample " +
                          std::to_string(k));
    }
    return CollisionKernel(SeparablePower{gamma, std::move(q0), c_cut});
  }

  /// Tabulates an angular profile on the default 256-point grid.
  static CollisionKernel separable(double gamma, const std::function<double(double)>& q0, double c_cut,
                                   int n = kDefaultTableSize) {
    std::vector<double> table(n);
    const double h = kHalfPi / (n - 1);
    for (int k = 0; k < n; ++k) table[k] = q0(k * h);
    // cos(pi/2) evaluates to ~6e-17, not 0; clamp that last sample onto the bound.
    table[n - 1] = std::min(table[n - 1], c_cut * std::max(0.0, std::cos(kHalfPi)));
    return separable(gamma, std::move(table), c_cut);
  }

  static CollisionKernel zero() { return CollisionKernel(SeparablePower{0.0, std::vector<double>(2, 0.0), 1.0}); }

  const Form& form() const { return form_; }
  bool is_hard_sphere() const { return std::holds_alternative<HardSphere>(form_); }

  double gamma() const {
    return std::visit(
        [](const auto& f) {
          if constexpr (std::is_same_v<std::decay_t<decltype(f)>, HardSphere>)
            return 1.0;
          else
            return f.gamma;
        },
        form_);
  }

  bool is_zero() const {
    if (const auto* s = std::get_if<SeparablePower>(&form_))
      return std::all_of(s->q0.begin(), s->q0.end(), [](double x) { return x == 0.0; });
    return false;
  }

  /// Angular profile q0(theta); no range checking.
  double angular(double theta) const {
    if (const auto* h = std::get_if<HardSphere>(&form_)) return h->c * std::cos(theta);
    const auto& s = std::get<SeparablePower>(form_);
    const std::size_t n = s.q0.size();
    const double pos = std::clamp(theta / kHalfPi, 0.0, 1.0) * static_cast<double>(n - 1);
    const std::size_t k = std::min(static_cast<std::size_t>(pos), n - 2);
    const double f = pos - static_cast<double>(k);
    if (n < 4) return (1.0 - f) * s.q0[k] + f * s.q0[k + 1];
    // Four-point Lagrange stencil, shifted inward at the table ends.
    const std::size_t j = std::clamp<std::size_t>(k, 1, n - 3) - 1;
    const double x = pos - static_cast<double>(j);
    const double l0 = -(x - 1) * (x - 2) * (x - 3) / 6.0, l1 = x * (x - 2) * (x - 3) / 2.0;
    const double l2 = -x * (x - 1) * (x - 3) / 2.0, l3 = x * (x - 1) * (x - 2) / 6.0;
    return std::max(0.0, l0 * s.q0[j] + l1 * s.q0[j + 1] + l2 * s.q0[j + 2] + l3 * s.q0[j + 3]);
  }

  /// rho^gamma with the convention 0^0 = 1.
  double radial(double rho) const {
    const double g = gamma();
    if (g == 1.0) return rho;
    if (g == 0.0) return 1.0;
    return std::pow(rho, g);
  }

 private:
  explicit CollisionKernel(Form f) : form_(std::move(f)) {}
  Form form_;
};

/// w(v) = (1 + c|v|^2)^m.
class WeightFunction {
 public:
  explicit WeightFunction(double c = 1.0, double m = 2.0) : c_(c), m_(m) {
    if (!(c > 0.0)) throw DomainError("WeightFunction: c must be positive");
    // w^{-2}(1+|v|)^3 in L^1(R^3) requires 4m - 3 > 3.
    if (!(m > 1.5)) throw DomainError("WeightFunction: integrability requires m > 3/2");
  }
  double c() const { return c_; }
  double m() const { return m_; }
  double operator()(const Vec3& v) const { return std::pow(1.0 + c_ * norm2(v), m_); }

 private:
  double c_;
  double m_;
};

/// q(theta, rho).
inline double eval_q(const CollisionKernel& kernel, double theta, double rho) {
  if (!(theta >= 0.0 && theta <= kHalfPi)) throw DomainError("eval_q: theta outside [0, pi/2]");
  if (!(rho >= 0.0)) throw DomainError("eval_q: rho must be nonnegative");
  return kernel.radial(rho) * kernel.angular(theta);
}

struct CollisionPair {
  Vec3 u;
  Vec3 v;
};

/// Post-collision velocities u' = u - [(u-v).w]w, v' = v + [(u-v).w]w.
inline CollisionPair post_collision(const Vec3& u, const Vec3& v, const Vec3& omega) {
  if (std::abs(norm2(omega) - 1.0) > 2e-12) throw DomainError("post_collision: omega must be a unit vector");
  const double p = dot(u - v, omega);
  return {u - p * omega, v + p * omega};
}

/// Angle theta in [0, pi/2] with cos(theta) = |(v-u).omega| / |v-u|.
inline double collision_angle(const Vec3& relative, const Vec3& omega) {
  const double r = norm(relative);
  if (r == 0.0) return kHalfPi;
  const double c = std::min(1.0, std::abs(dot(relative, omega)) / r);
  return std::acos(c);
}

/// Integral of q0(theta(omega)) over S^2 for a fixed axis; I(r) = r^gamma times this.
inline double sphere_factor(const CollisionKernel& kernel, const SphereQuadrature& squad) {
  if (const auto* h = std::get_if<HardSphere>(&kernel.form())) {
    return squad.integrate_axisymmetric([&](double c) { return h->c * std::abs(c); });
  }
  return squad.integrate_axisymmetric([&](double c) { return kernel.angular(std::acos(std::min(1.0, std::abs(c)))); });
}

/// I(z) = int_{S^2} q(arccos(|z.omega|/|z|), |z|) d omega as a function of r = |z|.
inline double eval_I(const CollisionKernel& kernel, double r, const SphereQuadrature& squad) {
  if (!(r >= 0.0)) throw DomainError("eval_I: r must be nonnegative");
  if (r == 0.0 && kernel.gamma() > 0.0) return 0.0;
  return kernel.radial(r) * sphere_factor(kernel, squad);
}

/// Quadrature for J_gamma(s) = int |w|^gamma exp(-|v - w|^2) dw with s = |v|.
///
/// Polar coordinates are centred on the singularity w = 0 (u = v in the
/// collision-frequency integral) with the polar axis along v. The radial rule
/// is composite Gauss-Legendre graded towards r = 0; the angular rule is
/// composite Gauss-Legendre in cos(alpha) graded towards alpha = 0, where
/// exp(2 r s cos(alpha)) concentrates for large r s.
class CollisionFrequencyRule {
 public:
  explicit CollisionFrequencyRule(int radial_per_panel = 10, int angular_per_panel = 8)
      : radial_per_panel_(radial_per_panel), angular_per_panel_(angular_per_panel) {
    std::vector<double> edges{-1.0, 0.0};
    for (int k = 1; k <= 14; ++k) edges.push_back(1.0 - std::ldexp(1.0, -k));
    edges.push_back(1.0);
    angular_ = composite_gauss_legendre(edges, angular_per_panel);
  }

  int radial_per_panel() const { return radial_per_panel_; }
  int angular_per_panel() const { return angular_per_panel_; }

  double J(double gamma, double s) const {
    const double r_max = s + 7.0;
    std::vector<double> edges{0.0};
    for (double e = std::ldexp(1.0, -8); e < 0.5; e *= 2.0) edges.push_back(e);
    for (double e = 0.5; e < r_max; e += 0.5) edges.push_back(e);
    edges.push_back(r_max);
    const GaussRule radial = composite_gauss_legendre(edges, radial_per_panel_);
    double acc = 0.0;
    for (std::size_t i = 0; i < radial.size(); ++i) {
      const double r = radial.nodes[i];
      const double rg = gamma == 1.0 ? r : (gamma == 0.0 ? 1.0 : std::pow(r, gamma));
      const double base = -(r - s) * (r - s);
      double inner = 0.0;
      for (std::size_t j = 0; j < angular_.size(); ++j) {
        inner += angular_.weights[j] * std::exp(base - 2.0 * r * s * (1.0 - angular_.nodes[j]));
      }
      acc += radial.weights[i] * r * r * rg * inner;
    }
    return 2.0 * std::numbers::pi * acc;
  }

 private:
  int radial_per_panel_;
  int angular_per_panel_;
  GaussRule angular_;
};

/// nu(v) = int int q(theta, |v-u|) mu(u) d omega du = sphere_factor * J_gamma(|v|).
inline double eval_nu(const CollisionKernel& kernel, const Vec3& v, const CollisionFrequencyRule& rule,
                      const SphereQuadrature& squad) {
  if (kernel.is_zero()) return 0.0;
  return sphere_factor(kernel, squad) * rule.J(kernel.gamma(), norm(v));
}

namespace detail {
inline std::pair<Vec3, Vec3> canonical(const Vec3& u, const Vec3& v) {
  return (v < u) ? std::pair{v, u} : std::pair{u, v};
}
}  // namespace detail

/// k1(u, v) = mu^{1/2}(u) mu^{1/2}(v) I(|u - v|).
inline double eval_k1(const CollisionKernel& kernel, const Vec3& u, const Vec3& v, const SphereQuadrature& squad) {
  const auto [a, b] = detail::canonical(u, v);
  return std::exp(-0.5 * (norm2(a) + norm2(b))) * eval_I(kernel, norm(a - b), squad);
}

struct QTildeValue {
  double value = 0.0;
  bool extrapolated = false;
};

inline constexpr double kQTildeThetaMin = 1e-3;

/// qtilde(rho cos theta, rho sin theta) = Btilde(theta, rho) / sin(theta).
/// Below theta_min the symmetrized quotient is held at its theta_min value and flagged.
inline QTildeValue eval_qtilde_flagged(const CollisionKernel& kernel, double a, double b) {
  if (!(a >= 0.0 && b >= 0.0)) throw DomainError("eval_qtilde: arguments must be nonnegative");
  if (a == 0.0 && b == 0.0) throw DomainError("eval_qtilde: (0, 0) is outside the domain");
  const double rho = std::hypot(a, b);
  double theta = std::atan2(b, a);
  QTildeValue out;
  if (theta < kQTildeThetaMin) {
    theta = kQTildeThetaMin;
    out.extrapolated = true;
  }
  const double s = std::sin(theta), c = std::cos(theta);
  const double comp = std::max(0.0, kHalfPi - theta);
  // Btilde / sin = (q(theta) sin(theta) + q(pi/2 - theta) cos(theta)) / (2 sin(theta))
  out.value = 0.5 * (eval_q(kernel, theta, rho) + eval_q(kernel, comp, rho) * c / s);
  return out;
}

inline double eval_qtilde(const CollisionKernel& kernel, double a, double b) {
  return eval_qtilde_flagged(kernel, a, b).value;
}

/// Reference polar rule used by PlanarQuadrature; independent of direction.
class PlanarRule {
 public:
  explicit PlanarRule(int n_radial = 20, int n_azimuth = 32) : n_radial_(n_radial), n_azimuth_(n_azimuth) {
    const GaussRule lag = gauss_laguerre(n_radial);
    const double dphi = 2.0 * std::numbers::pi / n_azimuth;
    for (std::size_t i = 0; i < lag.size(); ++i) {
      const double r = std::sqrt(lag.nodes[i]);
      for (int j = 0; j < n_azimuth; ++j) {
        const double phi = (j + 0.5) * dphi;
        c1_.push_back(r * std::cos(phi));
        c2_.push_back(r * std::sin(phi));
        w_.push_back(0.5 * lag.weights[i] * dphi);
      }
    }
  }
  int n_radial() const { return n_radial_; }
  int n_azimuth() const { return n_azimuth_; }
  std::size_t size() const { return w_.size(); }
  const std::vector<double>& c1() const { return c1_; }
  const std::vector<double>& c2() const { return c2_; }
  const std::vector<double>& weights() const { return w_; }

 private:
  int n_radial_, n_azimuth_;
  std::vector<double> c1_, c2_, w_;
};

/// int_Pi exp(-|y + zeta|^2) qtilde(|eta|, |y|) dPi, Pi = eta^perp.
///
/// Shifting y' = y + zeta_Pi centres the Gaussian so the planar rule integrates
/// it exactly; the out-of-plane part of zeta factors out as exp(-(zeta.eta_hat)^2).
inline double planar_gain_integral(const CollisionKernel& kernel, const Vec3& eta, const Vec3& zeta,
                                   const PlanarRule& rule) {
  const double a = norm(eta);
  if (a == 0.0) throw SingularInputError("planar integral: eta = 0");
  const auto basis = orthonormal_complement(eta);
  const double zn = dot(zeta, eta) / a;
  const double z1 = dot(zeta, basis[0]), z2 = dot(zeta, basis[1]);
  double acc = 0.0;
  const auto& c1 = rule.c1();
  const auto& c2 = rule.c2();
  const auto& w = rule.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double b = std::hypot(c1[i] - z1, c2[i] - z2);
    acc += w[i] * eval_qtilde(kernel, a, b);
  }
  return std::exp(-zn * zn) * acc;
}

/// k2(u, v) = 2/|u-v|^2 exp(-|u-v|^2/4) int_Pi exp(-|y+zeta|^2) qtilde(|u-v|, |y|) dPi.
inline double eval_k2(const CollisionKernel& kernel, const Vec3& u, const Vec3& v, const PlanarRule& rule) {
  const auto [p, q] = detail::canonical(u, v);
  const Vec3 eta = p - q;
  const double e2 = norm2(eta);
  if (e2 == 0.0) throw SingularInputError("eval_k2: u == v (1/|u-v|^2 prefactor)");
  if (kernel.is_zero()) return 0.0;
  const Vec3 zeta = 0.5 * (p + q);
  return 2.0 / e2 * std::exp(-0.25 * e2) * planar_gain_integral(kernel, eta, zeta, rule);
}

/// k = k2 - k1.
inline double eval_scatter_kernel(const CollisionKernel& kernel, const Vec3& u, const Vec3& v,
                                  const SphereQuadrature& squad, const PlanarRule& rule) {
  const double k2 = eval_k2(kernel, u, v, rule);
  return k2 - eval_k1(kernel, u, v, squad);
}

/// ktilde(v, v') = k(v, v') w(v') / w(v): the kernel of wK(./w), input v, output v'.
inline double eval_weighted_kernel(const CollisionKernel& kernel, const WeightFunction& w, const Vec3& v,
                                   const Vec3& vp, const SphereQuadrature& squad, const PlanarRule& rule) {
  return eval_scatter_kernel(kernel, v, vp, squad, rule) * (w(vp) / w(v));
}

/// Bundles a kernel with its quadratures and caches the sphere factor.
class KernelEvaluator {
 public:
  explicit KernelEvaluator(CollisionKernel kernel, SphereQuadrature squad = SphereQuadrature(),
                           PlanarRule planar = PlanarRule(), CollisionFrequencyRule nu_rule = CollisionFrequencyRule())
      : kernel_(std::move(kernel)),
        squad_(std::move(squad)),
        planar_(std::move(planar)),
        nu_rule_(std::move(nu_rule)),
        sphere_factor_(sphere_factor(kernel_, squad_)) {}

  const CollisionKernel& kernel() const { return kernel_; }
  const SphereQuadrature& sphere() const { return squad_; }
  const PlanarRule& planar() const { return planar_; }
  const CollisionFrequencyRule& nu_rule() const { return nu_rule_; }
  double sphere_factor_value() const { return sphere_factor_; }

  double I(double r) const {
    if (r == 0.0 && kernel_.gamma() > 0.0) return 0.0;
    return kernel_.radial(r) * sphere_factor_;
  }
  double nu_of_speed(double s) const {
    if (sphere_factor_ == 0.0) return 0.0;
    return sphere_factor_ * nu_rule_.J(kernel_.gamma(), s);
  }
  double nu(const Vec3& v) const { return nu_of_speed(norm(v)); }
  double k1(const Vec3& u, const Vec3& v) const {
    const auto [a, b] = detail::canonical(u, v);
    return std::exp(-0.5 * (norm2(a) + norm2(b))) * I(norm(a - b));
  }
  double k2(const Vec3& u, const Vec3& v) const { return eval_k2(kernel_, u, v, planar_); }
  double k(const Vec3& u, const Vec3& v) const { return k2(u, v) - k1(u, v); }
  double ktilde(const WeightFunction& w, const Vec3& v, const Vec3& vp) const { return k(v, vp) * (w(vp) / w(v)); }

 private:
  CollisionKernel kernel_;
  SphereQuadrature squad_;
  PlanarRule planar_;
  CollisionFrequencyRule nu_rule_;
  double sphere_factor_;
};

}  // namespace boltzalbedo
