#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/vec3.hpp"

namespace boltzalbedo {

/// One-dimensional Gauss rule: nodes and positive weights.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

// Jacobi-matrix description of an orthonormal polynomial family:
//   b_{k+1} p_{k+1}(x) = (x - a_k) p_k(x) - b_k p_{k-1}(x),  p_0 = 1/sqrt(mu0).
template <class A, class B>
GaussRule golub_welsch_newton(int n, double mu0, A&& a, B&& b) {
  if (n < 1) throw DomainError("Gauss rule order must be >= 1");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    jac(k, k) = a(k);
    if (k + 1 < n) jac(k, k + 1) = jac(k + 1, k) = b(k + 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac, Eigen::EigenvaluesOnly);
  std::vector<double> x(eig.eigenvalues().data(), eig.eigenvalues().data() + n);

  // Newton polish on p_n plus Christoffel-function weights; both stay accurate
  // where eigenvector-based weights lose relative precision (tails of Hermite).
  const double p0 = 1.0 / std::sqrt(mu0);
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double xi = x[i];
    for (int it = 0; it < 8; ++it) {
      double pm1 = 0.0, p = p0, dpm1 = 0.0, dp = 0.0;
      for (int k = 0; k < n; ++k) {
        const double bk1 = b(k + 1);
        const double bk = k > 0 ? b(k) : 0.0;
        const double pn = ((xi - a(k)) * p - bk * pm1) / bk1;
        const double dpn = (p + (xi - a(k)) * dp - bk * dpm1) / bk1;
        pm1 = p;
        p = pn;
        dpm1 = dp;
        dp = dpn;
      }
      const double step = p / dp;
      xi -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(xi))) break;
    }
    double pm1 = 0.0, p = p0, sum = p0 * p0;
    for (int k = 0; k + 1 < n; ++k) {
      const double bk = k > 0 ? b(k) : 0.0;
      const double pn = ((xi - a(k)) * p - bk * pm1) / b(k + 1);
      pm1 = p;
      p = pn;
      sum += p * p;
    }
    rule.nodes[i] = xi;
    rule.weights[i] = 1.0 / sum;
  }
  return rule;
}

}  // namespace detail

/// Gauss-Legendre on [-1, 1].
inline GaussRule gauss_legendre(int n) {
  return detail::golub_welsch_newton(
      n, 2.0, [](int) { return 0.0; },
      [](int k) {
        const double kk = k;
        return kk / std::sqrt(4.0 * kk * kk - 1.0);
      });
}

/// Gauss-Legendre mapped to [lo, hi].
inline GaussRule gauss_legendre(int n, double lo, double hi) {
  GaussRule r = gauss_legendre(n);
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.nodes[i] = mid + half * r.nodes[i];
    r.weights[i] *= half;
  }
  return r;
}

/// Gauss-Hermite for the weight exp(-x^2) on the real line.
inline GaussRule gauss_hermite(int n) {
  return detail::golub_welsch_newton(
      n, std::sqrt(std::numbers::pi), [](int) { return 0.0; },
      [](int k) { return std::sqrt(0.5 * k); });
}

/// Gauss-Laguerre for the weight exp(-t) on [0, inf).
inline GaussRule gauss_laguerre(int n) {
  return detail::golub_welsch_newton(
      n, 1.0, [](int k) { return 2.0 * k + 1.0; }, [](int k) { return static_cast<double>(k); });
}

/// Quadrature on the unit sphere S^2.
///
/// Polar direction: Gauss-Legendre in cos(theta) applied separately on each
/// hemisphere, so no node sits on the equator and integrands with a |cos|
/// kink (every collision-kernel integral here) stay polynomial per panel.
/// Azimuth: uniform midpoint rule.
class SphereQuadrature {
 public:
  explicit SphereQuadrature(int n_polar = 32, int n_azimuth = 64) : n_polar_(n_polar), n_azimuth_(n_azimuth) {
    if (n_polar < 2 || n_polar % 2 != 0) throw DomainError("SphereQuadrature: n_polar must be even and >= 2");
    if (n_azimuth < 1) throw DomainError("SphereQuadrature: n_azimuth must be >= 1");
    const GaussRule upper = gauss_legendre(n_polar / 2, 0.0, 1.0);
    for (std::size_t i = 0; i < upper.size(); ++i) {
      polar_.nodes.push_back(-upper.nodes[upper.size() - 1 - i]);
      polar_.weights.push_back(upper.weights[upper.size() - 1 - i]);
    }
    for (std::size_t i = 0; i < upper.size(); ++i) {
      polar_.nodes.push_back(upper.nodes[i]);
      polar_.weights.push_back(upper.weights[i]);
    }
    const double dphi = 2.0 * std::numbers::pi / n_azimuth;
    for (std::size_t i = 0; i < polar_.size(); ++i) {
      const double c = polar_.nodes[i];
      const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      for (int j = 0; j < n_azimuth; ++j) {
        const double phi = (j + 0.5) * dphi;
        nodes_.push_back({s * std::cos(phi), s * std::sin(phi), c});
        weights_.push_back(polar_.weights[i] * dphi);
      }
    }
  }

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }
  int n_polar() const { return n_polar_; }
  int n_azimuth() const { return n_azimuth_; }

  /// Rule for axisymmetric integrands: int_{S^2} f(omega . e) d omega = 2 pi sum_i w_i f(c_i).
  const GaussRule& polar_rule() const { return polar_; }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) acc += weights_[i] * f(nodes_[i]);
    return acc;
  }

  template <class F>
  double integrate_axisymmetric(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < polar_.size(); ++i) acc += polar_.weights[i] * f(polar_.nodes[i]);
    return 2.0 * std::numbers::pi * acc;
  }

 private:
  int n_polar_;
  int n_azimuth_;
  GaussRule polar_;
  std::vector<Vec3> nodes_;
  std::vector<double> weights_;
};

/// Tensor Gauss-Hermite rule in R^3: sum_i w_i phi(u_i) ~ int phi(u) exp(-|u|^2) du.
class VelocityQuadrature {
 public:
  explicit VelocityQuadrature(int order = 20) : order_(order) {
    const GaussRule gh = gauss_hermite(order);
    std::vector<double> lebesgue_1d(gh.size());
    for (std::size_t i = 0; i < gh.size(); ++i) lebesgue_1d[i] = gh.weights[i] * std::exp(gh.nodes[i] * gh.nodes[i]);
    for (std::size_t i = 0; i < gh.size(); ++i)
      for (std::size_t j = 0; j < gh.size(); ++j)
        for (std::size_t k = 0; k < gh.size(); ++k) {
          nodes_.push_back({gh.nodes[i], gh.nodes[j], gh.nodes[k]});
          weights_.push_back(gh.weights[i] * gh.weights[j] * gh.weights[k]);
          lebesgue_.push_back(lebesgue_1d[i] * lebesgue_1d[j] * lebesgue_1d[k]);
        }
  }

  int order() const { return order_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Vec3>& nodes() const { return nodes_; }
  /// Weights calibrated against exp(-|u|^2) du.
  const std::vector<double>& weights() const { return weights_; }
  /// Weights for plain Lebesgue du: weights()[i] * exp(|u_i|^2), formed per axis.
  const std::vector<double>& lebesgue_weights() const { return lebesgue_; }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) acc += weights_[i] * f(nodes_[i]);
    return acc;
  }

 private:
  int order_;
  std::vector<Vec3> nodes_;
  std::vector<double> weights_;
  std::vector<double> lebesgue_;
};

/// Polar rule on the plane Pi = {y : y . eta = 0} for int_Pi exp(-|y|^2) F(y) dPi.
///
/// Radial nodes come from Gauss-Laguerre in t = r^2, so the Gaussian weight is
/// integrated exactly; azimuth is the uniform (spectrally accurate) midpoint rule.
class PlanarQuadrature {
 public:
  PlanarQuadrature(const Vec3& eta, int n_radial = 20, int n_azimuth = 32) {
    if (norm2(eta) == 0.0) throw DomainError("PlanarQuadrature: eta must be nonzero");
    if (n_radial < 1 || n_azimuth < 1) throw DomainError("PlanarQuadrature: orders must be positive");
    normal_ = normalized(eta);
    basis_ = orthonormal_complement(eta);
    const GaussRule lag = gauss_laguerre(n_radial);
    const double dphi = 2.0 * std::numbers::pi / n_azimuth;
    for (std::size_t i = 0; i < lag.size(); ++i) {
      const double r = std::sqrt(lag.nodes[i]);
      for (int j = 0; j < n_azimuth; ++j) {
        const double phi = (j + 0.5) * dphi;
        const double c1 = r * std::cos(phi), c2 = r * std::sin(phi);
        radii_.push_back(r);
        nodes_.push_back(c1 * basis_[0] + c2 * basis_[1]);
        weights_.push_back(0.5 * lag.weights[i] * dphi);
      }
    }
  }

  const Vec3& normal() const { return normal_; }
  const std::array<Vec3, 2>& basis() const { return basis_; }
  const std::vector<Vec3>& nodes() const { return nodes_; }
  const std::vector<double>& radii() const { return radii_; }
  /// Weights for the Gaussian-weighted measure exp(-|y|^2) dPi.
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  Vec3 normal_;
  std::array<Vec3, 2> basis_;
  std::vector<Vec3> nodes_;
  std::vector<double> radii_;
  std::vector<double> weights_;
};

/// Composite Gauss-Legendre over consecutive panels [edges[k], edges[k+1]].
inline GaussRule composite_gauss_legendre(const std::vector<double>& edges, int per_panel) {
  GaussRule out;
  const GaussRule ref = gauss_legendre(per_panel);
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double lo = edges[k], hi = edges[k + 1];
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      out.nodes.push_back(mid + half * ref.nodes[i]);
      out.weights.push_back(half * ref.weights[i]);
    }
  }
  return out;
}

}  // namespace boltzalbedo
