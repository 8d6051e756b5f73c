#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/inverse/profile.hpp"
#include "boltzalbedo/kernel.hpp"

namespace boltzalbedo {

enum class DeconvolutionMethod { ParametricFit, FourierTikhonov };

inline std::string to_string(DeconvolutionMethod m) {
  return m == DeconvolutionMethod::ParametricFit ? "parametric_fit" : "fourier_tikhonov";
}

/// Parameters of I(r) = 2 pi c r^gamma; c is the sphere factor over 2 pi.
struct FitResult {
  double c = 0.0;
  double gamma = 0.0;           // raw minimiser
  double gamma_reported = 0.0;  // clamped to [0, 1]
  bool out_of_range = false;
  double residual = 0.0;        // relative l2 misfit of nu
  DeconvolutionMethod method = DeconvolutionMethod::ParametricFit;
  std::vector<double> residual_trace;
};

struct TikhonovOptions {
  double lambda = 1e-6;   // relative to the symbol's maximum
  double r_out = 0.0;     // output range; 0 means twice the data range
  int n_out = 161;
  double tail_fraction = 0.25;  // share of samples used for the background fit
};

struct RadialDeconvolution {
  RadialProfile I;
  std::optional<FitResult> fit;
  std::vector<double> background;  // 3D: (a0, a1) of a0 + a1 r; 2D: constant
};

/// J_1(s) = int |u| exp(-|v - u|^2) du, |v| = s, in closed form.
inline double gaussian_first_moment(double s) {
  const double sp = std::sqrt(std::numbers::pi);
  if (s < 1e-6) return 2.0 * std::numbers::pi * (1.0 + s * s / 3.0);
  return std::pow(std::numbers::pi, 1.5) * (std::exp(-s * s) / sp + (s + 0.5 / s) * std::erf(s));
}

namespace detail {

// Output radii shared by the Fourier routes.
inline std::vector<double> output_radii(const RadialProfile& data, const TikhonovOptions& opt) {
  const double r_out = opt.r_out > 0.0 ? opt.r_out : 2.0 * data.radii.back();
  std::vector<double> r(opt.n_out);
  for (int i = 0; i < opt.n_out; ++i) r[i] = r_out * i / (opt.n_out - 1);
  return r;
}

// Indices of the tail samples.
inline std::size_t tail_start(const RadialProfile& p, double fraction) {
  const std::size_t n = p.size();
  const std::size_t m = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(fraction * n)));
  return n - std::min(m, n);
}

// Radial Fourier pair in dimension 3 or 2 with a Tikhonov-filtered division by
// the Gaussian symbol S(k) = pi^{d/2} exp(-k^2/4). f is given on [0, s_max]
// and taken as zero beyond.
inline std::vector<double> radial_gaussian_deconvolve(const RadialSpline& f, double s_max, double data_scale, int dim,
                                                      double lambda, const std::vector<double>& r_out) {
  const double pi = std::numbers::pi;
  const double s0 = dim == 3 ? std::pow(pi, 1.5) : pi;
  const bool plain = lambda == 0.0;
  const double k_max = 2.0 * std::sqrt((plain ? std::log(1e16) : std::log(1.0 / lambda)) + 37.0);
  const int n_k = 600;
  const double dk = k_max / n_k;
  const double h_target = std::min(s_max / 1000.0, pi / (8.0 * k_max));
  const int n_s = std::max(2, static_cast<int>(std::ceil(s_max / h_target)));
  const double h = s_max / n_s;
  std::vector<double> fs(n_s + 1), ss(n_s + 1);
  for (int j = 0; j <= n_s; ++j) {
    ss[j] = j * h;
    fs[j] = f(ss[j]);
  }
  auto kernel = [dim](double x) {
    if (dim == 3) return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
    return std::cyl_bessel_j(0.0, x);
  };
  // measure factors: 3D 4 pi s^2 ds / (2 pi^2) k^2 dk; 2D 2 pi s ds / (2 pi) k dk
  auto fwd_w = [&](double s) { return dim == 3 ? 4.0 * pi * s * s : 2.0 * pi * s; };
  auto inv_w = [&](double k) { return dim == 3 ? k * k / (2.0 * pi * pi) : k / (2.0 * pi); };
  std::vector<double> G(n_k + 1, 0.0);
  int k_cut = n_k;
  for (int m = 0; m <= n_k; ++m) {
    const double k = m * dk;
    double F = 0.0;
    for (int j = 0; j <= n_s; ++j) F += (j == 0 || j == n_s ? 0.5 : 1.0) * fwd_w(ss[j]) * fs[j] * kernel(k * ss[j]);
    F *= h;
    // Euler-Maclaurin end correction: in 2D the integrand s f(s) J0 has slope 2 pi f(0) at s = 0
    if (dim == 2) F += h * h / 12.0 * 2.0 * pi * fs[0];
    const double S = s0 * std::exp(-0.25 * k * k);
    if (plain) {
      if (std::abs(F) < 1e-12 * data_scale) {
        k_cut = m;
        break;
      }
      G[m] = F / S;
    } else {
      G[m] = F * S / (S * S + lambda * s0 * s0);
    }
  }
  if (plain) {
    double peak = 0.0;
    for (int m = 0; m < k_cut; ++m) peak = std::max(peak, std::abs(G[m]));
    if (k_cut == n_k || !std::isfinite(peak) || peak > 1e8 * std::max(std::abs(G[0]), 1e-300))
      throw DataError("deconvolution: unregularised division overflows on this data (use lambda > 0)");
  }
  std::vector<double> out(r_out.size(), 0.0);
  for (std::size_t i = 0; i < r_out.size(); ++i) {
    double acc = 0.0;
    for (int m = 0; m <= k_cut && m <= n_k; ++m)
      acc += (m == 0 || m == std::min(k_cut, n_k) ? 0.5 : 1.0) * inv_w(m * dk) * G[m] * kernel(m * dk * r_out[i]);
    out[i] = acc * dk;
    if (dim == 2) out[i] += dk * dk / 12.0 * G[0] / (2.0 * pi);
  }
  return out;
}

inline bool all_zero(const RadialProfile& p) {
  return std::all_of(p.values.begin(), p.values.end(), [](double v) { return v == 0.0; });
}

}  // namespace detail

/// Least-squares fit of nu(s) = 2 pi c J_gamma(s) over gamma in [-0.5, 1.5].
/// c is eliminated in closed form; gamma by golden-section search.
inline FitResult parametric_fit(const RadialProfile& nu, const CollisionFrequencyRule& rule = CollisionFrequencyRule()) {
  nu.validate();
  FitResult fit;
  fit.method = DeconvolutionMethod::ParametricFit;
  if (detail::all_zero(nu)) return fit;
  double norm_data = 0.0;
  for (double v : nu.values) norm_data += v * v;
  auto misfit = [&](double gamma, double* c_out) {
    double smm = 0.0, snm = 0.0;
    std::vector<double> m(nu.size());
    for (std::size_t i = 0; i < nu.size(); ++i) {
      m[i] = 2.0 * std::numbers::pi * rule.J(gamma, nu.radii[i]);
      smm += m[i] * m[i];
      snm += nu.values[i] * m[i];
    }
    const double c = snm / smm;
    double res = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i) res += (nu.values[i] - c * m[i]) * (nu.values[i] - c * m[i]);
    if (c_out) *c_out = c;
    return std::sqrt(res / norm_data);
  };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  const double tol = 1e-8;
  double a = -0.5, b = 1.5;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = misfit(x1, nullptr), f2 = misfit(x2, nullptr);
  while (b - a > tol) {
    if (!std::isfinite(f1) || !std::isfinite(f2)) throw NonconvergenceError("parametric fit: non-finite misfit", fit.residual_trace);
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = misfit(x1, nullptr);
      fit.residual_trace.push_back(f1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = misfit(x2, nullptr);
      fit.residual_trace.push_back(f2);
    }
  }
  fit.gamma = 0.5 * (a + b);
  fit.residual = misfit(fit.gamma, &fit.c);
  if (!std::isfinite(fit.residual) || !std::isfinite(fit.c))
    throw NonconvergenceError("parametric fit: non-finite result", fit.residual_trace);
  fit.gamma_reported = std::clamp(fit.gamma, 0.0, 1.0);
  fit.out_of_range = std::abs(fit.gamma - fit.gamma_reported) > tol;
  return fit;
}

/// Recovers I from nu = I * mu in three dimensions.
///
/// parametric_fit: I = 2 pi c r^gamma from the fitted family.
/// fourier_tikhonov: a background a0 + a1 r (whose convolution is a0 pi^{3/2} +
/// a1 J_1) is fitted to the tail of the data and inverted exactly; the decaying
/// remainder is divided by the Gaussian symbol in the radial Fourier domain
/// with Tikhonov filtering.
inline RadialDeconvolution deconvolve_radial_3d(const RadialProfile& nu, DeconvolutionMethod method,
                                                const TikhonovOptions& opt = {},
                                                const CollisionFrequencyRule& rule = CollisionFrequencyRule()) {
  nu.validate();
  if (nu.size() < 8) throw DataError("deconvolve_radial_3d: need at least 8 speeds");
  if (opt.n_out < 2) throw ConfigurationError("deconvolve_radial_3d: need at least two output radii");
  if (opt.lambda < 0.0) throw ConfigurationError("deconvolve_radial_3d: lambda must be nonnegative");
  RadialDeconvolution out;
  out.I.radii = detail::output_radii(nu, opt);
  out.I.values.assign(out.I.radii.size(), 0.0);
  if (method == DeconvolutionMethod::ParametricFit) {
    const FitResult fit = parametric_fit(nu, rule);
    for (std::size_t i = 0; i < out.I.radii.size(); ++i) {
      const double r = out.I.radii[i];
      out.I.values[i] = fit.c == 0.0 || (r == 0.0 && fit.gamma > 0.0) ? 0.0 : 2.0 * std::numbers::pi * fit.c * std::pow(r, fit.gamma);
    }
    out.fit = fit;
    return out;
  }
  if (detail::all_zero(nu)) {
    out.background = {0.0, 0.0};
    return out;
  }
  const double p32 = std::pow(std::numbers::pi, 1.5);
  const std::size_t t0 = detail::tail_start(nu, opt.tail_fraction);
  Eigen::MatrixXd A(nu.size() - t0, 2);
  Eigen::VectorXd y(nu.size() - t0);
  for (std::size_t i = t0; i < nu.size(); ++i) {
    A(i - t0, 0) = p32;
    A(i - t0, 1) = gaussian_first_moment(nu.radii[i]);
    y(i - t0) = nu.values[i];
  }
  const Eigen::Vector2d ab = A.colPivHouseholderQr().solve(y);
  out.background = {ab(0), ab(1)};
  RadialProfile rest = nu;
  double scale = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    rest.values[i] -= ab(0) * p32 + ab(1) * gaussian_first_moment(nu.radii[i]);
    scale = std::max(scale, std::abs(nu.values[i]));
  }
  const RadialSpline spline(rest);
  const std::vector<double> res =
      detail::radial_gaussian_deconvolve(spline, nu.radii.back(), scale, 3, opt.lambda, out.I.radii);
  for (std::size_t i = 0; i < out.I.radii.size(); ++i) out.I.values[i] = ab(0) + ab(1) * out.I.radii[i] + res[i];
  return out;
}

/// Recovers qtilde(|eta|, r) from samples of D(|zeta|) = int_Pi exp(-|y + zeta|^2) qtilde(|eta|, |y|) dy.
/// A constant background (the tail mean) is inverted exactly; the remainder
/// goes through the 2D radial Fourier route.
inline RadialDeconvolution deconvolve_plane_2d(const RadialProfile& D, const TikhonovOptions& opt = {}) {
  D.validate();
  if (D.size() < 8) throw DataError("deconvolve_plane_2d: need at least 8 distinct |zeta| values");
  if (opt.n_out < 2) throw ConfigurationError("deconvolve_plane_2d: need at least two output radii");
  if (opt.lambda < 0.0) throw ConfigurationError("deconvolve_plane_2d: lambda must be nonnegative");
  RadialDeconvolution out;
  out.I.radii = detail::output_radii(D, opt);
  out.I.values.assign(out.I.radii.size(), 0.0);
  if (detail::all_zero(D)) {
    out.background = {0.0};
    return out;
  }
  const std::size_t t0 = detail::tail_start(D, opt.tail_fraction);
  double bg = 0.0, scale = 0.0;
  for (std::size_t i = t0; i < D.size(); ++i) bg += D.values[i];
  bg /= static_cast<double>(D.size() - t0);
  out.background = {bg / std::numbers::pi};
  RadialProfile rest = D;
  for (std::size_t i = 0; i < D.size(); ++i) {
    rest.values[i] -= bg;
    scale = std::max(scale, std::abs(D.values[i]));
  }
  const RadialSpline spline(rest);
  const std::vector<double> res = detail::radial_gaussian_deconvolve(spline, D.radii.back(), scale, 2, opt.lambda, out.I.radii);
  for (std::size_t i = 0; i < out.I.radii.size(); ++i) out.I.values[i] = bg / std::numbers::pi + res[i];
  return out;
}

/// Removes the prefactor 2/|eta|^2 exp(-|eta|^2/4) from a k2 sample.
inline double planar_data_from_k2(double k2, double eta) {
  if (!(eta > 0.0)) throw DomainError("planar deconvolution: |eta| must be positive");
  return k2 * eta * eta * 0.5 * std::exp(0.25 * eta * eta);
}

}  // namespace boltzalbedo
