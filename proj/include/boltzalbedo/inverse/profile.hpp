#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "boltzalbedo/core/errors.hpp"

namespace boltzalbedo {

/// Samples of a radial function f(|z|) with an optional per-sample spread.
struct RadialProfile {
  std::vector<double> radii;
  std::vector<double> values;
  std::vector<double> spread;

  std::size_t size() const { return radii.size(); }
  bool empty() const { return radii.empty(); }

  void validate() const {
    if (radii.size() != values.size()) throw DataError("radial profile: radii and values differ in length");
    for (std::size_t i = 0; i < radii.size(); ++i) {
      if (!(radii[i] >= 0.0) || !std::isfinite(values[i])) throw DataError("radial profile: invalid sample");
      if (i > 0 && !(radii[i] > radii[i - 1])) throw DataError("radial profile: radii must increase strictly");
    }
  }

  bool covers(double r) const { return !radii.empty() && r >= 0.0 && r <= radii.back() * (1.0 + 1e-12); }
};

/// Cubic spline through a radial profile. With even = true the samples are
/// mirrored to negative r, so the interpolant is even with zero slope at the
/// origin (smooth radial functions are even in r); the outer ends are natural.
/// Outside the sampled range the end polynomials are continued linearly.
class RadialSpline {
 public:
  RadialSpline() = default;
  explicit RadialSpline(const RadialProfile& p, bool even = true) {
    p.validate();
    if (even) {
      for (std::size_t i = p.size(); i-- > 0;) {
        if (p.radii[i] == 0.0) continue;
        x_.push_back(-p.radii[i]);
        y_.push_back(p.values[i]);
      }
    }
    x_.insert(x_.end(), p.radii.begin(), p.radii.end());
    y_.insert(y_.end(), p.values.begin(), p.values.end());
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    // Tridiagonal system for the second derivatives, natural ends.
    std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      a[i] = h0 / 6.0;
      b[i] = (h0 + h1) / 3.0;
      c[i] = h1 / 6.0;
      d[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    m_[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
  }

  double operator()(double r) const {
    const std::size_t n = x_.size();
    if (n == 0) return 0.0;
    if (n == 1) return y_[0];
    if (r <= x_.front()) return y_.front() + slope(0, x_.front()) * (r - x_.front());
    if (r >= x_.back()) return y_.back() + slope(n - 2, x_.back()) * (r - x_.back());
    const std::size_t i = std::min<std::size_t>(std::upper_bound(x_.begin(), x_.end(), r) - x_.begin() - 1, n - 2);
    return eval(i, r);
  }

 private:
  double eval(std::size_t i, double r) const {
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - r) / h, B = (r - x_[i]) / h;
    return A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
  }
  double slope(std::size_t i, double r) const {
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - r) / h, B = (r - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * A * A) * m_[i] + (3.0 * B * B - 1.0) * m_[i + 1]) * h / 6.0;
  }

  std::vector<double> x_, y_, m_;
};

struct RadialSample {
  double r = 0.0;
  double value = 0.0;
  double weight = 1.0;  // inverse-variance weight
};

/// Averages samples into nbins uniform bins over [0, r_max]; empty bins are dropped.
/// The bin radius is the weighted mean of its sample radii; spread is max - min of the values.
inline RadialProfile bin_radial(const std::vector<RadialSample>& samples, int nbins, double r_max) {
  if (nbins < 1 || !(r_max > 0.0)) throw ConfigurationError("binning: need nbins >= 1 and r_max > 0");
  std::vector<double> sw(nbins, 0.0), swr(nbins, 0.0), swv(nbins, 0.0), lo(nbins, INFINITY), hi(nbins, -INFINITY);
  for (const auto& s : samples) {
    if (!(s.r >= 0.0) || s.r > r_max * (1.0 + 1e-12)) continue;
    const int b = std::min(nbins - 1, static_cast<int>(s.r / r_max * nbins));
    sw[b] += s.weight;
    swr[b] += s.weight * s.r;
    swv[b] += s.weight * s.value;
    lo[b] = std::min(lo[b], s.value);
    hi[b] = std::max(hi[b], s.value);
  }
  RadialProfile p;
  for (int b = 0; b < nbins; ++b) {
    if (!(sw[b] > 0.0)) continue;
    p.radii.push_back(swr[b] / sw[b]);
    p.values.push_back(swv[b] / sw[b]);
    p.spread.push_back(hi[b] - lo[b]);
  }
  return p;
}

}  // namespace boltzalbedo
