#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "boltzalbedo/albedo.hpp"
#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/parallel.hpp"
#include "boltzalbedo/inverse/deconvolution.hpp"
#include "boltzalbedo/inverse/profile.hpp"
#include "boltzalbedo/kernel.hpp"

namespace boltzalbedo {

struct NuRecovery {
  RadialProfile profile;
  std::size_t used = 0;
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

/// nu(v) = -ln(attenuation) / tau_- per ray, binned by speed with weights tau^2
/// (the variance of the log-ratio estimate scales as 1/tau^2).
inline NuRecovery recover_nu(const std::vector<BallisticRay>& rays, double diameter, int nbins, double v_max) {
  NuRecovery out;
  std::vector<RadialSample> samples;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    const auto& r = rays[i];
    if (!(r.attenuation > 0.0) || !std::isfinite(r.attenuation))
      throw DataError("recover_nu: ray " + std::to_string(i) + " has non-positive attenuation");
    const double speed = norm(r.v);
    if (speed == 0.0) throw DataError("recover_nu: ray " + std::to_string(i) + " has zero velocity");
    if (r.tau < 1e-3 * diameter / speed) {
      ++out.excluded;
      out.warnings.push_back("ray " + std::to_string(i) + " excluded: exit time below 1e-3 diameter/|v|");
      continue;
    }
    samples.push_back({speed, -std::log(r.attenuation) / r.tau, r.tau * r.tau});
    ++out.used;
  }
  out.profile = bin_radial(samples, nbins, v_max);
  return out;
}

struct KernelEntry {
  Vec3 v;   // output velocity
  Vec3 vp;  // input velocity
  double ktilde = 0.0;
  double k = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  int count = 0;
  bool split = false;
};

struct SkippedPair {
  Vec3 v;
  Vec3 vp;
  std::string reason;
};

struct KernelTable {
  std::vector<KernelEntry> entries;
  std::vector<SkippedPair> skipped;
  double asymmetry = 0.0;  // max relative |k(v,v') - k(v',v)| before symmetrisation
};

namespace detail {
using PairKey = std::array<double, 6>;
inline PairKey pair_key(const Vec3& v, const Vec3& vp) { return {v.x, v.y, v.z, vp.x, vp.y, vp.z}; }
}  // namespace detail

/// ktilde(v' -> v) = amplitude exp(nu(v) s + nu(v') tau_in) with nu from the recovered profile.
inline KernelTable recover_ktilde(const std::vector<ScatterRecord>& records, const RadialProfile& nu_hat) {
  const RadialSpline nu(nu_hat);
  KernelTable table;
  std::map<detail::PairKey, std::size_t> index;
  for (const auto& r : records) {
    const double sv = norm(r.v), svp = norm(r.vp);
    if (!nu_hat.covers(sv) || !nu_hat.covers(svp)) {
      table.skipped.push_back({r.v, r.vp, "speed outside the recovered nu range"});
      continue;
    }
    const double exponent = nu(sv) * r.s + nu(svp) * r.tau_in;
    if (exponent > 650.0) {  // amplitude at or near the subnormal range
      table.skipped.push_back({r.v, r.vp, "attenuation outside floating-point range"});
      continue;
    }
    const double value = r.amplitude * std::exp(exponent);
    const auto key = detail::pair_key(r.v, r.vp);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, table.entries.size());
      table.entries.push_back({r.v, r.vp, value, 0.0, 0.0, 0.0, 1, false});
    } else {
      auto& e = table.entries[it->second];
      e.ktilde = (e.ktilde * e.count + value) / (e.count + 1);
      ++e.count;
    }
  }
  return table;
}

/// k(v, v') = ktilde(v' -> v) w(v') / w(v), then symmetrised over both orientations.
inline KernelTable unweight(KernelTable table, const WeightFunction& w) {
  std::map<detail::PairKey, std::size_t> index;
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    auto& e = table.entries[i];
    e.k = e.ktilde * (w(e.vp) / w(e.v));
    index.emplace(detail::pair_key(e.v, e.vp), i);
  }
  table.asymmetry = 0.0;
  std::vector<double> sym(table.entries.size());
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    const auto& e = table.entries[i];
    sym[i] = e.k;
    const auto it = index.find(detail::pair_key(e.vp, e.v));
    if (it == index.end()) continue;
    const double a = e.k, b = table.entries[it->second].k;
    sym[i] = 0.5 * (a + b);
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale > 0.0) table.asymmetry = std::max(table.asymmetry, std::abs(a - b) / scale);
  }
  for (std::size_t i = 0; i < table.entries.size(); ++i) table.entries[i].k = sym[i];
  return table;
}

/// k1(v, v') = mu^{1/2}(v) mu^{1/2}(v') I(|v - v'|) and k2 = k + k1.
inline KernelTable split_k(KernelTable table, const RadialProfile& I_hat) {
  const RadialSpline I(I_hat, false);
  std::vector<KernelEntry> kept;
  for (auto& e : table.entries) {
    const double r = norm(e.v - e.vp);
    if (!I_hat.covers(r)) {
      table.skipped.push_back({e.v, e.vp, "|v - v'| outside the recovered I range"});
      continue;
    }
    e.k1 = std::exp(-0.5 * (norm2(e.v) + norm2(e.vp))) * I(r);
    e.k2 = e.k + e.k1;
    e.split = true;
    kept.push_back(e);
  }
  table.entries = std::move(kept);
  return table;
}

/// D(|zeta_Pi|) samples for one |eta| and the recovered qtilde(|eta|, .) slice.
struct PlanarSlice {
  double eta = 0.0;
  RadialProfile data;
  RadialProfile qtilde;
  std::vector<double> background;
};

/// Groups split entries by |eta| (relative tolerance 1e-9) and converts k2 into
/// planar convolution data: D = k2 |eta|^2 / 2 exp(|eta|^2/4) exp((zeta.eta_hat)^2).
inline std::vector<PlanarSlice> planar_data(const KernelTable& table) {
  std::vector<std::pair<double, std::pair<double, double>>> pts;  // eta, (|zeta_Pi|, D)
  for (const auto& e : table.entries) {
    if (!e.split) continue;
    const Vec3 eta = e.v - e.vp;
    const double a = norm(eta);
    if (a == 0.0) continue;
    const Vec3 zeta = 0.5 * (e.v + e.vp);
    const double zn = dot(zeta, eta) / a;
    const double zp = norm(zeta - (zn / a) * eta);
    pts.push_back({a, {zp, planar_data_from_k2(e.k2, a) * std::exp(zn * zn)}});
  }
  std::sort(pts.begin(), pts.end());
  std::vector<PlanarSlice> slices;
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(y)); };
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t j = i;
    while (j < pts.size() && close(pts[j].first, pts[i].first)) ++j;
    PlanarSlice s;
    s.eta = pts[i].first;
    // |eta| differs across the group in the last bits, so reorder by |zeta_Pi|
    std::vector<std::pair<double, double>> row;
    for (std::size_t m = i; m < j; ++m) row.push_back(pts[m].second);
    std::sort(row.begin(), row.end());
    for (std::size_t m = 0; m < row.size();) {
      std::size_t n = m;
      double sum = 0.0, r = 0.0;
      while (n < row.size() && close(row[n].first, row[m].first)) {
        sum += row[n].second;
        r += row[n].first;
        ++n;
      }
      s.data.radii.push_back(r / (n - m));
      s.data.values.push_back(sum / (n - m));
      m = n;
    }
    slices.push_back(std::move(s));
    i = j;
  }
  return slices;
}

/// Recovered qtilde on slices a = |eta| (sorted) sharing the radii b.
struct QTildeGrid {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<std::vector<double>> values;  // values[i][j] = qtilde(a_i, b_j)
  bool empty() const { return a.empty(); }
};

struct SliceFailure {
  double eta = 0.0;
  std::string reason;
};

/// Deconvolves every slice with the planar route; slices that cannot be inverted are reported.
inline QTildeGrid deconvolve_slices(std::vector<PlanarSlice>& slices, const TikhonovOptions& opt,
                                    std::vector<SliceFailure>* failures = nullptr, int threads = 1) {
  std::vector<std::string> errors(slices.size());
  parallel_for(slices.size(), threads, [&](std::size_t i) {
    try {
      const RadialDeconvolution d = deconvolve_plane_2d(slices[i].data, opt);
      slices[i].qtilde = d.I;
      slices[i].background = d.background;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  QTildeGrid grid;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    if (!errors[i].empty()) {
      if (failures) failures->push_back({slices[i].eta, errors[i]});
      continue;
    }
    if (grid.b.empty()) grid.b = slices[i].qtilde.radii;
    grid.a.push_back(slices[i].eta);
    grid.values.push_back(slices[i].qtilde.values);
  }
  return grid;
}

struct QGrid {
  std::vector<double> theta;
  std::vector<double> rho;
  std::vector<double> values;  // row-major over (theta, rho); NaN where skipped
  std::vector<bool> valid;
  double symB_residual = 0.0;   // max |B(theta, rho) - B(pi/2 - theta, rho)|
  double symB_relative = 0.0;   // symB_residual / sup |B|
  std::size_t skipped = 0;
  double at(std::size_t i, std::size_t j) const { return values[i * rho.size() + j]; }
};

/// qtilde(a, b): cubic spline in b on each slice, linear in a between slices
/// (linear continuation below the first slice, down to a = 0). Returns NaN
/// outside the covered range.
class QTildeInterpolant {
 public:
  explicit QTildeInterpolant(const QTildeGrid& grid) : grid_(grid) {
    for (const auto& row : grid.values) {
      RadialProfile p;
      p.radii = grid.b;
      p.values = row;
      splines_.emplace_back(p, true);
    }
  }
  double operator()(double a, double b) const {
    const auto& A = grid_.a;
    if (A.empty() || grid_.b.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double tol = 1e-12;
    if (b < 0.0 || b > grid_.b.back() * (1.0 + tol) || a < 0.0 || a > A.back() * (1.0 + tol))
      return std::numeric_limits<double>::quiet_NaN();
    if (A.size() == 1) return splines_[0](b);
    std::size_t i = std::upper_bound(A.begin(), A.end(), a) - A.begin();
    i = std::clamp<std::size_t>(i, 1, A.size() - 1);
    const double f = (a - A[i - 1]) / (A[i] - A[i - 1]);
    return (1.0 - f) * splines_[i - 1](b) + f * splines_[i](b);
  }

 private:
  const QTildeGrid& grid_;
  std::vector<RadialSpline> splines_;
};

/// q(theta, rho) = qtilde(rho cos theta, rho sin theta) with the symmetry residual of B = q sin theta.
inline QGrid assemble_q(const QTildeGrid& grid, const std::vector<double>& theta, const std::vector<double>& rho) {
  QGrid out;
  out.theta = theta;
  out.rho = rho;
  out.values.assign(theta.size() * rho.size(), std::numeric_limits<double>::quiet_NaN());
  out.valid.assign(theta.size() * rho.size(), false);
  if (grid.empty()) {
    out.skipped = out.values.size();
    return out;
  }
  const QTildeInterpolant qt(grid);
  auto q_at = [&](double th, double r) { return qt(r * std::cos(th), r * std::sin(th)); };
  double sup_B = 0.0, res = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    for (std::size_t j = 0; j < rho.size(); ++j) {
      const double q = q_at(theta[i], rho[j]);
      if (!std::isfinite(q)) {
        ++out.skipped;
        continue;
      }
      out.values[i * rho.size() + j] = q;
      out.valid[i * rho.size() + j] = true;
      const double B = q * std::sin(theta[i]);
      sup_B = std::max(sup_B, std::abs(B));
      const double th2 = 0.5 * std::numbers::pi - theta[i];
      const double q2 = q_at(th2, rho[j]);
      if (std::isfinite(q2)) res = std::max(res, std::abs(B - q2 * std::sin(th2)));
    }
  }
  out.symB_residual = res;
  out.symB_relative = sup_B > 0.0 ? res / sup_B : 0.0;
  return out;
}

}  // namespace boltzalbedo
