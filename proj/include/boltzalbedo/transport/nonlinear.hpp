#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/parallel.hpp"
#include "boltzalbedo/kernel.hpp"
#include "boltzalbedo/transport/field.hpp"
#include "boltzalbedo/transport/linear.hpp"

namespace boltzalbedo {

/// Dense bilinear form of the weighted collision term on a velocity set:
///   Gamma~(f1, f2)(v) = w(v) mu^{1/2}(v) sum_{a,b} T[v][a][b] psi1(a) psi2(b),
///   psi = f / (w mu^{1/2}),
/// where T[v] collects int int q(theta, |v-u|) [psi1(u') psi2(v') - psi1(u) psi2(v)] mu(u) dw du
/// with Gauss-Hermite nodes in u, a product sphere rule in omega and trilinear
/// interpolation of psi off the node set (clamped to the axis range).
class GammaTensor {
 public:
  GammaTensor(const CollisionKernel& kernel, const WeightFunction& w, const VelocityGrid& vg, int u_order = 8,
              int sphere_polar = 8, int sphere_azimuth = 16, int threads = 1)
      : nv_(vg.size()), zero_(kernel.is_zero()) {
    prefactor_.resize(nv_);
    inv_scale_.resize(nv_);
    for (std::size_t i = 0; i < nv_; ++i) {
      const Vec3& v = vg.node(i);
      const double s = w(v) * std::exp(-0.5 * norm2(v));
      prefactor_[i] = s;
      inv_scale_[i] = 1.0 / s;
    }
    if (zero_) return;
    T_.assign(nv_ * nv_ * nv_, 0.0);
    const VelocityQuadrature uq(u_order);
    const SphereQuadrature sq(sphere_polar, sphere_azimuth);
    std::vector<Stencil> u_stencils(uq.size());
    for (std::size_t k = 0; k < uq.size(); ++k) u_stencils[k] = vg.stencil(uq.nodes()[k]);
    parallel_for(nv_, threads, [&](std::size_t vi) {
      const Vec3& v = vg.node(vi);
      double* Tv = &T_[vi * nv_ * nv_];
      for (std::size_t k = 0; k < uq.size(); ++k) {
        const Vec3& u = uq.nodes()[k];
        const Vec3 rel = v - u;
        const double r = norm(rel);
        if (r == 0.0 && kernel.gamma() > 0.0) continue;
        const Stencil& su = u_stencils[k];
        for (std::size_t l = 0; l < sq.size(); ++l) {
          const Vec3& om = sq.nodes()[l];
          const double q = eval_q(kernel, collision_angle(rel, om), r);
          if (q == 0.0) continue;
          const double c = uq.weights()[k] * sq.weights()[l] * q;
          const CollisionPair pc = post_collision(u, v, om);
          const Stencil sa = vg.stencil(pc.u), sb = vg.stencil(pc.v);
          for (int ia = 0; ia < sa.count; ++ia)
            for (int ib = 0; ib < sb.count; ++ib)
              Tv[static_cast<std::size_t>(sa.index[ia]) * nv_ + sb.index[ib]] += c * sa.weight[ia] * sb.weight[ib];
          for (int ia = 0; ia < su.count; ++ia) Tv[static_cast<std::size_t>(su.index[ia]) * nv_ + vi] -= c * su.weight[ia];
        }
      }
    });
  }

  std::size_t size() const { return nv_; }
  bool is_zero() const { return zero_; }

  /// Output over velocity nodes for one spatial point.
  void apply(const double* f1, const double* f2, double* out) const {
    if (zero_) {
      std::fill(out, out + nv_, 0.0);
      return;
    }
    std::vector<double> p1(nv_), p2(nv_);
    for (std::size_t a = 0; a < nv_; ++a) {
      p1[a] = f1[a] * inv_scale_[a];
      p2[a] = f2[a] * inv_scale_[a];
    }
    for (std::size_t v = 0; v < nv_; ++v) {
      const double* Tv = &T_[v * nv_ * nv_];
      double acc = 0.0;
      for (std::size_t a = 0; a < nv_; ++a) {
        if (p1[a] == 0.0) continue;
        double inner = 0.0;
        const double* row = Tv + a * nv_;
        for (std::size_t b = 0; b < nv_; ++b) inner += row[b] * p2[b];
        acc += p1[a] * inner;
      }
      out[v] = prefactor_[v] * acc;
    }
  }

 private:
  std::size_t nv_;
  bool zero_;
  std::vector<double> T_;
  std::vector<double> prefactor_;
  std::vector<double> inv_scale_;
};

inline PhaseSpaceField eval_Gamma(const PhaseSpaceField& f1, const PhaseSpaceField& f2, const GammaTensor& T,
                                  int threads = 1) {
  if (!f1.same_grid(f2)) throw ConfigurationError("eval_Gamma: fields live on different grids");
  if (T.size() != f1.nv()) throw ConfigurationError("eval_Gamma: tensor does not match velocity set");
  PhaseSpaceField out(f1.grid(), f1.time());
  const std::size_t nv = f1.nv();
  parallel_for(f1.nx(), threads, [&](std::size_t xi) {
    T.apply(&f1.values()[xi * nv], &f2.values()[xi * nv], &out.values()[xi * nv]);
  });
  return out;
}

struct NonlinearSolution {
  std::vector<double> times;
  FieldSeries fields;
  std::vector<double> history;  // sup-norm of successive iterate differences
  double contraction = 0.0;     // last ratio history[p] / history[p-1]
};

/// Picard iteration f^{(p+1)} = solve_linear(eps g) + Duhamel[Gamma~(f^{(p)}, f^{(p)})].
inline NonlinearSolution solve_nonlinear(const BoundarySource& source, const SolverConfig& cfg,
                                         const TransportOperators& ops, const GammaTensor& T) {
  const LinearSolution lin = solve_linear(source.scaled(cfg.epsilon), cfg, ops);
  NonlinearSolution out;
  out.times = lin.times;
  out.fields = lin.total;
  const FieldSeries& base = lin.total;
  if (T.is_zero()) return out;
  for (int p = 0; p < cfg.picard_iters; ++p) {
    FieldSeries S;
    S.reserve(out.fields.size());
    for (const auto& f : out.fields) S.push_back(eval_Gamma(f, f, T, ops.threads));
    FieldSeries next = sum_series(base, propagate_source(S, cfg, ops));
    double diff = 0.0, mag = 0.0;
    for (std::size_t n = 0; n < next.size(); ++n)
      for (std::size_t i = 0; i < next[n].values().size(); ++i) {
        diff = std::max(diff, std::abs(next[n].values()[i] - out.fields[n].values()[i]));
        mag = std::max(mag, std::abs(next[n].values()[i]));
      }
    out.fields = std::move(next);
    out.history.push_back(diff);
    const std::size_t h = out.history.size();
    if (h >= 2 && out.history[h - 2] > 0.0) out.contraction = diff / out.history[h - 2];
    if (!std::isfinite(diff) ||
        (h >= 3 && out.history[h - 1] > out.history[h - 2] && out.history[h - 2] > out.history[h - 3]))
      throw NonconvergenceError("Picard iteration diverged", out.history);
    if (diff < 1e-10 * std::max(1.0, mag)) break;
  }
  return out;
}

struct GapTable {
  std::vector<double> epsilon;
  std::vector<double> gap;
  double slope = std::numeric_limits<double>::quiet_NaN();
};

/// gap(eps) = max over nodes and output times of |f~_eps / eps - h|, plus the log-log slope.
inline GapTable linearization_gap(const BoundarySource& source, const std::vector<double>& eps_list,
                                  const SolverConfig& cfg, const TransportOperators& ops, const GammaTensor& T) {
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw ConfigurationError("epsilon list must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ConfigurationError("epsilon list must be decreasing");
  }
  const LinearSolution h = solve_linear(source, cfg, ops);
  GapTable table;
  for (double eps : eps_list) {
    SolverConfig c = cfg;
    c.epsilon = eps;
    const NonlinearSolution f = solve_nonlinear(source, c, ops, T);
    double gap = 0.0;
    for (std::size_t n = 0; n < f.fields.size(); ++n) {
      const auto& a = f.fields[n].values();
      const auto& b = h.total[n].values();
      for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a[i] / eps - b[i]));
    }
    table.epsilon.push_back(eps);
    table.gap.push_back(gap);
  }
  // Least-squares slope of log(gap) against log(eps).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < table.gap.size(); ++i) {
    if (!(table.gap[i] > 0.0)) continue;
    const double x = std::log(table.epsilon[i]), y = std::log(table.gap[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n >= 2) table.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return table;
}

}  // namespace boltzalbedo
