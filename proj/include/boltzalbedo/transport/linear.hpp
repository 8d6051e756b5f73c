#pragma once

#include <cmath>
#include <vector>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/parallel.hpp"
#include "boltzalbedo/geometry.hpp"
#include "boltzalbedo/transport/field.hpp"
#include "boltzalbedo/transport/operators.hpp"
#include "boltzalbedo/transport/source.hpp"

namespace boltzalbedo {

struct SolverConfig {
  double dt = 0.1;
  double horizon = 1.0;
  int duhamel_order = 2;
  int picard_iters = 8;
  double epsilon = 0.05;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigurationError("solver.dt must be positive");
    if (!(horizon > 0.0)) throw ConfigurationError("solver.horizon must be positive");
    if (duhamel_order < 0) throw ConfigurationError("solver.duhamel_order must be >= 0");
    if (picard_iters < 1) throw ConfigurationError("solver.picard_iters must be >= 1");
    if (!(epsilon >= 0.0)) throw ConfigurationError("solver.epsilon must be nonnegative");
  }
  int steps() const { return static_cast<int>(std::llround(horizon / dt)); }
};

/// U1(t) h0 = 1_{t <= tau_-} exp(-nu t) h0(x - t v, v).
inline PhaseSpaceField apply_U1(const PhaseSpaceField& field, double t, const std::vector<double>& nu) {
  if (t < 0.0) throw DomainError("apply_U1: t must be nonnegative");
  const auto& g = *field.grid();
  if (nu.size() != g.nv()) throw ConfigurationError("apply_U1: nu table does not match velocity set");
  PhaseSpaceField out(field.grid(), field.time() + t);
  if (t == 0.0) {
    out.values() = field.values();
    return out;
  }
  for (std::size_t xi = 0; xi < g.nx(); ++xi) {
    const Vec3& x = g.space.point(xi);
    for (std::size_t vi = 0; vi < g.nv(); ++vi) {
      const Vec3& v = g.velocity.node(vi);
      if (t > exit_time(g.domain, x, v, Direction::Backward)) continue;
      out.at(xi, vi) = std::exp(-nu[vi] * t) * field.interpolate(x - t * v, vi);
    }
  }
  return out;
}

/// G_-(t) g = exp(-nu tau_-) g(t - tau_-, x - tau_- v, v), evaluated on the characteristic.
inline double gminus_value(const BoundarySource& source, const BallDomain& domain, double t, const Vec3& x,
                           const Vec3& v, double nu) {
  if (source.amplitude == 0.0) return 0.0;
  const BackwardTrace tr = trace_backward(domain, x, v);
  const double ts = t - tr.tau;
  if (ts <= 0.0) return 0.0;
  if (classify_boundary(domain, tr.footpoint, v) != BoundaryClass::Incoming) return 0.0;
  return std::exp(-nu * tr.tau) * source.incoming(ts, tr.footpoint, v);
}

inline PhaseSpaceField apply_Gminus(const BoundarySource& source, double t, const TransportOperators& ops) {
  if (t < 0.0) throw DomainError("apply_Gminus: t must be nonnegative");
  const auto& g = *ops.grid;
  PhaseSpaceField out(ops.grid, t);
  parallel_for(g.nx(), ops.threads, [&](std::size_t xi) {
    for (std::size_t vi = 0; vi < g.nv(); ++vi)
      out.at(xi, vi) = gminus_value(source, g.domain, t, g.space.point(xi), g.velocity.node(vi), ops.nu[vi]);
  });
  return out;
}

/// (K h)(x, v') = sum_i W_i ktilde(v_i -> v') h(x, v_i).
inline PhaseSpaceField apply_K(const PhaseSpaceField& field, const ScatteringMatrix* K, int threads = 1) {
  PhaseSpaceField out(field.grid(), field.time());
  if (!K) return out;
  const std::size_t nv = field.nv();
  if (K->size() != nv) throw ConfigurationError("apply_K: kernel matrix does not match velocity set");
  if (K->materialized()) {
    const auto& M = K->dense();
    parallel_for(field.nx(), threads, [&](std::size_t xi) {
      for (std::size_t i = 0; i < nv; ++i) {
        const double h = field.at(xi, i);
        if (h == 0.0) continue;
        for (std::size_t j = 0; j < nv; ++j) out.at(xi, j) += M[i * nv + j] * h;
      }
    });
    return out;
  }
  // Lazy matrix: fetch each needed row once (cached), then sweep the nodes.
  std::vector<const std::vector<double>*> rows(nv, nullptr);
  for (std::size_t i = 0; i < nv; ++i)
    for (std::size_t xi = 0; xi < field.nx(); ++xi)
      if (field.at(xi, i) != 0.0) {
        rows[i] = &K->row(i, threads);
        break;
      }
  parallel_for(field.nx(), threads, [&](std::size_t xi) {
    for (std::size_t i = 0; i < nv; ++i) {
      const double h = field.at(xi, i);
      if (h == 0.0) continue;
      const auto& r = *rows[i];
      for (std::size_t j = 0; j < nv; ++j) out.at(xi, j) += r[j] * h;
    }
  });
  return out;
}

inline PhaseSpaceField apply_K(const PhaseSpaceField& field, const TransportOperators& ops) {
  return apply_K(field, ops.K.get(), ops.threads);
}

/// D[n] = int_0^{t_n} U1(t_n - s) S(s) ds by the trapezoid rule on the time grid.
inline FieldSeries duhamel(const FieldSeries& S, double dt, const TransportOperators& ops) {
  const auto& g = *ops.grid;
  const std::size_t nt = S.size();
  FieldSeries D;
  D.reserve(nt);
  for (std::size_t n = 0; n < nt; ++n) D.emplace_back(ops.grid, n * dt);
  if (nt < 2) return D;
  parallel_for(g.nx(), ops.threads, [&](std::size_t xi) {
    const Vec3& x = g.space.point(xi);
    for (std::size_t vi = 0; vi < g.nv(); ++vi) {
      const Vec3& v = g.velocity.node(vi);
      const double tau = exit_time(g.domain, x, v, Direction::Backward);
      for (std::size_t lag = 0; lag < nt; ++lag) {
        const double t = lag * dt;
        if (t > tau) break;
        const double att = std::exp(-ops.nu[vi] * t) * dt;
        const Stencil st = lag == 0 ? Stencil{} : g.space.stencil(g.domain, x - t * v);
        for (std::size_t m = 0; m + lag < nt; ++m) {
          const std::size_t n = m + lag;
          if (n == 0) continue;
          const double c = (m == 0 || lag == 0) ? 0.5 : 1.0;
          const double sval = lag == 0 ? S[m].at(xi, vi)
                                       : st.apply([&](int c2) { return S[m].at(static_cast<std::size_t>(c2), vi); });
          D[n].at(xi, vi) += c * att * sval;
        }
      }
    }
  });
  return D;
}

struct LinearSolution {
  std::vector<double> times;
  FieldSeries ballistic;  // h_0 = G_- g
  FieldSeries scattered;  // sum_{j>=1} h_j
  FieldSeries total;      // sum_j h_j
  std::vector<double> term_norms;  // sup over nodes and times of |h_j|
  double truncation_ratio = 0.0;   // ||h_N|| / ||sum_j h_j||
};

inline FieldSeries sum_series(const FieldSeries& a, const FieldSeries& b) {
  FieldSeries out = a;
  for (std::size_t n = 0; n < out.size(); ++n) out[n].axpy(1.0, b[n]);
  return out;
}

inline double series_sup(const FieldSeries& s) {
  double m = 0.0;
  for (const auto& f : s) m = std::max(m, f.sup_norm());
  return m;
}

inline FieldSeries apply_K_series(const FieldSeries& s, const TransportOperators& ops) {
  FieldSeries out;
  out.reserve(s.size());
  for (const auto& f : s) out.push_back(apply_K(f, ops));
  return out;
}

/// Truncated Duhamel series: h_0 = G_- g, h_{j+1}(t) = int_0^t U1(t-s) K h_j(s) ds, j < N.
inline LinearSolution solve_linear(const BoundarySource& source, const SolverConfig& cfg, const TransportOperators& ops) {
  cfg.validate();
  source.validate();
  ops.validate();
  const int nt = cfg.steps() + 1;
  LinearSolution sol;
  for (int n = 0; n < nt; ++n) {
    sol.times.push_back(n * cfg.dt);
    sol.ballistic.push_back(apply_Gminus(source, n * cfg.dt, ops));
  }
  sol.term_norms.push_back(series_sup(sol.ballistic));
  for (int n = 0; n < nt; ++n) sol.scattered.emplace_back(ops.grid, n * cfg.dt);
  FieldSeries term = sol.ballistic;
  for (int j = 1; j <= cfg.duhamel_order; ++j) {
    if (!ops.has_scattering()) {
      sol.term_norms.push_back(0.0);
      continue;
    }
    term = duhamel(apply_K_series(term, ops), cfg.dt, ops);
    sol.term_norms.push_back(series_sup(term));
    for (int n = 0; n < nt; ++n) sol.scattered[n].axpy(1.0, term[n]);
  }
  sol.total = sum_series(sol.ballistic, sol.scattered);
  const double tot = series_sup(sol.total);
  sol.truncation_ratio = tot > 0.0 ? sol.term_norms.back() / tot : 0.0;
  return sol;
}

/// sum_{j=0}^{N} (D K)^j D S: the Duhamel response to an interior source with the same expansion depth.
inline FieldSeries propagate_source(const FieldSeries& S, const SolverConfig& cfg, const TransportOperators& ops) {
  FieldSeries term = duhamel(S, cfg.dt, ops);
  FieldSeries acc = term;
  if (!ops.has_scattering()) return acc;
  for (int j = 1; j <= cfg.duhamel_order; ++j) {
    term = duhamel(apply_K_series(term, ops), cfg.dt, ops);
    for (std::size_t n = 0; n < acc.size(); ++n) acc[n].axpy(1.0, term[n]);
  }
  return acc;
}

}  // namespace boltzalbedo
