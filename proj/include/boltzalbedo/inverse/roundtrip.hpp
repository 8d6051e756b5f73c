#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "boltzalbedo/albedo.hpp"
#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/parallel.hpp"
#include "boltzalbedo/geometry.hpp"
#include "boltzalbedo/inverse/deconvolution.hpp"
#include "boltzalbedo/inverse/stages.hpp"
#include "boltzalbedo/kernel.hpp"

namespace boltzalbedo {

/// Sampling plan for semi-analytic albedo data.
struct SynthesisSpec {
  double v_max = 5.0;
  int speed_bins = 24;
  int rays_per_speed = 4;
  std::vector<double> eta = default_eta();
  int zeta_count = 16;
  double zeta_max = 4.0;
  std::uint64_t geometry_seed = 0x6a09e667f3bcc908ULL;

  static std::vector<double> default_eta() {
    std::vector<double> e;
    for (int i = 0; i < 20; ++i) e.push_back(0.05 + (4.3 - 0.05) * i / 19.0);
    return e;
  }

  void validate() const {
    if (!(v_max > 0.0)) throw ConfigurationError("synthesis: v_max must be positive");
    if (speed_bins < 8) throw ConfigurationError("synthesis: need at least 8 speed bins");
    if (rays_per_speed < 1) throw ConfigurationError("synthesis: rays_per_speed must be >= 1");
    if (zeta_count < 8) throw ConfigurationError("synthesis: need at least 8 zeta values");
    if (!(zeta_max > 0.0)) throw ConfigurationError("synthesis: zeta_max must be positive");
    for (double a : eta)
      if (!(a > 0.0)) throw ConfigurationError("synthesis: eta values must be positive");
  }

  // Speeds at bin centres; pair speeds must stay within the last centre.
  double speed(int bin) const { return (bin + 0.5) * v_max / speed_bins; }
  double max_pair_speed() const { return speed(speed_bins - 1); }
};

namespace detail {
inline Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const Vec3 d{n(rng), n(rng), n(rng)};
    const double l = norm(d);
    if (l > 1e-8) return d / l;
  }
}
}  // namespace detail

/// Semi-analytic albedo data: ballistic attenuations on random chords at each
/// speed-bin centre, and single-scatter amplitudes for pairs v = zeta + eta/2,
/// v' = zeta - eta/2 (zeta perpendicular to eta, both orientations) scattered
/// at the domain centre. Multiplicative Gaussian noise of relative size
/// `noise` is drawn from a generator seeded with `noise_seed`.
inline SingularDecomposition synthesize_decomposition(const KernelEvaluator& ev, const WeightFunction& w,
                                                      const BallDomain& domain, const SynthesisSpec& spec, double noise,
                                                      std::uint64_t noise_seed, int threads = 1) {
  spec.validate();
  if (!(noise >= 0.0)) throw ConfigurationError("noise level must be nonnegative");
  std::mt19937_64 geo(spec.geometry_seed);
  SingularDecomposition out;
  const Vec3 c = domain.center();
  const double R = domain.radius();
  for (int b = 0; b < spec.speed_bins; ++b) {
    const double s = spec.speed(b);
    const double nu = ev.nu_of_speed(s);
    for (int r = 0; r < spec.rays_per_speed; ++r) {
      const Vec3 d = detail::random_direction(geo);
      Vec3 n;
      do n = detail::random_direction(geo);
      while (dot(n, d) < 0.2);
      const Vec3 x = c + R * n, v = s * d;
      const BallisticCoefficient bc = ballistic_coefficient(domain, x, v, nu);
      out.ballistic.push_back({x, v, bc.attenuation, bc.tau, bc.footpoint});
    }
  }
  struct Pair {
    Vec3 v, vp;
  };
  std::vector<Pair> pairs;
  for (double a : spec.eta) {
    const Vec3 e = detail::random_direction(geo);
    const auto basis = orthonormal_complement(e);
    const double phi = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(geo);
    const Vec3 p = std::cos(phi) * basis[0] + std::sin(phi) * basis[1];
    for (int j = 0; j < spec.zeta_count; ++j) {
      const double z = spec.zeta_max * j / (spec.zeta_count - 1);
      const Vec3 v = z * p + 0.5 * a * e, vp = z * p - 0.5 * a * e;
      if (norm(v) > spec.max_pair_speed() || norm(vp) > spec.max_pair_speed()) continue;
      pairs.push_back({v, vp});
      pairs.push_back({vp, v});
    }
  }
  out.single_scatter.resize(pairs.size());
  std::vector<std::string> errors(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const Vec3& v = pairs[i].v;
    const Vec3& vp = pairs[i].vp;
    const Vec3 x = c + R * normalized(v);
    const double s = 0.5 * exit_time(domain, x, v, Direction::Backward);
    const double lag = s + exit_time(domain, x - s * v, vp, Direction::Backward);
    const SingleScatter ss =
        single_scatter_value(domain, x, v, vp, lag, ev.nu(v), ev.nu(vp), ev.ktilde(w, vp, v));
    const ScatterVertex* best = nullptr;
    for (const auto& vx : ss.vertices)
      if (!best || std::abs(vx.s - s) < std::abs(best->s - s)) best = &vx;
    if (!best) {
      errors[i] = "no scattering vertex";
      return;
    }
    out.single_scatter[i] = {x, v, vp, lag, best->s, best->tau_in, best->amplitude, best->dphi};
  });
  for (const auto& e : errors)
    if (!e.empty()) throw DataError("synthesis: " + e);
  if (noise > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& r : out.ballistic) r.attenuation *= 1.0 + noise * n(rng);
    for (auto& r : out.single_scatter) r.amplitude *= 1.0 + noise * n(rng);
  }
  return out;
}

struct InverseSpec {
  DeconvolutionMethod i_method = DeconvolutionMethod::FourierTikhonov;  // route feeding the k split
  double lambda = 1e-6;
  int bins = 24;
  double v_max = 5.0;
  int i_points = 161;
  int qtilde_points = 81;
  double noise = 0.0;
  int n_theta = 16;
  double theta_min = 0.1;
  double theta_max = 0.5 * std::numbers::pi;
  int n_rho = 12;
  double rho_min = 0.5;
  double rho_max = 4.0;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigurationError("inverse.lambda must be nonnegative");
    if (bins < 8) throw ConfigurationError("inverse.bins must be >= 8");
    if (!(v_max > 0.0)) throw ConfigurationError("inverse.v_max must be positive");
    if (i_points < 2 || qtilde_points < 2) throw ConfigurationError("inverse: profile point counts must be >= 2");
    if (!(noise >= 0.0)) throw ConfigurationError("inverse.noise must be nonnegative");
    if (n_theta < 1 || n_rho < 1) throw ConfigurationError("inverse: evaluation grid must be nonempty");
    if (!(theta_min > 0.0 && theta_max <= 0.5 * std::numbers::pi + 1e-12 && theta_min <= theta_max))
      throw ConfigurationError("inverse: theta range must lie in (0, pi/2]");
    if (!(rho_min > 0.0 && rho_min <= rho_max)) throw ConfigurationError("inverse: rho range must be positive");
  }

  std::vector<double> thetas() const { return linspace(theta_min, theta_max, n_theta); }
  std::vector<double> rhos() const { return linspace(rho_min, rho_max, n_rho); }

  static std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return out;
  }
};

struct StageRecord {
  std::string name;
  std::string status;  // ok | failed | skipped
  std::string reason;
};

struct ReconstructionReport {
  std::vector<StageRecord> stages;
  double noise = 0.0;

  RadialProfile nu_hat;
  std::vector<double> nu_true;
  double nu_max_rel_err = 0.0;
  double nu_median_rel_err = 0.0;
  std::size_t nu_excluded = 0;

  KernelTable table;
  std::vector<double> ktilde_true;
  std::vector<double> k2_true;
  double ktilde_median_rel_err = 0.0;
  double k2_median_rel_err = 0.0;

  std::optional<FitResult> fit;
  DeconvolutionMethod i_method = DeconvolutionMethod::FourierTikhonov;
  RadialProfile I_hat;
  std::vector<double> I_true;
  double I_sup_rel_err = 0.0;  // over r <= v_max, relative to sup |I|

  std::vector<PlanarSlice> slices;
  std::vector<SliceFailure> slice_failures;
  std::vector<std::vector<double>> qtilde_true;  // per slice over its radii
  double qtilde_median_rel_err = 0.0;

  QGrid q;
  std::vector<double> q_true;
  std::vector<double> q_rel_err;  // NaN where skipped
  double q_median_rel_err = 0.0;
  double q_sup_rel_err = 0.0;

  bool ok() const {
    return std::none_of(stages.begin(), stages.end(), [](const StageRecord& s) { return s.status == "failed"; });
  }
  const StageRecord* stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }
};

namespace detail {

/// |hat - truth| / max(|truth|, 1e-3 sup |truth|); 0 where both vanish.
inline std::vector<double> relative_errors(const std::vector<double>& hat, const std::vector<double>& truth) {
  double sup = 0.0;
  for (double t : truth)
    if (std::isfinite(t)) sup = std::max(sup, std::abs(t));
  std::vector<double> out(hat.size());
  for (std::size_t i = 0; i < hat.size(); ++i) {
    if (!std::isfinite(hat[i])) {
      out[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double d = std::abs(hat[i] - truth[i]);
    out[i] = d == 0.0 ? 0.0 : d / std::max({std::abs(truth[i]), 1e-3 * sup, std::numeric_limits<double>::min()});
  }
  return out;
}

inline double median_finite(std::vector<double> x) {
  x.erase(std::remove_if(x.begin(), x.end(), [](double v) { return !std::isfinite(v); }), x.end());
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

inline double max_finite(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x)
    if (std::isfinite(v)) m = std::max(m, v);
  return m;
}

}  // namespace detail

/// Inverse stages on a decomposition, compared against the ground-truth evaluator.
/// Stage failures are recorded; dependent stages are marked skipped.
inline ReconstructionReport reconstruct(const SingularDecomposition& data, const KernelEvaluator& truth,
                                        const WeightFunction& w, const BallDomain& domain, const InverseSpec& spec,
                                        int threads = 1) {
  spec.validate();
  ReconstructionReport rep;
  rep.noise = spec.noise;
  rep.i_method = spec.i_method;
  auto run = [&](const std::string& name, const std::vector<std::string>& needs, auto&& body) {
    for (const auto& n : needs) {
      const StageRecord* s = rep.stage(n);
      if (!s || s->status != "ok") {
        rep.stages.push_back({name, "skipped", "upstream stage " + n + " unavailable"});
        return;
      }
    }
    try {
      body();
      rep.stages.push_back({name, "ok", ""});
    } catch (const std::exception& e) {
      rep.stages.push_back({name, "failed", e.what()});
    }
  };

  run("nu", {}, [&] {
    const NuRecovery nr = recover_nu(data.ballistic, 2.0 * domain.radius(), spec.bins, spec.v_max);
    rep.nu_hat = nr.profile;
    rep.nu_excluded = nr.excluded;
    if (rep.nu_hat.empty()) throw DataError("recover_nu: no usable rays");
    for (double s : rep.nu_hat.radii) rep.nu_true.push_back(truth.nu_of_speed(s));
    const auto err = detail::relative_errors(rep.nu_hat.values, rep.nu_true);
    rep.nu_max_rel_err = detail::max_finite(err);
    rep.nu_median_rel_err = detail::median_finite(err);
  });

  run("ktilde", {"nu"}, [&] {
    rep.table = unweight(recover_ktilde(data.single_scatter, rep.nu_hat), w);
    std::vector<double> hat;
    for (const auto& e : rep.table.entries) {
      hat.push_back(e.ktilde);
      rep.ktilde_true.push_back(truth.ktilde(w, e.vp, e.v));
    }
    rep.ktilde_median_rel_err = detail::median_finite(detail::relative_errors(hat, rep.ktilde_true));
  });

  run("fit", {"nu"}, [&] { rep.fit = parametric_fit(rep.nu_hat, truth.nu_rule()); });

  run("I", {"nu"}, [&] {
    TikhonovOptions opt;
    opt.lambda = spec.lambda;
    opt.n_out = spec.i_points;
    opt.r_out = 2.0 * spec.v_max;
    const RadialDeconvolution d = deconvolve_radial_3d(rep.nu_hat, spec.i_method, opt, truth.nu_rule());
    rep.I_hat = d.I;
    double sup = 0.0, err = 0.0;
    for (std::size_t i = 0; i < rep.I_hat.size(); ++i) {
      rep.I_true.push_back(truth.I(rep.I_hat.radii[i]));
      if (rep.I_hat.radii[i] > spec.v_max) continue;
      sup = std::max(sup, std::abs(rep.I_true.back()));
      err = std::max(err, std::abs(rep.I_hat.values[i] - rep.I_true.back()));
    }
    rep.I_sup_rel_err = err == 0.0 ? 0.0 : err / std::max(sup, std::numeric_limits<double>::min());
  });

  run("split", {"ktilde", "I"}, [&] {
    rep.table = split_k(rep.table, rep.I_hat);
    std::vector<double> hat;
    rep.ktilde_true.clear();
    for (const auto& e : rep.table.entries) {
      hat.push_back(e.k2);
      rep.k2_true.push_back(truth.k2(e.v, e.vp));
      rep.ktilde_true.push_back(truth.ktilde(w, e.vp, e.v));
    }
    rep.k2_median_rel_err = detail::median_finite(detail::relative_errors(hat, rep.k2_true));
  });

  run("qtilde", {"split"}, [&] {
    rep.slices = planar_data(rep.table);
    TikhonovOptions opt;
    opt.lambda = spec.lambda;
    opt.n_out = spec.qtilde_points;
    opt.r_out = spec.rho_max;
    const QTildeGrid grid = deconvolve_slices(rep.slices, opt, &rep.slice_failures, threads);
    std::vector<PlanarSlice> kept;
    for (auto& s : rep.slices)
      if (!s.qtilde.empty()) kept.push_back(std::move(s));
    rep.slices = std::move(kept);
    if (rep.slices.empty()) throw DataError("planar deconvolution: no slice could be inverted");
    std::vector<double> hat, tru;
    for (const auto& s : rep.slices) {
      std::vector<double> t;
      for (std::size_t j = 0; j < s.qtilde.size(); ++j) {
        t.push_back(eval_qtilde(truth.kernel(), s.eta, s.qtilde.radii[j]));
        hat.push_back(s.qtilde.values[j]);
        tru.push_back(t.back());
      }
      rep.qtilde_true.push_back(std::move(t));
    }
    rep.qtilde_median_rel_err = detail::median_finite(detail::relative_errors(hat, tru));
  });

  run("q", {"qtilde"}, [&] {
    QTildeGrid grid;
    grid.b = rep.slices.front().qtilde.radii;
    for (const auto& s : rep.slices) {
      grid.a.push_back(s.eta);
      grid.values.push_back(s.qtilde.values);
    }
    rep.q = assemble_q(grid, spec.thetas(), spec.rhos());
    for (double th : rep.q.theta)
      for (double r : rep.q.rho) rep.q_true.push_back(eval_q(truth.kernel(), th, r));
    rep.q_rel_err = detail::relative_errors(rep.q.values, rep.q_true);
    rep.q_median_rel_err = detail::median_finite(rep.q_rel_err);
    rep.q_sup_rel_err = detail::max_finite(rep.q_rel_err);
  });
  return rep;
}

/// Synthesis followed by reconstruction; synthesis failures are captured as a stage.
inline ReconstructionReport roundtrip(const KernelEvaluator& truth, const WeightFunction& w, const BallDomain& domain,
                                      const SynthesisSpec& synth, const InverseSpec& inv, std::uint64_t seed,
                                      int threads = 1) {
  SingularDecomposition data;
  try {
    data = synthesize_decomposition(truth, w, domain, synth, inv.noise, seed, threads);
  } catch (const std::exception& e) {
    ReconstructionReport rep;
    rep.noise = inv.noise;
    rep.stages.push_back({"synthesis", "failed", e.what()});
    for (const char* n : {"nu", "ktilde", "fit", "I", "split", "qtilde", "q"})
      rep.stages.push_back({n, "skipped", "upstream stage synthesis unavailable"});
    return rep;
  }
  ReconstructionReport rep = reconstruct(data, truth, w, domain, inv, threads);
  rep.stages.insert(rep.stages.begin(), {"synthesis", "ok", ""});
  return rep;
}

}  // namespace boltzalbedo
