// Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "boltzalbedo/orchestrator.hpp"

using namespace boltzalbedo;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Vec3 random_vec(std::mt19937_64& g, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(g), n(g), n(g)};
}

Vec3 random_unit(std::mt19937_64& g) {
  for (;;) {
    const Vec3 d = random_vec(g, 1.0);
    if (norm(d) > 1e-6) return normalized(d);
  }
}

std::array<Vec3, 3> random_rotation(std::mt19937_64& g) {
  const Vec3 a = random_unit(g);
  const auto b = orthonormal_complement(a);
  std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
  const double t = u(g);
  return {std::cos(t) * b[0] + std::sin(t) * b[1], -std::sin(t) * b[0] + std::cos(t) * b[1], a};
}

Vec3 rotate(const std::array<Vec3, 3>& R, const Vec3& v) { return v.x * R[0] + v.y * R[1] + v.z * R[2]; }

struct Scene {
  std::shared_ptr<const KernelEvaluator> ev;
  std::shared_ptr<const PhaseSpaceGrid> grid;
  TransportOperators ops;
};

Scene make_scene(const CollisionKernel& k, double R, double dx, int order, bool dense) {
  Scene s;
  s.ev = std::make_shared<KernelEvaluator>(k);
  s.grid = std::make_shared<PhaseSpaceGrid>(BallDomain(Vec3{}, R), dx, VelocityGrid::gauss_hermite(order, 5.0));
  s.ops = make_operators(s.grid, s.ev, WeightFunction(), dense, 1);
  return s;
}

// Backward exit time of a ball centred at the origin.
double chord_back(double R, const Vec3& x, const Vec3& v) {
  const double a = norm2(v), b = -dot(x, v), c = norm2(x) - R * R;
  const double disc = b * b - a * c;
  if (disc <= 0.0) return 0.0;
  return std::max(0.0, (-b + std::sqrt(disc)) / a);
}

// 1. Collision mechanics.
Verdict collision_mechanics() {
  std::mt19937_64 g(20240101);
  const auto hs = CollisionKernel::hard_sphere(1.0);
  double worst_p = 0.0, worst_e = 0.0, worst_q = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 u = random_vec(g, 1.5), v = random_vec(g, 1.5), w = random_unit(g);
    const auto pc = post_collision(u, v, w);
    worst_p = std::max(worst_p, norm((pc.u + pc.v) - (u + v)));
    const double e = norm2(u) + norm2(v);
    worst_e = std::max(worst_e, std::abs(norm2(pc.u) + norm2(pc.v) - e) / std::max(1.0, e));
    const double q = eval_q(hs, collision_angle(v - u, w), norm(v - u));
    worst_q = std::max(worst_q, std::abs(q * (maxwellian(pc.u) * maxwellian(pc.v) - maxwellian(u) * maxwellian(v))));
  }
  return {worst_p <= 1e-12 && worst_e <= 1e-12 && worst_q <= 1e-12,
          "momentum " + fmt("%.2e", worst_p) + ", energy " + fmt("%.2e", worst_e) + ", equilibrium " +
              fmt("%.2e", worst_q)};
}

// 2. Collision frequency oracle.
Verdict collision_frequency() {
  const SphereQuadrature sq;
  const CollisionFrequencyRule rule;
  const auto hs = CollisionKernel::hard_sphere(1.0);
  // Radial oracle: nu(0) = 2 pi c pi^{3/2} (1/sqrt(pi) + lim_{s->0} (s + 1/(2s)) erf(s)) = 4 pi^2 c.
  const double nu0 = eval_nu(hs, {0, 0, 0}, rule, sq);
  const double e0 = std::abs(nu0 / (4.0 * pi * pi) - 1.0);
  std::mt19937_64 g(11);
  double worst = 0.0;
  const auto sp = CollisionKernel::separable(0.5, [](double t) { return std::cos(t); }, 1.0);
  for (int i = 0; i < 20; ++i) {
    const Vec3 v = random_vec(g, 1.5);
    const auto R = random_rotation(g);
    for (const auto* k : {&hs, &sp}) {
      const double a = eval_nu(*k, v, rule, sq), b = eval_nu(*k, rotate(R, v), rule, sq);
      worst = std::max(worst, std::abs(a / b - 1.0));
    }
  }
  return {e0 <= 1e-6 && worst <= 1e-6, "nu(0) rel err " + fmt("%.2e", e0) + ", rotation rel err " + fmt("%.2e", worst)};
}

// 3. Kernel symmetry and the discrete ktilde bound.
Verdict kernel_symmetry() {
  std::mt19937_64 g(5);
  double asym = 0.0;
  for (const auto& k : {CollisionKernel::hard_sphere(1.0),
                        CollisionKernel::separable(0.5, [](double t) { return std::cos(t) * std::cos(t); }, 1.0)}) {
    const KernelEvaluator ev(k);
    for (int i = 0; i < 100; ++i) {
      const Vec3 u = random_vec(g, 1.2), v = random_vec(g, 1.2);
      for (auto f : {&KernelEvaluator::k1, &KernelEvaluator::k2, &KernelEvaluator::k}) {
        const double a = (ev.*f)(u, v), b = (ev.*f)(v, u);
        asym = std::max(asym, std::abs(a - b) / std::max(1.0, std::abs(a)));
      }
    }
  }
  // sup_{v'} sum_i |ktilde(v_i, v')| dv_i on a 12-point Gauss-Hermite set, v' along three rays.
  constexpr double kFrozenBound = 130.0;
  const KernelEvaluator ev(CollisionKernel::hard_sphere(1.0));
  const WeightFunction w;
  const VelocityGrid vg = VelocityGrid::gauss_hermite(12, 5.0);
  const auto& lw = vg.lebesgue_weights();
  double sup = 0.0;
  for (const Vec3& d : {normalized(Vec3{0.3, 0.5, 0.81}), Vec3{1, 0, 0}, normalized(Vec3{-0.6, 0.2, -0.4})}) {
    for (int k = 0; k <= 20; ++k) {
      const Vec3 vp = 0.25 * k * d;
      double acc = 0.0;
      for (std::size_t i = 0; i < vg.size(); ++i) {
        if (vg.node(i) == vp) continue;
        acc += std::abs(ev.ktilde(w, vg.node(i), vp)) * lw[i];
      }
      sup = std::max(sup, acc);
    }
  }
  return {asym <= 1e-10 && sup <= kFrozenBound,
          "asymmetry " + fmt("%.2e", asym) + ", sup sum " + fmt("%.4f", sup) + " <= " + fmt("%.0f", kFrozenBound)};
}

// 4. Ballistic exactness.
Verdict ballistic_exactness() {
  Scene s = make_scene(CollisionKernel::hard_sphere(1.0), 1.0, 0.25, 6, false);
  s.ops.K.reset();
  BoundarySource src;
  src.t0 = 0.6;
  src.sigma_t = 0.3;
  src.x0 = {-1, 0, 0};
  src.sigma_x = 1.0;
  src.v0 = {0.5, 0, 0};
  src.sigma_v = 1.2;
  SolverConfig c;
  c.dt = 0.1;
  c.horizon = 2.0;
  std::mt19937_64 g(404);
  std::uniform_real_distribution<double> ut(0.2, 2.0);
  std::vector<TraceQuery> q;
  const auto& vg = s.grid->velocity;
  while (q.size() < 100) {
    const Vec3 v = vg.node(static_cast<std::size_t>(g() % vg.size()));
    const Vec3 x = normalized(normalized(v) + 0.6 * random_unit(g));
    if (dot(x, v) < 0.1 * norm(v)) continue;
    q.push_back({ut(g), x, v});
  }
  double worst[2] = {0.0, 0.0};
  for (int pass = 0; pass < 2; ++pass) {
    TransportOperators ops = s.ops;
    if (pass == 1) ops.nu.assign(vg.size(), 0.0);
    const LinearSolution sol = solve_linear(src, c, ops);
    const auto out = outgoing_trace(sol, src, ops, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double nu = ops.nu[vg.nearest(q[i].v)];
      const double tau = chord_back(1.0, q[i].x, q[i].v);
      const double expect = std::exp(-nu * tau) * src.incoming(q[i].t - tau, q[i].x - tau * q[i].v, q[i].v);
      worst[pass] = std::max(worst[pass], std::abs(out[i].value - expect));
    }
  }
  return {worst[0] <= 1e-8 && worst[1] <= 1e-12,
          "attenuated " + fmt("%.2e", worst[0]) + ", free streaming " + fmt("%.2e", worst[1]) + " (100 rays)"};
}

// 5. L1 bound of the boundary propagator.
Verdict boundary_l1_bound() {
  // Weak attenuation keeps the bound close to sharp.
  const Scene s = make_scene(CollisionKernel::hard_sphere(0.01), 1.0, 0.1, 8, false);
  const SphereQuadrature sphere(128, 256);
  struct Cfg {
    double t0, st;
    Vec3 x0;
    double sx;
    Vec3 v0;
    double sv;
  };
  const std::vector<Cfg> cfgs{{0.3, 0.1, {-1, 0, 0}, 0.3, {1, 0, 0}, 0.5},
                              {0.5, 0.2, {0, -1, 0}, 0.6, {0, 1.5, 0}, 0.8},
                              {0.4, 0.15, normalized(Vec3{1, 1, 1}), 0.5, {-1, -1, -1}, 0.7},
                              {0.2, 0.1, {0, 0, 1}, 1.0, {0, 0, 0}, 1.0},
                              {0.6, 0.3, normalized(Vec3{-0.3, 0.8, -0.5}), 0.4, {0.4, -1.2, 0.6}, 0.6}};
  double worst = 0.0;
  for (const auto& p : cfgs) {
    BoundarySource src;
    src.t0 = p.t0;
    src.sigma_t = p.st;
    src.x0 = p.x0;
    src.sigma_x = p.sx;
    src.v0 = p.v0;
    src.sigma_v = p.sv;
    // int_{n.v<0} |n.v| e^{-|v-v0|^2/sv^2} dv = pi sv^2 m(n.v0).
    const auto m = [&](double b) {
      return 0.5 * p.sv * p.sv * std::exp(-b * b / (p.sv * p.sv)) - b * p.sv * std::sqrt(pi) / 2 * std::erfc(b / p.sv);
    };
    const double surface = sphere.integrate([&](const Vec3& n) { return src.space_profile(n) * m(dot(n, p.v0)); });
    const double bound = src.amplitude * src.time_mass() * pi * p.sv * p.sv * surface;
    for (double t : {0.25, 0.5, 1.0, 1.5, 2.5}) {
      const double l1 = apply_Gminus(src, t, s.ops).l1_norm();
      worst = std::max(worst, l1 / bound);
    }
  }
  return {worst <= 1.0 + 1e-4, "max discrete/boundary ratio " + fmt("%.6f", worst) + " (5 sources, 5 times)"};
}

// 6. Single-scatter amplitudes against a mollified delta.
Verdict single_scatter() {
  const double R = 0.02;
  const BallDomain dom(Vec3{}, R);
  const KernelEvaluator ev(CollisionKernel::hard_sphere(1.0));
  const WeightFunction w;
  const Vec3 x = R * normalized(Vec3{1, 0.2, 0.1}), v{1.0, 0.5, 0.3}, vp{-0.3, 1.0, 0.5};
  const double nu = ev.nu(v), nup = ev.nu(vp), kt = ev.ktilde(w, vp, v);
  const double L = chord_back(R, x, v);
  const double lag = 0.4 * L + chord_back(R, x - 0.4 * L * v, vp);
  const auto ss = single_scatter_value(dom, x, v, vp, lag, nu, nup, kt);
  if (!ss.has_vertex()) return {false, "no vertex"};
  double direct = 0.0;
  for (const auto& vx : ss.vertices) direct += vx.amplitude / std::abs(vx.dphi);
  std::vector<double> errs;
  for (double eps : {0.05 * L, 0.025 * L, 0.0125 * L}) {
    const int n = 200000;
    const double h = L / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double si = i * h;
      const double tin = chord_back(R, x - si * v, vp);
      const double z = (lag - si - tin) / eps;
      acc += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(-nu * si - nup * tin) * kt * std::exp(-0.5 * z * z) /
             (std::sqrt(2.0 * pi) * eps);
    }
    errs.push_back(std::abs(acc * h / direct - 1.0));
  }
  const bool monotone = errs[1] <= errs[0] && errs[2] <= errs[1];
  return {monotone && errs[2] <= 0.02, "rel err " + fmt("%.3e", errs[0]) + " -> " + fmt("%.3e", errs[1]) + " -> " +
                                           fmt("%.3e", errs[2])};
}

// 7. Limiting probes on the coarse order-20 grid.
Verdict probes() {
  const double R = 0.01;
  const Scene s = make_scene(CollisionKernel::hard_sphere(1.0), R, 0.1 * R, 20, false);
  const auto& vg = s.grid->velocity;
  const WeightFunction w;
  const std::vector<Vec3> vs{{1.0, 0.5, 0.3},  {-0.8, 0.6, 0.2}, {0.4, -1.2, 0.5}, {0.3, 0.3, -1.1}, {1.5, 0.1, 0.0},
                             {-0.5, -0.5, 0.9}, {0.7, 1.1, -0.4}, {-1.3, 0.2, -0.6}, {0.2, 0.9, 0.9},  {0.9, -0.7, -0.8}};
  const std::vector<Vec3> offsets{{0.0, 0.3, 0.1},  {0.2, 0.0, -0.3}, {-0.2, 0.1, 0.2}, {0.3, -0.2, 0.0}, {0.0, 0.0, 0.4},
                                  {0.1, -0.3, 0.0}, {-0.3, 0.2, 0.1}, {0.0, 0.2, -0.2}, {0.2, 0.2, 0.0},  {-0.1, 0.0, 0.3}};
  double worst_nu = 0.0, worst_kt = 0.0;
  int failures = 0;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const Vec3 v = vg.node(vg.nearest(vs[i]));
    const Vec3 x = R * normalized(normalized(v) + offsets[i]);
    try {
      const double direct = ballistic_coefficient(s.grid->domain, x, v, s.ops.nu[vg.nearest(v)]).attenuation;
      worst_nu = std::max(worst_nu, std::abs(probe_nu(s.ops, x, v).extrapolated / direct - 1.0));
    } catch (const std::exception&) {
      ++failures;
    }
    // Incoming velocity: a perturbed rotation of the outgoing one. When v - v' is parallel to a lattice axis,
    // a whole line of nodes is coplanar with v and v' and double scattering stays singular as the probe
    // narrows, so such pairs are not valid probe configurations on a discrete velocity set.
    const Vec3 vp = vg.node(vg.nearest(Vec3{-vs[i].y + 0.15, vs[i].x - 0.1, vs[i].z + 0.35}));
    if ((v.x == vp.x) + (v.y == vp.y) + (v.z == vp.z) >= 2) return {false, "degenerate probe pair " + std::to_string(i)};
    try {
      const double L = exit_time(s.grid->domain, x, v, Direction::Backward);
      const double truth = s.ev->ktilde(w, vp, v);
      worst_kt = std::max(worst_kt, std::abs(probe_ktilde(s.ops, x, 0.5 * L, v, vp).extrapolated / truth - 1.0));
    } catch (const std::exception&) {
      ++failures;
    }
  }
  return {failures == 0 && worst_nu <= 0.02 && worst_kt <= 0.05,
          "nu max rel err " + fmt("%.2e", worst_nu) + ", ktilde max rel err " + fmt("%.2e", worst_kt) + ", failures " +
              std::to_string(failures)};
}

// 8. Linearization rate.
Verdict linearization_rate() {
  const Scene s = make_scene(CollisionKernel::hard_sphere(1.0), 1.0, 0.25, 4, true);
  const GammaTensor T(s.ev->kernel(), WeightFunction(), s.grid->velocity, 8, 8, 16, 1);
  BoundarySource src;
  src.t0 = 0.3;
  src.sigma_t = 0.1;
  src.x0 = {-1, 0, 0};
  src.sigma_x = 0.3;
  src.v0 = {1, 0, 0};
  src.sigma_v = 0.5;
  SolverConfig c;
  c.dt = 0.1;
  c.horizon = 1.0;
  c.duhamel_order = 2;
  c.picard_iters = 8;
  const GapTable g = linearization_gap(src, {0.1, 0.05, 0.025}, c, s.ops, T);
  const bool monotone = g.gap[1] < g.gap[0] && g.gap[2] < g.gap[1];
  return {monotone && g.slope >= 0.8, "gaps " + fmt("%.3e", g.gap[0]) + ", " + fmt("%.3e", g.gap[1]) + ", " +
                                          fmt("%.3e", g.gap[2]) + "; slope " + fmt("%.3f", g.slope)};
}

// 9. Deconvolution oracles.
Verdict deconvolution() {
  auto sampled = [](double step, int n, const std::function<double(double)>& f, double offset) {
    RadialProfile p;
    for (int i = 0; i < n; ++i) {
      p.radii.push_back(step * (i + offset));
      p.values.push_back(f(p.radii.back()));
    }
    return p;
  };
  auto sup_err = [](const RadialProfile& p) {
    double e = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) e = std::max(e, std::abs(p.values[i] - std::exp(-p.radii[i] * p.radii[i])));
    return e;
  };
  TikhonovOptions o;
  o.lambda = 1e-8;
  o.r_out = 4.0;
  o.n_out = 81;
  // Gaussian I = e^{-r^2} convolved with e^{-|u|^2} in 3D and 2D.
  const double e3 = sup_err(deconvolve_radial_3d(
      sampled(0.1, 81, [](double r) { return std::pow(pi / 2, 1.5) * std::exp(-r * r / 2); }, 0.0),
      DeconvolutionMethod::FourierTikhonov, o).I);
  const double e2 = sup_err(
      deconvolve_plane_2d(sampled(0.1, 81, [](double r) { return pi / 2 * std::exp(-r * r / 2); }, 0.0), o).I);
  const RadialDeconvolution c = deconvolve_radial_3d(sampled(0.25, 24, [](double) { return std::pow(pi, 1.5); }, 0.5),
                                                     DeconvolutionMethod::FourierTikhonov);
  double ec = 0.0;
  for (double v : c.I.values) ec = std::max(ec, std::abs(v - 1.0));
  return {e3 <= 1e-3 && e2 <= 1e-3 && ec <= 1e-6,
          "3D sup err " + fmt("%.2e", e3) + ", 2D sup err " + fmt("%.2e", e2) + ", constant " + fmt("%.2e", ec)};
}

// 10. End-to-end round trips.
Verdict roundtrips() {
  const BallDomain dom(Vec3{}, 1.0);
  const KernelEvaluator hs(CollisionKernel::hard_sphere(1.0));
  const ReconstructionReport a = roundtrip(hs, WeightFunction(), dom, SynthesisSpec{}, InverseSpec{}, 7);
  const KernelEvaluator sp(CollisionKernel::separable(0.5, [](double t) { return std::cos(t); }, 1.0));
  const ReconstructionReport b = roundtrip(sp, WeightFunction(), dom, SynthesisSpec{}, InverseSpec{}, 7);
  if (!a.fit || !b.fit) return {false, "parametric fit missing"};
  const double c_sp = sp.sphere_factor_value() / (2.0 * pi);
  const double hc = std::abs(a.fit->c - 1.0), hg = std::abs(a.fit->gamma - 1.0);
  const double sc = std::abs(b.fit->c / c_sp - 1.0), sg = std::abs(b.fit->gamma / 0.5 - 1.0);
  return {a.ok() && b.ok() && hc <= 0.02 && hg <= 0.02 && a.q_median_rel_err <= 0.05 && sc <= 0.05 && sg <= 0.05,
          "HS c err " + fmt("%.2e", hc) + ", gamma err " + fmt("%.2e", hg) + ", q median " +
              fmt("%.2e", a.q_median_rel_err) + "; SP c err " + fmt("%.2e", sc) + ", gamma err " + fmt("%.2e", sg)};
}

// 11. Determinism across reruns and thread counts.
Verdict determinism() {
  const ExperimentConfig c = parse_config(fs::path(BOLTZALBEDO_CONFIGS) / "hs_roundtrip.json");
  const fs::path d = fs::temp_directory_path() / "boltzalbedo_acceptance";
  fs::remove_all(d);
  std::string bytes[2];
  for (int i = 0; i < 2; ++i) {
    RunOptions o;
    o.out_dir = d / std::to_string(i);
    o.threads = i == 0 ? 1 : 4;
    const RunOutcome r = run_command(Command::Roundtrip, c, o);
    if (r.exit_code != exit_code::ok) return {false, "run exited with " + std::to_string(r.exit_code)};
    bytes[i] = read_file_bytes(r.run_dir / "report.json");
  }
  return {bytes[0] == bytes[1] && !bytes[0].empty(),
          "report.json sha256 " + sha256_hex(bytes[0]).substr(0, 16) + " vs " + sha256_hex(bytes[1]).substr(0, 16)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    Verdict (*run)();
  };
  const std::vector<Criterion> criteria{
      {1, "collision mechanics", 1, collision_mechanics},
      {2, "collision frequency oracle", 10, collision_frequency},
      {3, "kernel symmetry and bound", 30, kernel_symmetry},
      {4, "ballistic exactness", 30, ballistic_exactness},
      {5, "boundary L1 bound", 60, boundary_l1_bound},
      {6, "single-scatter consistency", 120, single_scatter},
      {7, "probe convergence", 600, probes},
      {8, "linearization rate", 900, linearization_rate},
      {9, "deconvolution oracles", 10, deconvolution},
      {10, "end-to-end round trip", 1800, roundtrips},
      {11, "determinism", 1800, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool ok = v.pass && in_time;
    failed += ok ? 0 : 1;
    std::printf("[%s] %2d %-28s %8.2fs (budget %gs%s)  %s\n", ok ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_s,
                in_time ? "" : ", exceeded", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
