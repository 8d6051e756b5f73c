#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "boltzalbedo/inverse/roundtrip.hpp"

using namespace boltzalbedo;

namespace {

constexpr double pi = std::numbers::pi;

RadialProfile sampled(double step, int n, double (*f)(double), double offset = 0.0) {
  RadialProfile p;
  for (int i = 0; i < n; ++i) {
    const double s = step * (i + offset);
    p.radii.push_back(s);
    p.values.push_back(f(s));
  }
  return p;
}

double sup_error(const RadialProfile& p, double (*f)(double)) {
  double e = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) e = std::max(e, std::abs(p.values[i] - f(p.radii[i])));
  return e;
}

double gauss(double r) { return std::exp(-r * r); }

BallisticRay ray(double speed, double tau, double att) {
  BallisticRay r;
  r.v = {speed, 0, 0};
  r.tau = tau;
  r.attenuation = att;
  return r;
}

ScatterRecord record(const Vec3& v, const Vec3& vp, double amp) {
  ScatterRecord r;
  r.v = v;
  r.vp = vp;
  r.s = 0.3;
  r.tau_in = 0.4;
  r.amplitude = amp;
  return r;
}

}  // namespace

TEST(RecoverNu, Examples) {
  std::vector<BallisticRay> unit, att;
  const double nu0 = 1.3;
  for (int i = 0; i < 10; ++i) {
    unit.push_back(ray(0.25 + 0.5 * i, 2.0, 1.0));
    att.push_back(ray(0.25 + 0.5 * i, 2.0, std::exp(-2.0 * nu0)));
  }
  for (double v : recover_nu(unit, 2.0, 10, 5.0).profile.values) EXPECT_EQ(v, 0.0);
  for (double v : recover_nu(att, 2.0, 10, 5.0).profile.values) EXPECT_NEAR(v, nu0, 1e-14);
  att.push_back(ray(1.0, 1e-6, 1.0));
  EXPECT_EQ(recover_nu(att, 2.0, 10, 5.0).excluded, 1u);
  att.push_back(ray(1.0, 1.0, 0.0));
  EXPECT_THROW(recover_nu(att, 2.0, 10, 5.0), DataError);
}

TEST(RecoverKtilde, Examples) {
  RadialProfile zero_nu;
  for (int i = 0; i <= 10; ++i) {
    zero_nu.radii.push_back(0.5 * i);
    zero_nu.values.push_back(0.0);
  }
  const std::vector<ScatterRecord> recs{record({1, 0, 0}, {0, 1, 0}, 0.7), record({0, 1, 0}, {1, 0, 0}, 0.0)};
  const KernelTable t = recover_ktilde(recs, zero_nu);
  ASSERT_EQ(t.entries.size(), 2u);
  EXPECT_EQ(t.entries[0].ktilde, 0.7);
  EXPECT_EQ(t.entries[1].ktilde, 0.0);
  RadialProfile nu = zero_nu;
  for (double& v : nu.values) v = 2.0;
  const KernelTable u = recover_ktilde({record({1, 0, 0}, {0, 1, 0}, 0.0)}, nu);
  EXPECT_EQ(u.entries[0].ktilde, 0.0);
  const KernelTable skip = recover_ktilde({record({9, 0, 0}, {0, 1, 0}, 1.0)}, nu);
  EXPECT_TRUE(skip.entries.empty());
  EXPECT_EQ(skip.skipped.size(), 1u);
}

TEST(Unweight, Examples) {
  KernelTable t;
  t.entries.push_back({{1, 0, 0}, {0, 1, 0}, 0.4, 0, 0, 0, 1, false});
  t.entries.push_back({{0, 1, 0}, {1, 0, 0}, 0.4, 0, 0, 0, 1, false});
  const KernelTable u = unweight(t, WeightFunction());
  for (const auto& e : u.entries) EXPECT_EQ(e.k, 0.4);
  EXPECT_EQ(u.asymmetry, 0.0);
  KernelTable z;
  z.entries.push_back({{0.5, 0, 0}, {0, 2, 0}, 0.0, 0, 0, 0, 1, false});
  EXPECT_EQ(unweight(z, WeightFunction()).entries[0].k, 0.0);
  // ktilde(v' -> v) w(v') / w(v) with different speeds.
  KernelTable d;
  d.entries.push_back({{0.5, 0, 0}, {0, 2, 0}, 1.0, 0, 0, 0, 1, false});
  const WeightFunction w;
  EXPECT_NEAR(unweight(d, w).entries[0].k, w(Vec3{0, 2, 0}) / w(Vec3{0.5, 0, 0}), 1e-14);
}

TEST(Unweight, SymmetricGroundTruthHasNoAsymmetry) {
  const KernelEvaluator ev(CollisionKernel::hard_sphere(1.0));
  const WeightFunction w;
  KernelTable t;
  const Vec3 a{0.3, -0.2, 0.9}, b{1.1, 0.4, -0.5};
  t.entries.push_back({a, b, ev.ktilde(w, b, a), 0, 0, 0, 1, false});
  t.entries.push_back({b, a, ev.ktilde(w, a, b), 0, 0, 0, 1, false});
  EXPECT_LT(unweight(t, w).asymmetry, 1e-6);
}

TEST(Deconvolution3d, ConstantRecoversUnit) {
  const RadialProfile c = sampled(0.25, 24, [](double) { return std::pow(pi, 1.5); }, 0.5);
  const RadialDeconvolution d = deconvolve_radial_3d(c, DeconvolutionMethod::FourierTikhonov);
  for (double v : d.I.values) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(Deconvolution3d, GaussianOracle) {
  const RadialProfile p = sampled(0.1, 81, [](double s) { return std::pow(pi / 2, 1.5) * std::exp(-s * s / 2); });
  TikhonovOptions o;
  o.lambda = 1e-8;
  o.r_out = 4.0;
  o.n_out = 81;
  EXPECT_LE(sup_error(deconvolve_radial_3d(p, DeconvolutionMethod::FourierTikhonov, o).I, gauss), 1e-3);
}

TEST(Deconvolution3d, ZeroProfileAndErrors) {
  const RadialProfile z = sampled(0.25, 12, [](double) { return 0.0; });
  for (double v : deconvolve_radial_3d(z, DeconvolutionMethod::FourierTikhonov).I.values) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(deconvolve_radial_3d(sampled(0.25, 5, gauss), DeconvolutionMethod::FourierTikhonov), DataError);
}

TEST(ParametricFit, HardSphereAndSeparable) {
  const CollisionFrequencyRule rule;
  RadialProfile hs, sp;
  for (int i = 0; i < 24; ++i) {
    const double s = 0.25 * (i + 0.5);
    hs.radii.push_back(s);
    hs.values.push_back(2 * pi * rule.J(1.0, s));
    sp.radii.push_back(s);
    sp.values.push_back(1.7 * 2 * pi * rule.J(0.5, s));
  }
  FitResult f = parametric_fit(hs);
  EXPECT_NEAR(f.c, 1.0, 0.02);
  EXPECT_NEAR(f.gamma, 1.0, 0.02);
  EXPECT_FALSE(f.out_of_range);
  f = parametric_fit(sp);
  EXPECT_NEAR(f.c, 1.7, 1e-6);
  EXPECT_NEAR(f.gamma, 0.5, 1e-6);
  const RadialDeconvolution d = deconvolve_radial_3d(hs, DeconvolutionMethod::ParametricFit);
  ASSERT_TRUE(d.fit.has_value());
  for (std::size_t i = 0; i < d.I.size(); ++i) EXPECT_NEAR(d.I.values[i], 2 * pi * d.I.radii[i], 1e-5 * (1 + d.I.radii[i]));
}

TEST(ParametricFit, FlagsOutOfRangeExponent) {
  const CollisionFrequencyRule rule;
  RadialProfile p;
  for (int i = 0; i < 24; ++i) {
    const double s = 0.25 * (i + 0.5);
    p.radii.push_back(s);
    p.values.push_back(rule.J(1.3, s));
  }
  const FitResult f = parametric_fit(p);
  EXPECT_TRUE(f.out_of_range);
  EXPECT_EQ(f.gamma_reported, 1.0);
  EXPECT_NEAR(f.gamma, 1.3, 1e-5);
}

TEST(SplitK, Examples) {
  KernelTable t;
  t.entries.push_back({{1, 0, 0}, {0, 1, 0}, 0, 0.8, 0, 0, 1, false});
  RadialProfile zero_I = sampled(0.5, 12, [](double) { return 0.0; });
  KernelTable s = split_k(t, zero_I);
  ASSERT_EQ(s.entries.size(), 1u);
  EXPECT_EQ(s.entries[0].k1, 0.0);
  EXPECT_EQ(s.entries[0].k2, 0.8);
  // Zero k with the exact I gives k2 = k1.
  t.entries[0].k = 0.0;
  const RadialProfile I = sampled(0.5, 12, [](double r) { return 2 * pi * r; });
  s = split_k(t, I);
  EXPECT_NEAR(s.entries[0].k2, s.entries[0].k1, 1e-15);
  const KernelEvaluator ev(CollisionKernel::hard_sphere(1.0));
  EXPECT_NEAR(s.entries[0].k1, ev.k1({1, 0, 0}, {0, 1, 0}), 1e-12);
}

TEST(Deconvolution2d, GaussianOracle) {
  const RadialProfile p = sampled(0.1, 81, [](double s) { return pi / 2 * std::exp(-s * s / 2); });
  TikhonovOptions o;
  o.lambda = 1e-8;
  o.r_out = 4.0;
  o.n_out = 81;
  EXPECT_LE(sup_error(deconvolve_plane_2d(p, o).I, gauss), 1e-3);
}

TEST(Deconvolution2d, ZeroAndHardSphereSlices) {
  for (double v : deconvolve_plane_2d(sampled(0.25, 16, [](double) { return 0.0; })).I.values) EXPECT_EQ(v, 0.0);
  // Hard sphere: qtilde(|eta|, .) = c |eta| is constant, so D = pi c |eta|.
  const double c = 1.0, eta = 1.8;
  RadialProfile D;
  for (int i = 0; i < 16; ++i) {
    D.radii.push_back(0.25 * i);
    D.values.push_back(pi * c * eta);
  }
  for (double v : deconvolve_plane_2d(D).I.values) EXPECT_NEAR(v / (c * eta), 1.0, 0.05);
}

TEST(AssembleQ, HardSphereIdentityAndZero) {
  QTildeGrid g;
  for (int i = 0; i <= 20; ++i) g.a.push_back(0.25 * i + 0.05);
  for (int j = 0; j <= 24; ++j) g.b.push_back(0.25 * j);
  const double c = 1.4;
  for (double a : g.a) g.values.push_back(std::vector<double>(g.b.size(), c * a));
  const std::vector<double> th = InverseSpec::linspace(0.1, pi / 2, 16), rho = InverseSpec::linspace(0.5, 4.0, 12);
  const QGrid q = assemble_q(g, th, rho);
  EXPECT_EQ(q.skipped, 0u);
  for (std::size_t i = 0; i < th.size(); ++i)
    for (std::size_t j = 0; j < rho.size(); ++j) EXPECT_NEAR(q.at(i, j), c * rho[j] * std::cos(th[i]), 1e-12);
  EXPECT_LT(q.symB_relative, 1e-12);

  for (auto& row : g.values) std::fill(row.begin(), row.end(), 0.0);
  const QGrid z = assemble_q(g, th, rho);
  for (double v : z.values) EXPECT_EQ(v, 0.0);
}

TEST(Roundtrip, ZeroKernelRecoversZero) {
  const KernelEvaluator ev(CollisionKernel::zero());
  const ReconstructionReport r = roundtrip(ev, WeightFunction(), BallDomain(Vec3{}, 1.0), SynthesisSpec{}, InverseSpec{}, 1);
  EXPECT_TRUE(r.ok());
  for (double v : r.nu_hat.values) EXPECT_EQ(v, 0.0);
  for (double v : r.I_hat.values) EXPECT_EQ(v, 0.0);
  for (double v : r.q.values)
    if (std::isfinite(v)) {
      EXPECT_EQ(v, 0.0);
    }
  EXPECT_EQ(r.nu_max_rel_err, 0.0);
  EXPECT_EQ(r.q_median_rel_err, 0.0);
}

TEST(Roundtrip, HardSphereStages) {
  const KernelEvaluator ev(CollisionKernel::hard_sphere(1.0));
  const ReconstructionReport r = roundtrip(ev, WeightFunction(), BallDomain(Vec3{}, 1.0), SynthesisSpec{}, InverseSpec{}, 7);
  ASSERT_TRUE(r.ok());
  EXPECT_LE(r.nu_max_rel_err, 0.02);
  EXPECT_LE(r.ktilde_median_rel_err, 0.05);
  EXPECT_LE(r.k2_median_rel_err, 0.07);
  ASSERT_TRUE(r.fit.has_value());
  EXPECT_NEAR(r.fit->c, 1.0, 0.02);
  EXPECT_NEAR(r.fit->gamma, 1.0, 0.02);
  EXPECT_LE(r.q_median_rel_err, 0.05);
  EXPECT_LT(r.q.symB_relative, 0.05);
  EXPECT_LT(r.table.asymmetry, 1e-6);
}
