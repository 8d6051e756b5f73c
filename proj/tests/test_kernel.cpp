#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "boltzalbedo/kernel.hpp"

using namespace boltzalbedo;

namespace {

constexpr double pi = std::numbers::pi;

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

// Rotation taking e3 to a random axis, composed with a random spin about it.
std::array<Vec3, 3> random_rotation(std::mt19937_64& g) {
  const Vec3 a = random_unit(g);
  const auto b = orthonormal_complement(a);
  std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
  const double t = u(g);
  const Vec3 c1 = std::cos(t) * b[0] + std::sin(t) * b[1];
  const Vec3 c2 = -std::sin(t) * b[0] + std::cos(t) * b[1];
  return {c1, c2, a};
}

Vec3 rotate(const std::array<Vec3, 3>& R, const Vec3& v) { return v.x * R[0] + v.y * R[1] + v.z * R[2]; }

// Closed forms for the hard sphere with mu = exp(-|v|^2).
double hs_nu(double c, double s) {
  // (s + 1/(2s)) erf(s) tends to 1/sqrt(pi) as s -> 0.
  const double tail = s == 0.0 ? 1.0 / std::sqrt(pi) : (s + 0.5 / s) * std::erf(s);
  return 2.0 * pi * c * std::pow(pi, 1.5) * (std::exp(-s * s) / std::sqrt(pi) + tail);
}

double hs_k2(double c, const Vec3& u, const Vec3& v) {
  const Vec3 eta = u - v;
  const double a = norm(eta);
  const double d = norm2(u) - norm2(v);
  return 2.0 * pi * c / a * std::exp(-0.25 * a * a - d * d / (4.0 * a * a));
}

}  // namespace

TEST(CollisionKernel, EvalQExamples) {
  EXPECT_NEAR(eval_q(CollisionKernel::hard_sphere(1.0), pi / 3.0, 2.0), 1.0, 1e-14);
  EXPECT_EQ(eval_q(CollisionKernel::zero(), 0.3, 5.0), 0.0);
  const auto sp = CollisionKernel::separable(0.0, [](double t) { return std::cos(t); }, 1.0);
  EXPECT_NEAR(eval_q(sp, 0.0, 7.0), 1.0, 1e-14);
}

TEST(CollisionKernel, RejectsInvalidParameters) {
  EXPECT_THROW(CollisionKernel::hard_sphere(0.0), DomainError);
  EXPECT_THROW(CollisionKernel::separable(1.5, [](double t) { return std::cos(t); }, 1.0), DomainError);
  EXPECT_THROW(CollisionKernel::separable(0.5, [](double) { return 1.0; }, 1.0), DomainError);
  EXPECT_THROW(eval_q(CollisionKernel::hard_sphere(1.0), 2.0, 1.0), DomainError);
  EXPECT_THROW(eval_q(CollisionKernel::hard_sphere(1.0), 0.5, -1.0), DomainError);
}

TEST(PostCollision, Examples) {
  auto pc = post_collision({1, 0, 0}, {0, 1, 0}, {0, 0, 1});
  EXPECT_EQ(pc.u, (Vec3{1, 0, 0}));
  EXPECT_EQ(pc.v, (Vec3{0, 1, 0}));
  pc = post_collision({1, 0, 0}, {-1, 0, 0}, {1, 0, 0});
  EXPECT_EQ(pc.u, (Vec3{-1, 0, 0}));
  EXPECT_EQ(pc.v, (Vec3{1, 0, 0}));
  const double s = 1.0 / std::sqrt(2.0);
  pc = post_collision({1, 0, 0}, {-1, 0, 0}, {s, s, 0});
  EXPECT_NEAR(norm(pc.u - Vec3{0, -1, 0}), 0.0, 1e-15);
  EXPECT_NEAR(norm(pc.v - Vec3{0, 1, 0}), 0.0, 1e-15);
  EXPECT_THROW(post_collision({1, 0, 0}, {0, 1, 0}, {0, 0, 2}), DomainError);
}

TEST(PostCollision, ConservationAndEquilibriumProperty) {
  std::mt19937_64 g(101);
  const auto hs = CollisionKernel::hard_sphere(1.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 u = random_vec(g, 1.5), v = random_vec(g, 1.5), w = random_unit(g);
    const auto pc = post_collision(u, v, w);
    const Vec3 dp = (pc.u + pc.v) - (u + v);
    EXPECT_LE(norm(dp), 1e-12);
    const double e = norm2(u) + norm2(v);
    EXPECT_LE(std::abs(norm2(pc.u) + norm2(pc.v) - e), 1e-12 * std::max(1.0, e));
    const double q = eval_q(hs, collision_angle(v - u, w), norm(v - u));
    EXPECT_LE(std::abs(q * (maxwellian(pc.u) * maxwellian(pc.v) - maxwellian(u) * maxwellian(v))), 1e-12);
  }
}

TEST(EvalI, Examples) {
  const SphereQuadrature sq;
  EXPECT_EQ(eval_I(CollisionKernel::zero(), 3.0, sq), 0.0);
  EXPECT_NEAR(eval_I(CollisionKernel::hard_sphere(1.0), 2.0, sq), 4.0 * pi, 1e-12);
  const auto sp = CollisionKernel::separable(0.0, [](double t) { return std::cos(t); }, 1.0);
  EXPECT_NEAR(eval_I(sp, 0.7, sq), 2.0 * pi, 1e-9);
  EXPECT_NEAR(eval_I(sp, 0.0, sq), 2.0 * pi, 1e-9);
  EXPECT_EQ(eval_I(CollisionKernel::hard_sphere(1.0), 0.0, sq), 0.0);
  EXPECT_THROW(eval_I(sp, -1.0, sq), DomainError);
}

TEST(EvalNu, Examples) {
  const SphereQuadrature sq;
  const CollisionFrequencyRule rule;
  EXPECT_EQ(eval_nu(CollisionKernel::zero(), {1, 2, 3}, rule, sq), 0.0);
  // q0 = cos / (2 pi) has unit sphere integral, so I == 1 and nu is the Gaussian mass.
  const auto unit = CollisionKernel::separable(0.0, [](double t) { return std::cos(t) / (2.0 * pi); }, 1.0);
  EXPECT_NEAR(eval_nu(unit, {0.3, -1.2, 0.4}, rule, sq), std::pow(pi, 1.5), 1e-9);
  const double nu0 = eval_nu(CollisionKernel::hard_sphere(1.0), {0, 0, 0}, rule, sq);
  EXPECT_NEAR(nu0 / (4.0 * pi * pi), 1.0, 1e-6);
}

TEST(EvalNu, MatchesHardSphereClosedForm) {
  const KernelEvaluator ev(CollisionKernel::hard_sphere(1.0));
  for (double s : {0.01, 0.3, 1.0, 2.5, 5.0}) EXPECT_NEAR(ev.nu_of_speed(s) / hs_nu(1.0, s), 1.0, 1e-9) << s;
  EXPECT_NEAR(ev.nu_of_speed(0.0) / hs_nu(1.0, 0.0), 1.0, 1e-9);
}

TEST(EvalNu, RotationInvariance) {
  std::mt19937_64 g(7);
  const SphereQuadrature sq;
  const CollisionFrequencyRule rule;
  const auto sp = CollisionKernel::separable(0.5, [](double t) { return std::cos(t); }, 1.0);
  for (int i = 0; i < 20; ++i) {
    const Vec3 v = random_vec(g, 1.5);
    const auto R = random_rotation(g);
    const double a = eval_nu(sp, v, rule, sq), b = eval_nu(sp, rotate(R, v), rule, sq);
    EXPECT_NEAR(a / b, 1.0, 1e-6);
  }
}

TEST(EvalNu, QuadratureConvergence) {
  const auto sp = CollisionKernel::separable(0.5, [](double t) { return std::cos(t); }, 1.0);
  const KernelEvaluator a(sp), b(sp, SphereQuadrature(64, 128), PlanarRule(), CollisionFrequencyRule(20, 16));
  for (double s : {0.0, 0.7, 2.0, 4.5}) EXPECT_NEAR(a.nu_of_speed(s) / b.nu_of_speed(s), 1.0, 1e-6) << s;
}

TEST(EvalK1, Examples) {
  const SphereQuadrature sq;
  EXPECT_EQ(eval_k1(CollisionKernel::zero(), {1, 0, 0}, {0, 1, 0}, sq), 0.0);
  const auto hs = CollisionKernel::hard_sphere(1.0);
  EXPECT_EQ(eval_k1(hs, {0.4, 0.1, 0}, {0.4, 0.1, 0}, sq), 0.0);
  EXPECT_NEAR(eval_k1(hs, {1, 0, 0}, {-1, 0, 0}, sq), 4.0 * pi * std::exp(-1.0), 1e-12);
}

TEST(EvalK2, Examples) {
  const PlanarRule rule;
  EXPECT_EQ(eval_k2(CollisionKernel::zero(), {1, 0, 0}, {0, 1, 0}, rule), 0.0);
  const auto hs = CollisionKernel::hard_sphere(1.0);
  EXPECT_NEAR(eval_k2(hs, {1, 0, 0}, {-1, 0, 0}, rule), pi * std::exp(-1.0), 1e-12);
  EXPECT_THROW(eval_k2(hs, {1, 0, 0}, {1, 0, 0}, rule), SingularInputError);
}

TEST(EvalK2, MatchesHardSphereClosedForm) {
  std::mt19937_64 g(3);
  const KernelEvaluator ev(CollisionKernel::hard_sphere(1.3));
  for (int i = 0; i < 100; ++i) {
    const Vec3 u = random_vec(g, 1.2), v = random_vec(g, 1.2);
    EXPECT_NEAR(ev.k2(u, v) / hs_k2(1.3, u, v), 1.0, 1e-9);
  }
}

TEST(ScatterKernel, SymmetryProperty) {
  std::mt19937_64 g(5);
  const auto sp = CollisionKernel::separable(0.5, [](double t) { return std::cos(t) * std::cos(t); }, 1.0);
  const KernelEvaluator ev(sp);
  for (int i = 0; i < 100; ++i) {
    const Vec3 u = random_vec(g, 1.2), v = random_vec(g, 1.2);
    EXPECT_EQ(ev.k1(u, v), ev.k1(v, u));
    EXPECT_EQ(ev.k2(u, v), ev.k2(v, u));
    EXPECT_EQ(ev.k(u, v), ev.k(v, u));
  }
}

TEST(ScatterKernel, Examples) {
  const SphereQuadrature sq;
  const PlanarRule rule;
  EXPECT_EQ(eval_scatter_kernel(CollisionKernel::zero(), {1, 0, 0}, {0, 1, 0}, sq, rule), 0.0);
  const double k = eval_scatter_kernel(CollisionKernel::hard_sphere(1.0), {1, 0, 0}, {-1, 0, 0}, sq, rule);
  EXPECT_NEAR(k, pi * std::exp(-1.0) - 4.0 * pi * std::exp(-1.0), 1e-12);
}

TEST(EvalQtilde, Examples) {
  const auto hs = CollisionKernel::hard_sphere(2.0);
  EXPECT_NEAR(eval_qtilde(hs, 1.5, 2.0), 3.0, 1e-12);
  EXPECT_EQ(eval_qtilde(CollisionKernel::zero(), 1.0, 1.0), 0.0);
  EXPECT_THROW(eval_qtilde(hs, 0.0, 0.0), DomainError);
  // B = q sin(theta) is symmetric about pi/4 for the hard sphere.
  for (double th : {0.1, 0.4, 0.7, 1.2}) {
    const double r = 1.7;
    EXPECT_NEAR(eval_q(hs, th, r) * std::sin(th), eval_q(hs, pi / 2 - th, r) * std::sin(pi / 2 - th), 1e-12);
  }
}

TEST(EvalQtilde, CartesianIdentityForSymmetricKernel) {
  const auto hs = CollisionKernel::hard_sphere(1.0);
  for (double th : {0.05, 0.3, 0.9, 1.4, pi / 2})
    for (double r : {0.5, 1.0, 3.0}) EXPECT_NEAR(eval_qtilde(hs, r * std::cos(th), r * std::sin(th)), eval_q(hs, th, r), 1e-10);
}

TEST(WeightedKernel, Examples) {
  const SphereQuadrature sq;
  const PlanarRule rule;
  const WeightFunction w;
  const auto hs = CollisionKernel::hard_sphere(1.0);
  const Vec3 v{1, 0, 0}, vp{0, 0, -1};
  EXPECT_NEAR(eval_weighted_kernel(hs, w, v, vp, sq, rule), eval_scatter_kernel(hs, v, vp, sq, rule), 1e-14);
  EXPECT_EQ(eval_weighted_kernel(CollisionKernel::zero(), w, v, vp, sq, rule), 0.0);
  const Vec3 a{0.2, 0.1, 0}, b{1.5, -0.5, 0.3};
  EXPECT_NEAR(eval_weighted_kernel(hs, w, a, b, sq, rule),
              eval_scatter_kernel(hs, a, b, sq, rule) * w(b) / w(a), 1e-12);
}
