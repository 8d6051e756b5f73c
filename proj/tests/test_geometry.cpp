#include <gtest/gtest.h>

#include <random>

#include "boltzalbedo/geometry.hpp"

using namespace boltzalbedo;

namespace {
const BallDomain unit{Vec3{}, 1.0};
}

TEST(ExitTime, Examples) {
  EXPECT_NEAR(exit_time(unit, {1, 0, 0}, {1, 0, 0}, Direction::Backward), 2.0, 1e-14);
  EXPECT_NEAR(exit_time(unit, {0, 0, 0}, {2, 0, 0}, Direction::Backward), 0.5, 1e-14);
  EXPECT_NEAR(exit_time(unit, {1, 0, 0}, {0, 1, 0}, Direction::Backward), 0.0, 1e-14);
  EXPECT_NEAR(exit_time(unit, {1, 0, 0}, {1, 0, 0}, Direction::Forward), 0.0, 1e-14);
}

TEST(ClassifyBoundary, Examples) {
  EXPECT_EQ(classify_boundary(unit, {1, 0, 0}, {1, 0, 0}), BoundaryClass::Outgoing);
  EXPECT_EQ(classify_boundary(unit, {1, 0, 0}, {-1, 0, 0}), BoundaryClass::Incoming);
  EXPECT_EQ(classify_boundary(unit, {1, 0, 0}, {0, 1, 0}), BoundaryClass::Grazing);
}

TEST(TraceBackward, Examples) {
  auto t = trace_backward(unit, {0, 0, 0}, {1, 0, 0});
  EXPECT_NEAR(norm(t.footpoint - Vec3{-1, 0, 0}), 0.0, 1e-14);
  EXPECT_NEAR(t.tau, 1.0, 1e-14);
  t = trace_backward(unit, {0.5, 0, 0}, {1, 0, 0});
  EXPECT_NEAR(norm(t.footpoint - Vec3{-1, 0, 0}), 0.0, 1e-14);
  EXPECT_NEAR(t.tau, 1.5, 1e-14);
  t = trace_backward(unit, {1, 0, 0}, {1, 0, 0});
  EXPECT_NEAR(norm(t.footpoint - Vec3{-1, 0, 0}), 0.0, 1e-14);
  EXPECT_NEAR(t.tau, 2.0, 1e-14);
}

TEST(ExitTime, AdditivityAndFootpointProperty) {
  std::mt19937_64 g(17);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const BallDomain ball(Vec3{0.3, -0.2, 1.1}, 2.5);
  for (int i = 0; i < 500; ++i) {
    Vec3 d{n(g), n(g), n(g)};
    d = normalized(d);
    const Vec3 x = ball.center() + (ball.radius() * std::cbrt(u(g))) * d;
    Vec3 v{n(g), n(g), n(g)};
    const double back = exit_time(ball, x, v, Direction::Backward);
    const double fwd = exit_time(ball, x, v, Direction::Forward);
    // Full chord length from the quadratic |c + t v|^2 = R^2.
    const Vec3 c = x - ball.center();
    const double a = norm2(v), b = dot(c, v), cc = norm2(c) - ball.radius() * ball.radius();
    const double chord = 2.0 * std::sqrt(b * b - a * cc) / a;
    EXPECT_NEAR(back + fwd, chord, 1e-10 * std::max(1.0, chord));
    const auto tr = trace_backward(ball, x, v);
    EXPECT_TRUE(ball.on_boundary(tr.footpoint));
    EXPECT_NEAR(norm(tr.footpoint - (x - back * v)), 0.0, 1e-10);
  }
}

TEST(BallDomain, RejectsBadInput) {
  EXPECT_THROW(BallDomain(Vec3{}, 0.0), std::exception);
  EXPECT_THROW(exit_time(unit, {0, 0, 0}, {0, 0, 0}, Direction::Backward), std::exception);
  EXPECT_THROW(exit_time(unit, {3, 0, 0}, {1, 0, 0}, Direction::Backward), std::exception);
}
