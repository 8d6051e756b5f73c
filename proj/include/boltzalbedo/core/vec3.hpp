#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>

namespace boltzalbedo {

/// Point or velocity in R^3.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
  /// Lexicographic total order on (x, y, z); used to canonicalise symmetric kernels.
  friend constexpr auto operator<=>(const Vec3& a, const Vec3& b) {
    if (auto c = a.x <=> b.x; c != 0) return c;
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.z <=> b.z;
  }
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

/// Orthonormal pair (e1, e2) spanning the plane orthogonal to a nonzero vector.
inline std::array<Vec3, 2> orthonormal_complement(const Vec3& n) {
  const Vec3 u = normalized(n);
  // Pick the coordinate axis least aligned with u.
  const double ax = std::abs(u.x), ay = std::abs(u.y), az = std::abs(u.z);
  Vec3 seed = (ax <= ay && ax <= az) ? Vec3{1, 0, 0} : (ay <= az ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
  Vec3 e1 = normalized(seed - dot(seed, u) * u);
  Vec3 e2 = cross(u, e1);
  return {e1, e2};
}

/// Maxwellian mu(v) = exp(-|v|^2).
inline double maxwellian(const Vec3& v) { return std::exp(-norm2(v)); }

}  // namespace boltzalbedo
