#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/vec3.hpp"
#include "boltzalbedo/geometry.hpp"
#include "boltzalbedo/quadrature.hpp"

namespace boltzalbedo {

/// Up to eight (index, weight) pairs of a trilinear stencil; weights sum to 1 when count > 0.
struct Stencil {
  std::array<int, 8> index{};
  std::array<double, 8> weight{};
  int count = 0;

  template <class F>
  double apply(F&& value_at) const {
    double acc = 0.0;
    for (int c = 0; c < count; ++c) acc += weight[c] * value_at(index[c]);
    return acc;
  }
};

namespace detail {

// Cell lookup on a sorted axis, clamped to [axis.front(), axis.back()].
inline void axis_cell(const std::vector<double>& axis, double x, int& lo, double& frac) {
  const int n = static_cast<int>(axis.size());
  if (n == 1) {
    lo = 0;
    frac = 0.0;
    return;
  }
  if (x <= axis.front()) {
    lo = 0;
    frac = 0.0;
    return;
  }
  if (x >= axis.back()) {
    lo = n - 2;
    frac = 1.0;
    return;
  }
  lo = static_cast<int>(std::upper_bound(axis.begin(), axis.end(), x) - axis.begin()) - 1;
  lo = std::clamp(lo, 0, n - 2);
  frac = (x - axis[lo]) / (axis[lo + 1] - axis[lo]);
}

// Trilinear stencil over a tensor grid whose nodes may be missing (index -1);
// missing corners are dropped and the remaining weights renormalised.
template <class IndexOf>
Stencil masked_trilinear(const std::array<const std::vector<double>*, 3>& axes, const Vec3& p, IndexOf&& index_of) {
  int lo[3];
  double fr[3];
  for (int d = 0; d < 3; ++d) detail::axis_cell(*axes[d], p[d], lo[d], fr[d]);
  Stencil s;
  double total = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
    const double w = (di ? fr[0] : 1.0 - fr[0]) * (dj ? fr[1] : 1.0 - fr[1]) * (dk ? fr[2] : 1.0 - fr[2]);
    if (w == 0.0) continue;
    const int i = std::min<int>(lo[0] + di, static_cast<int>(axes[0]->size()) - 1);
    const int j = std::min<int>(lo[1] + dj, static_cast<int>(axes[1]->size()) - 1);
    const int k = std::min<int>(lo[2] + dk, static_cast<int>(axes[2]->size()) - 1);
    const int id = index_of(i, j, k);
    if (id < 0) continue;
    s.index[s.count] = id;
    s.weight[s.count] = w;
    ++s.count;
    total += w;
  }
  if (s.count > 0 && total != 1.0)
    for (int c = 0; c < s.count; ++c) s.weight[c] /= total;
  return s;
}

}  // namespace detail

/// Tensor Gauss-Hermite velocity nodes truncated to |v| <= v_max.
class VelocityGrid {
 public:
  static VelocityGrid gauss_hermite(int order, double v_max) {
    if (order < 1) throw ConfigurationError("velocity order must be >= 1");
    if (!(v_max > 0.0)) throw ConfigurationError("v_max must be positive");
    VelocityGrid g;
    g.order_ = order;
    g.v_max_ = v_max;
    const GaussRule gh = ::boltzalbedo::gauss_hermite(order);
    g.axis_ = gh.nodes;
    g.index_.assign(static_cast<std::size_t>(order) * order * order, -1);
    for (int i = 0; i < order; ++i)
      for (int j = 0; j < order; ++j)
        for (int k = 0; k < order; ++k) {
          const Vec3 v{gh.nodes[i], gh.nodes[j], gh.nodes[k]};
          if (norm(v) > v_max) continue;
          g.index_[(static_cast<std::size_t>(i) * order + j) * order + k] = static_cast<int>(g.nodes_.size());
          g.nodes_.push_back(v);
          const double wgh = gh.weights[i] * gh.weights[j] * gh.weights[k];
          g.gh_weights_.push_back(wgh);
          g.lebesgue_.push_back(gh.weights[i] * std::exp(gh.nodes[i] * gh.nodes[i]) * gh.weights[j] *
                                std::exp(gh.nodes[j] * gh.nodes[j]) * gh.weights[k] *
                                std::exp(gh.nodes[k] * gh.nodes[k]));
        }
    if (g.nodes_.empty()) throw ConfigurationError("velocity truncation removed every node");
    return g;
  }

  int order() const { return order_; }
  double v_max() const { return v_max_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Vec3>& nodes() const { return nodes_; }
  const Vec3& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<double>& axis() const { return axis_; }
  /// Weights calibrated against exp(-|u|^2) du.
  const std::vector<double>& gh_weights() const { return gh_weights_; }
  /// Weights for plain du.
  const std::vector<double>& lebesgue_weights() const { return lebesgue_; }

  int index(int i, int j, int k) const { return index_[(static_cast<std::size_t>(i) * order_ + j) * order_ + k]; }

  std::size_t nearest(const Vec3& v) const {
    std::size_t best = 0;
    double bd = norm2(nodes_[0] - v);
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      const double d = norm2(nodes_[i] - v);
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    return best;
  }

  /// Trilinear stencil in v, clamped to the axis range.
  Stencil stencil(const Vec3& v) const {
    return detail::masked_trilinear({&axis_, &axis_, &axis_}, v, [&](int i, int j, int k) { return index(i, j, k); });
  }

 private:
  int order_ = 0;
  double v_max_ = 0.0;
  std::vector<double> axis_;
  std::vector<int> index_;
  std::vector<Vec3> nodes_;
  std::vector<double> gh_weights_;
  std::vector<double> lebesgue_;
};

/// Uniform Cartesian lattice over the bounding box of a ball, masked to the closed ball.
class SpatialGrid {
 public:
  SpatialGrid(const BallDomain& domain, double dx) : dx_(dx) {
    if (!(dx > 0.0)) throw ConfigurationError("dx must be positive");
    const int half = static_cast<int>(std::ceil(domain.radius() / dx - 1e-12));
    n_ = 2 * half + 1;
    for (int d = 0; d < 3; ++d) {
      axes_[d].resize(n_);
      for (int i = 0; i < n_; ++i) axes_[d][i] = domain.center()[d] + (i - half) * dx;
    }
    index_.assign(static_cast<std::size_t>(n_) * n_ * n_, -1);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k) {
          const Vec3 p{axes_[0][i], axes_[1][j], axes_[2][k]};
          if (norm(p - domain.center()) > domain.radius() * (1.0 + 1e-12)) continue;
          index_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k] = static_cast<int>(points_.size());
          points_.push_back(p);
        }
  }

  double dx() const { return dx_; }
  int per_axis() const { return n_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }
  const Vec3& point(std::size_t i) const { return points_[i]; }
  double cell_volume() const { return dx_ * dx_ * dx_; }
  int index(int i, int j, int k) const { return index_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k]; }

  /// Masked trilinear stencil; empty for points outside the closed ball or with no active corner.
  Stencil stencil(const BallDomain& domain, const Vec3& p) const {
    if (!domain.in_closure(p)) return {};
    return detail::masked_trilinear({&axes_[0], &axes_[1], &axes_[2]}, p,
                                    [&](int i, int j, int k) { return index(i, j, k); });
  }

 private:
  double dx_;
  int n_ = 0;
  std::array<std::vector<double>, 3> axes_;
  std::vector<int> index_;
  std::vector<Vec3> points_;
};

/// Domain, spatial lattice and velocity set shared by all fields of one solve.
struct PhaseSpaceGrid {
  BallDomain domain;
  SpatialGrid space;
  VelocityGrid velocity;

  PhaseSpaceGrid(BallDomain d, double dx, VelocityGrid v) : domain(d), space(d, dx), velocity(std::move(v)) {}

  std::size_t nx() const { return space.size(); }
  std::size_t nv() const { return velocity.size(); }
};

/// One time slice of a phase-space function on (active x-node) x (velocity node).
class PhaseSpaceField {
 public:
  PhaseSpaceField() = default;
  PhaseSpaceField(std::shared_ptr<const PhaseSpaceGrid> grid, double time)
      : grid_(std::move(grid)), values_(grid_->nx() * grid_->nv(), 0.0), time_(time) {}

  const std::shared_ptr<const PhaseSpaceGrid>& grid() const { return grid_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }
  std::size_t nx() const { return grid_->nx(); }
  std::size_t nv() const { return grid_->nv(); }

  double& at(std::size_t xi, std::size_t vi) { return values_[xi * grid_->nv() + vi]; }
  double at(std::size_t xi, std::size_t vi) const { return values_[xi * grid_->nv() + vi]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_grid(const PhaseSpaceField& o) const { return grid_ == o.grid_; }

  /// Value at an arbitrary point for velocity node vi; 0 outside the closed domain.
  double interpolate(const Vec3& x, std::size_t vi) const {
    const Stencil s = grid_->space.stencil(grid_->domain, x);
    return s.apply([&](int xi) { return at(static_cast<std::size_t>(xi), vi); });
  }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Discrete L1(Omega x R^3) norm with cell volume and plain-dv velocity weights.
  double l1_norm() const {
    const auto& lw = grid_->velocity.lebesgue_weights();
    double acc = 0.0;
    for (std::size_t xi = 0; xi < nx(); ++xi)
      for (std::size_t vi = 0; vi < nv(); ++vi) acc += lw[vi] * std::abs(at(xi, vi));
    return acc * grid_->space.cell_volume();
  }

  PhaseSpaceField& axpy(double a, const PhaseSpaceField& x) {
    if (!same_grid(x)) throw ConfigurationError("field grids differ");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
    return *this;
  }
  PhaseSpaceField& scale(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }

 private:
  std::shared_ptr<const PhaseSpaceGrid> grid_;
  std::vector<double> values_;
  double time_ = 0.0;
};

using FieldSeries = std::vector<PhaseSpaceField>;

}  // namespace boltzalbedo
