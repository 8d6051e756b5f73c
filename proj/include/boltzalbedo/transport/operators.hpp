#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/core/parallel.hpp"
#include "boltzalbedo/kernel.hpp"
#include "boltzalbedo/transport/field.hpp"

namespace boltzalbedo {

/// Collision frequency at each velocity node; speeds that repeat share one evaluation.
inline std::vector<double> nu_table(const KernelEvaluator& ev, const VelocityGrid& vg, int threads = 1) {
  std::map<double, std::size_t> by_speed2;
  std::vector<double> speeds2;
  std::vector<std::size_t> slot(vg.size());
  for (std::size_t i = 0; i < vg.size(); ++i) {
    const double s2 = norm2(vg.node(i));
    auto [it, inserted] = by_speed2.emplace(s2, speeds2.size());
    if (inserted) speeds2.push_back(s2);
    slot[i] = it->second;
  }
  std::vector<double> unique(speeds2.size());
  parallel_for(speeds2.size(), threads, [&](std::size_t k) { unique[k] = ev.nu_of_speed(std::sqrt(speeds2[k])); });
  std::vector<double> out(vg.size());
  for (std::size_t i = 0; i < vg.size(); ++i) out[i] = unique[slot[i]];
  return out;
}

/// Discrete weighted scattering operator on a velocity set:
///   M(i, j) = W_i ktilde(v_i -> v_j),  (K h)(v_j) = sum_i M(i, j) h(v_i),
/// with W_i the plain-dv quadrature weight. The diagonal is set to zero: the
/// self-scatter entry samples the integrable |v - v'|^{-1} singularity of k2
/// at its pole, and keeping it would act like a spurious ballistic term.
class ScatteringMatrix {
 public:
  ScatteringMatrix(std::shared_ptr<const KernelEvaluator> ev, WeightFunction w, const VelocityGrid& vg)
      : ev_(std::move(ev)), w_(w), nodes_(vg.nodes()), lebesgue_(vg.lebesgue_weights()) {}

  std::size_t size() const { return nodes_.size(); }
  const KernelEvaluator& evaluator() const { return *ev_; }
  const WeightFunction& weight() const { return w_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (!dense_.empty()) return dense_[i * size() + j];
    return lebesgue_[i] * ev_->ktilde(w_, nodes_[i], nodes_[j]);
  }

  /// M(i, .) for all outputs.
  const std::vector<double>& row(std::size_t i, int threads = 1) const {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (auto it = rows_.find(i); it != rows_.end()) return it->second;
    }
    std::vector<double> r(size());
    parallel_for(size(), threads, [&](std::size_t j) { r[j] = (*this)(i, j); });
    std::lock_guard<std::mutex> lock(mutex_);
    return rows_.emplace(i, std::move(r)).first->second;
  }

  /// M(., j) for all inputs.
  const std::vector<double>& column(std::size_t j, int threads = 1) const {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (auto it = columns_.find(j); it != columns_.end()) return it->second;
    }
    std::vector<double> c(size());
    parallel_for(size(), threads, [&](std::size_t i) { c[i] = (*this)(i, j); });
    std::lock_guard<std::mutex> lock(mutex_);
    return columns_.emplace(j, std::move(c)).first->second;
  }

  /// Evaluates every entry once; intended for small velocity sets.
  void materialize(int threads = 1) {
    if (!dense_.empty()) return;
    std::vector<double> d(size() * size());
    parallel_for(size(), threads, [&](std::size_t i) {
      for (std::size_t j = 0; j < size(); ++j) d[i * size() + j] = (*this)(i, j);
    });
    dense_ = std::move(d);
  }
  bool materialized() const { return !dense_.empty(); }
  const std::vector<double>& dense() const { return dense_; }

 private:
  std::shared_ptr<const KernelEvaluator> ev_;
  WeightFunction w_;
  std::vector<Vec3> nodes_;
  std::vector<double> lebesgue_;
  std::vector<double> dense_;
  mutable std::mutex mutex_;
  mutable std::map<std::size_t, std::vector<double>> rows_;
  mutable std::map<std::size_t, std::vector<double>> columns_;
};

/// Everything a transport solve needs besides the source.
struct TransportOperators {
  std::shared_ptr<const PhaseSpaceGrid> grid;
  std::vector<double> nu;                          // per velocity node
  std::shared_ptr<const ScatteringMatrix> K;       // null means K = 0
  int threads = 1;

  void validate() const {
    if (!grid) throw ConfigurationError("transport operators: missing grid");
    if (nu.size() != grid->nv()) throw ConfigurationError("transport operators: nu table does not match velocity set");
    if (K && K->size() != grid->nv())
      throw ConfigurationError("transport operators: kernel matrix does not match velocity set");
  }

  bool has_scattering() const { return static_cast<bool>(K); }
};

/// Builds operators from a kernel; the scattering matrix is materialised when dense is true.
inline TransportOperators make_operators(std::shared_ptr<const PhaseSpaceGrid> grid,
                                         std::shared_ptr<const KernelEvaluator> ev, const WeightFunction& w,
                                         bool dense, int threads = 1) {
  TransportOperators ops;
  ops.grid = grid;
  ops.threads = threads;
  ops.nu = nu_table(*ev, grid->velocity, threads);
  if (!ev->kernel().is_zero()) {
    auto K = std::make_shared<ScatteringMatrix>(ev, w, grid->velocity);
    if (dense) K->materialize(threads);
    ops.K = std::move(K);
  }
  return ops;
}

}  // namespace boltzalbedo
