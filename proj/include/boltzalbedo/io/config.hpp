#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "boltzalbedo/albedo.hpp"
#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/inverse/roundtrip.hpp"
#include "boltzalbedo/kernel.hpp"
#include "boltzalbedo/transport/linear.hpp"
#include "boltzalbedo/transport/source.hpp"

namespace boltzalbedo {

using json = nlohmann::json;

/// All validation problems of a config, each prefixed by its key path.
class ConfigValidationError : public ConfigurationError {
 public:
  explicit ConfigValidationError(std::vector<std::string> errors)
      : ConfigurationError(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string out = "invalid config:";
    for (const auto& s : e) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> errors_;
};

/// Unreadable config or dataset.
class InputError : public std::runtime_error {
 public:
  InputError(const std::string& what, std::string path) : std::runtime_error(what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct KernelConfig {
  std::string form = "hard_sphere";  // hard_sphere | separable_power | zero
  double c = 1.0;
  double gamma = 0.0;
  double c_cut = 1.0;
  std::string q0_table;          // CSV with columns theta,q0
  std::string q0_named;          // cos | cos_squared
  std::vector<double> q0_values; // resolved table

  CollisionKernel build() const {
    if (form == "hard_sphere") return CollisionKernel::hard_sphere(c);
    if (form == "zero") return CollisionKernel::zero();
    return CollisionKernel::separable(gamma, q0_values, c_cut);
  }
};

struct SolverBlock {
  SolverConfig solver;
  double dx = 0.2;
  double v_max = 5.0;
  int velocity_order = 20;
  int sphere_polar = 32;
  int sphere_azimuth = 64;
  int planar_radial = 20;
  int planar_azimuth = 32;
  bool dense_k = false;
  bool nonlinear = false;
  std::vector<double> epsilon_list;
  int gamma_u_order = 8;
  int gamma_polar = 8;
  int gamma_azimuth = 16;
};

struct TraceBlock {
  int rays = 0;  // outgoing rays sampled on the velocity set
  std::vector<double> times;
};

struct NuProbe {
  Vec3 x;
  Vec3 v;
};

struct KtildeProbe {
  Vec3 x;
  double s = 0.0;
  Vec3 v;
  Vec3 vp;
};

struct ProbeBlock {
  ProbeSpec spec;
  int order = 2;
  std::vector<NuProbe> nu;
  std::vector<KtildeProbe> ktilde;
};

struct AlbedoBlock {
  SynthesisSpec synthesis;
  TraceBlock trace;
  ProbeBlock probes;
};

struct InverseBlock {
  InverseSpec spec;
  std::string dataset;  // decomposition JSON for reconstruct; empty means the run directory
};

struct ExperimentConfig {
  std::string label = "run";
  std::uint64_t seed = 0;
  std::string output_dir;
  int threads = 1;
  KernelConfig kernel;
  double weight_c = 1.0;
  double weight_m = 2.0;
  BallDomain domain{Vec3{}, 1.0};
  SolverBlock solver;
  BoundarySource source;
  AlbedoBlock albedo;
  InverseBlock inverse;

  std::filesystem::path base_dir;  // directory of the config file
  std::string raw_text;            // config bytes as read

  WeightFunction weight() const { return WeightFunction(weight_c, weight_m); }
};

namespace detail {

// Walks one JSON object, records errors with key paths and flags unknown keys.
class ConfigReader {
 public:
  ConfigReader(const json* node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (node_ && !node_->is_object()) {
      error("", "must be an object");
      node_ = nullptr;
    }
  }

  bool present() const { return node_ != nullptr; }
  bool has(const char* key) const { return node_ && node_->contains(key); }

  template <class T>
  T get(const char* key, T fallback) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return fallback;
    return convert<T>(key, fallback);
  }

  template <class T>
  std::optional<T> required(const char* key) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) {
      error(key, "required");
      return std::nullopt;
    }
    const std::size_t before = errors_.size();
    T v = convert<T>(key, T{});
    if (errors_.size() != before) return std::nullopt;
    return v;
  }

  Vec3 vec3(const char* key, Vec3 fallback) {
    const auto v = get<std::vector<double>>(key, {fallback.x, fallback.y, fallback.z});
    if (v.size() != 3) {
      error(key, "must have 3 components");
      return fallback;
    }
    return {v[0], v[1], v[2]};
  }

  ConfigReader child(const char* key) {
    seen_.insert(key);
    return ConfigReader(node_ && node_->contains(key) ? &(*node_)[key] : nullptr, join(key), errors_);
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    return node_ && node_->contains(key) ? &(*node_)[key] : nullptr;
  }

  void error(const std::string& key, const std::string& msg) const {
    errors_.push_back((key.empty() ? path_ : join(key)) + ": " + msg);
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [k, v] : node_->items())
      if (!seen_.count(k)) errors_.push_back(join(k) + ": unknown key");
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  template <class T>
  T convert(const char* key, T fallback) {
    const json& j = (*node_)[key];
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!j.is_number()) throw std::invalid_argument("number");
      } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
        if (!j.is_number_integer()) throw std::invalid_argument("integer");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) throw std::invalid_argument("boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!j.is_string()) throw std::invalid_argument("string");
      }
      return j.get<T>();
    } catch (const std::exception&) {
      error(key, "has the wrong type");
      return fallback;
    }
  }

  const json* node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline std::vector<double> read_q0_table(const std::filesystem::path& path, std::vector<std::string>& errors) {
  std::ifstream in(path);
  if (!in) {
    errors.push_back("kernel.q0_table: cannot read " + path.string());
    return {};
  }
  std::string line;
  std::getline(in, line);
  if (line.find("theta") == std::string::npos || line.find("q0") == std::string::npos) {
    errors.push_back("kernel.q0_table: header must be theta,q0");
    return {};
  }
  std::vector<std::pair<double, double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) {
      errors.push_back("kernel.q0_table: malformed row '" + line + "'");
      return {};
    }
    try {
      rows.push_back({std::stod(a), std::stod(b)});
    } catch (const std::exception&) {
      errors.push_back("kernel.q0_table: malformed row '" + line + "'");
      return {};
    }
  }
  if (rows.size() < 2) {
    errors.push_back("kernel.q0_table: need at least two rows");
    return {};
  }
  const double h = kHalfPi / static_cast<double>(rows.size() - 1);
  std::vector<double> out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (std::abs(rows[k].first - k * h) > 1e-9) {
      errors.push_back("kernel.q0_table: theta must be a uniform grid over [0, pi/2]");
      return {};
    }
    out.push_back(rows[k].second);
  }
  return out;
}

inline std::vector<double> named_q0(const std::string& name) {
  const int n = CollisionKernel::kDefaultTableSize;
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) {
    const double c = k == n - 1 ? 0.0 : std::cos(k * kHalfPi / (n - 1));
    t[k] = name == "cos" ? c : c * c;
  }
  return t;
}

}  // namespace detail

/// Parses and validates a config document; every problem is reported at once.
inline ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = ".") {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigValidationError({std::string("<document>: not valid JSON: ") + e.what()});
  }
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  cfg.raw_text = text;
  detail::ConfigReader top(&root, "", errors);
  if (!root.is_object()) throw ConfigValidationError(errors);

  cfg.label = top.get<std::string>("label", cfg.label);
  if (cfg.label.empty() || cfg.label.find('/') != std::string::npos || cfg.label == "." || cfg.label == "..")
    top.error("label", "must be a nonempty name without '/'");
  cfg.seed = top.get<std::uint64_t>("seed", cfg.seed);
  cfg.output_dir = top.get<std::string>("output_dir", cfg.output_dir);
  cfg.threads = top.get<int>("threads", cfg.threads);
  if (cfg.threads < 1) top.error("threads", "must be >= 1");

  // kernel
  {
    auto k = top.child("kernel");
    if (!k.present()) top.error("kernel", "required");
    auto form = k.required<std::string>("form");
    if (form) cfg.kernel.form = *form;
    auto& K = cfg.kernel;
    if (K.form == "hard_sphere") {
      K.c = k.get<double>("c", K.c);
      if (!(K.c > 0.0)) k.error("c", "must be positive");
    } else if (K.form == "separable_power") {
      auto g = k.required<double>("gamma");
      if (g) {
        K.gamma = *g;
        if (!(K.gamma >= 0.0 && K.gamma <= 1.0))
          k.error("gamma", "must lie in [0, 1] (hard-potential range of q = rho^gamma q0(theta))");
      }
      K.c_cut = k.get<double>("c_cut", K.c_cut);
      if (!(K.c_cut > 0.0)) k.error("c_cut", "must be positive");
      K.q0_table = k.get<std::string>("q0_table", "");
      K.q0_named = k.get<std::string>("q0", "");
      if (K.q0_table.empty() == K.q0_named.empty()) {
        k.error("q0_table", "give exactly one of q0_table (CSV path) or q0 (cos | cos_squared)");
      } else if (!K.q0_table.empty()) {
        std::filesystem::path p(K.q0_table);
        if (p.is_relative()) p = base_dir / p;
        K.q0_values = detail::read_q0_table(p, errors);
      } else if (K.q0_named == "cos" || K.q0_named == "cos_squared") {
        K.q0_values = detail::named_q0(K.q0_named);
      } else {
        k.error("q0", "must be cos or cos_squared");
      }
      if (!K.q0_values.empty()) {
        try {
          CollisionKernel::separable(K.gamma, K.q0_values, K.c_cut);
        } catch (const std::exception& e) {
          if (K.gamma >= 0.0 && K.gamma <= 1.0) k.error("q0_table", e.what());
        }
      }
    } else if (K.form != "zero") {
      k.error("form", "must be hard_sphere, separable_power or zero");
    }
    k.finish();
  }

  // weight
  {
    auto w = top.child("weight");
    cfg.weight_c = w.get<double>("c", cfg.weight_c);
    cfg.weight_m = w.get<double>("m", cfg.weight_m);
    if (!(cfg.weight_c > 0.0)) w.error("c", "must be positive");
    if (!(cfg.weight_m > 1.5)) w.error("m", "must exceed 3/2");
    w.finish();
  }

  // domain
  {
    auto d = top.child("domain");
    if (!d.present()) top.error("domain", "required");
    const Vec3 c = d.vec3("center", Vec3{});
    auto r = d.required<double>("radius");
    if (r && !(*r > 0.0)) d.error("radius", "must be positive");
    if (r && *r > 0.0) cfg.domain = BallDomain(c, *r);
    d.finish();
  }

  // solver
  {
    auto s = top.child("solver");
    auto& S = cfg.solver;
    S.dx = s.get<double>("dx", S.dx);
    S.solver.dt = s.get<double>("dt", S.solver.dt);
    S.solver.horizon = s.get<double>("horizon", S.solver.horizon);
    S.solver.duhamel_order = s.get<int>("duhamel_order", S.solver.duhamel_order);
    S.solver.picard_iters = s.get<int>("picard_iters", S.solver.picard_iters);
    S.solver.epsilon = s.get<double>("epsilon", S.solver.epsilon);
    S.epsilon_list = s.get<std::vector<double>>("epsilon_list", {});
    S.nonlinear = s.get<bool>("nonlinear", S.nonlinear);
    S.v_max = s.get<double>("v_max", S.v_max);
    S.velocity_order = s.get<int>("velocity_order", S.velocity_order);
    S.sphere_polar = s.get<int>("sphere_polar", S.sphere_polar);
    S.sphere_azimuth = s.get<int>("sphere_azimuth", S.sphere_azimuth);
    S.planar_radial = s.get<int>("planar_radial", S.planar_radial);
    S.planar_azimuth = s.get<int>("planar_azimuth", S.planar_azimuth);
    S.dense_k = s.get<bool>("dense_k", S.dense_k);
    S.gamma_u_order = s.get<int>("gamma_u_order", S.gamma_u_order);
    S.gamma_polar = s.get<int>("gamma_polar", S.gamma_polar);
    S.gamma_azimuth = s.get<int>("gamma_azimuth", S.gamma_azimuth);
    if (!(S.dx > 0.0)) s.error("dx", "must be positive");
    if (!(S.solver.dt > 0.0)) s.error("dt", "must be positive");
    if (!(S.solver.horizon > 0.0)) s.error("horizon", "must be positive");
    if (S.solver.duhamel_order < 0) s.error("duhamel_order", "must be >= 0");
    if (S.solver.picard_iters < 1) s.error("picard_iters", "must be >= 1");
    if (!(S.solver.epsilon > 0.0)) s.error("epsilon", "must be positive");
    for (std::size_t i = 0; i < S.epsilon_list.size(); ++i) {
      if (!(S.epsilon_list[i] > 0.0)) s.error("epsilon_list", "entries must be positive");
      if (i > 0 && !(S.epsilon_list[i] < S.epsilon_list[i - 1])) s.error("epsilon_list", "must be strictly decreasing");
    }
    if (!(S.v_max > 0.0)) s.error("v_max", "must be positive");
    if (S.velocity_order < 2) s.error("velocity_order", "must be >= 2");
    if (S.sphere_polar < 2 || S.sphere_polar % 2 != 0) s.error("sphere_polar", "must be even and >= 2");
    if (S.sphere_azimuth < 1) s.error("sphere_azimuth", "must be >= 1");
    if (S.planar_radial < 1 || S.planar_azimuth < 1) s.error("planar_radial", "planar rule too small");
    if (S.gamma_u_order < 2 || S.gamma_polar < 2 || S.gamma_azimuth < 1) s.error("gamma_u_order", "collision-term rule too small");
    s.finish();
  }

  // source
  {
    auto s = top.child("source");
    BoundarySource& src = cfg.source;
    src.amplitude = s.get<double>("amplitude", 1.0);
    src.t0 = s.get<double>("t0", 0.3);
    src.sigma_t = s.get<double>("sigma_t", 0.1);
    src.x0 = s.vec3("x0", cfg.domain.center() - Vec3{cfg.domain.radius(), 0.0, 0.0});
    src.sigma_x = s.get<double>("sigma_x", 0.3 * cfg.domain.radius());
    src.v0 = s.vec3("v0", Vec3{1.0, 0.0, 0.0});
    src.sigma_v = s.get<double>("sigma_v", 0.5);
    if (!(src.sigma_t > 0.0)) s.error("sigma_t", "must be positive");
    if (!(src.sigma_x > 0.0)) s.error("sigma_x", "must be positive");
    if (!(src.sigma_v > 0.0)) s.error("sigma_v", "must be positive");
    if (!std::isfinite(src.amplitude)) s.error("amplitude", "must be finite");
    s.finish();
  }

  // albedo
  {
    auto a = top.child("albedo");
    {
      auto y = a.child("synthesis");
      auto& S = cfg.albedo.synthesis;
      S.v_max = y.get<double>("v_max", cfg.solver.v_max);
      S.speed_bins = y.get<int>("speed_bins", S.speed_bins);
      S.rays_per_speed = y.get<int>("rays_per_speed", S.rays_per_speed);
      S.eta = y.get<std::vector<double>>("eta", S.eta);
      S.zeta_count = y.get<int>("zeta_count", S.zeta_count);
      S.zeta_max = y.get<double>("zeta_max", S.zeta_max);
      try {
        S.validate();
      } catch (const std::exception& e) {
        y.error("", e.what());
      }
      y.finish();
    }
    {
      auto t = a.child("trace");
      cfg.albedo.trace.rays = t.get<int>("rays", 0);
      cfg.albedo.trace.times = t.get<std::vector<double>>("times", {});
      if (cfg.albedo.trace.rays < 0) t.error("rays", "must be >= 0");
      for (double x : cfg.albedo.trace.times)
        if (!(x >= 0.0 && x <= cfg.solver.solver.horizon)) t.error("times", "must lie within [0, solver.horizon]");
      t.finish();
    }
    {
      auto p = a.child("probes");
      auto& P = cfg.albedo.probes;
      P.spec.nu_widths = p.get<std::vector<double>>("nu_widths", P.spec.nu_widths);
      const auto kw = p.get<std::vector<std::vector<double>>>("ktilde_widths", {});
      if (!kw.empty()) {
        P.spec.ktilde_widths.clear();
        for (const auto& w : kw) {
          if (w.size() != 2) p.error("ktilde_widths", "entries must be [eps1, eps2] pairs");
          else P.spec.ktilde_widths.push_back({w[0], w[1]});
        }
      }
      P.spec.window_multiplier = p.get<double>("window_multiplier", P.spec.window_multiplier);
      P.order = p.get<int>("order", P.order);
      if (P.order < 0 || P.order > 2) p.error("order", "must be 0, 1 or 2");
      try {
        P.spec.validate();
      } catch (const std::exception& e) {
        p.error("", e.what());
      }
      if (const json* nu = p.raw("nu")) {
        if (!nu->is_array()) p.error("nu", "must be a list");
        else
          for (std::size_t i = 0; i < nu->size(); ++i) {
            detail::ConfigReader e(&(*nu)[i], p.join("nu[" + std::to_string(i) + "]"), errors);
            P.nu.push_back({e.vec3("x", Vec3{}), e.vec3("v", Vec3{})});
            e.finish();
          }
      }
      if (const json* kt = p.raw("ktilde")) {
        if (!kt->is_array()) p.error("ktilde", "must be a list");
        else
          for (std::size_t i = 0; i < kt->size(); ++i) {
            detail::ConfigReader e(&(*kt)[i], p.join("ktilde[" + std::to_string(i) + "]"), errors);
            KtildeProbe q;
            q.x = e.vec3("x", Vec3{});
            q.s = e.get<double>("s", 0.0);
            q.v = e.vec3("v", Vec3{});
            q.vp = e.vec3("vp", Vec3{});
            P.ktilde.push_back(q);
            e.finish();
          }
      }
      p.finish();
    }
    a.finish();
  }

  // inverse
  {
    auto i = top.child("inverse");
    auto& S = cfg.inverse.spec;
    const std::string method = i.get<std::string>("method", "fourier_tikhonov");
    if (method == "fourier_tikhonov") S.i_method = DeconvolutionMethod::FourierTikhonov;
    else if (method == "parametric_fit") S.i_method = DeconvolutionMethod::ParametricFit;
    else i.error("method", "must be fourier_tikhonov or parametric_fit");
    S.lambda = i.get<double>("lambda", S.lambda);
    S.bins = i.get<int>("bins", cfg.albedo.synthesis.speed_bins);
    S.v_max = cfg.albedo.synthesis.v_max;
    S.noise = i.get<double>("noise", S.noise);
    S.i_points = i.get<int>("i_points", S.i_points);
    S.qtilde_points = i.get<int>("qtilde_points", S.qtilde_points);
    {
      auto t = i.child("theta");
      S.theta_min = t.get<double>("min", S.theta_min);
      S.theta_max = t.get<double>("max", S.theta_max);
      S.n_theta = t.get<int>("count", S.n_theta);
      t.finish();
    }
    {
      auto r = i.child("rho");
      S.rho_min = r.get<double>("min", S.rho_min);
      S.rho_max = r.get<double>("max", S.rho_max);
      S.n_rho = r.get<int>("count", S.n_rho);
      r.finish();
    }
    cfg.inverse.dataset = i.get<std::string>("dataset", "");
    try {
      S.validate();
    } catch (const std::exception& e) {
      i.error("", e.what());
    }
    i.finish();
  }

  top.finish();
  if (!errors.empty()) throw ConfigValidationError(errors);
  return cfg;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return parse_config_text(text, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace boltzalbedo
