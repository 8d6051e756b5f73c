#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "boltzalbedo/albedo.hpp"
#include "boltzalbedo/inverse/roundtrip.hpp"
#include "boltzalbedo/io/config.hpp"
#include "boltzalbedo/io/export.hpp"
#include "boltzalbedo/transport/linear.hpp"
#include "boltzalbedo/transport/nonlinear.hpp"

namespace boltzalbedo {

inline constexpr const char* kArtifactVersion = "1.0.0";

enum class Command { Forward, Albedo, Reconstruct, Roundtrip };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Forward: return "forward";
    case Command::Albedo: return "albedo";
    case Command::Reconstruct: return "reconstruct";
    case Command::Roundtrip: return "roundtrip";
  }
  return "?";
}

inline std::optional<Command> parse_command(const std::string& s) {
  for (Command c : {Command::Forward, Command::Albedo, Command::Reconstruct, Command::Roundtrip})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int stage = 3;
inline constexpr int io = 4;
}  // namespace exit_code

/// Command-line overrides of config fields.
struct RunOptions {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> label;
  std::optional<int> threads;
};

struct ManifestFile {
  std::string name;
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::string label;
  std::string config_sha256;
  std::string artifact_version = kArtifactVersion;
  std::string started;
  std::string finished;
  std::vector<StageRecord> stages;
  std::vector<ManifestFile> files;
  std::vector<std::string> missing_inputs;
  int exit_code = exit_code::ok;
};

struct RunOutcome {
  int exit_code = exit_code::ok;
  std::filesystem::path run_dir;
  RunManifest manifest;
  RunReport report;
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json manifest_to_json(const RunManifest& m) {
  json stages = json::array();
  for (const auto& s : m.stages) stages.push_back({{"name", s.name}, {"status", s.status}, {"reason", s.reason}});
  json files = json::array();
  for (const auto& f : m.files) files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  return {{"command", m.command},
          {"label", m.label},
          {"config_sha256", m.config_sha256},
          {"artifact_version", m.artifact_version},
          {"started", m.started},
          {"finished", m.finished},
          {"stages", std::move(stages)},
          {"files", std::move(files)},
          {"missing_inputs", m.missing_inputs},
          {"exit_code", m.exit_code}};
}

namespace detail {

class Run {
 public:
  Run(Command cmd, ExperimentConfig cfg, const RunOptions& opt) : cmd_(cmd), cfg_(std::move(cfg)) {
    if (opt.seed) cfg_.seed = *opt.seed;
    if (opt.label) cfg_.label = *opt.label;
    if (opt.threads) cfg_.threads = *opt.threads;
    const std::filesystem::path base = !opt.out_dir.empty() ? opt.out_dir : std::filesystem::path(cfg_.output_dir);
    if (base.empty()) throw ConfigValidationError({"output_dir: required (config key or --out-dir)"});
    if (cfg_.label.empty() || cfg_.label.find('/') != std::string::npos)
      throw ConfigValidationError({"label: must be a nonempty name without '/'"});
    if (cfg_.threads < 1) throw ConfigValidationError({"threads: must be >= 1"});
    out_.run_dir = base / cfg_.label;
    auto& m = out_.manifest;
    m.command = to_string(cmd);
    m.label = cfg_.label;
    m.config_sha256 = sha256_hex(cfg_.raw_text);
    m.started = utc_timestamp();
    auto& r = out_.report;
    r.command = m.command;
    r.label = cfg_.label;
    r.seed = cfg_.seed;
    r.config_sha256 = m.config_sha256;
  }

  RunOutcome execute() {
    try {
      prepare_dir();
      switch (cmd_) {
        case Command::Forward: forward(); break;
        case Command::Albedo: albedo(true); break;
        case Command::Reconstruct: reconstruct_from_dataset(); break;
        case Command::Roundtrip:
          if (cfg_.solver.nonlinear || !cfg_.solver.epsilon_list.empty()) forward();
          albedo(true);
          if (data_) reconstruct_stages(*data_);
          else skip("reconstruct", "upstream stage synthesis unavailable");
          break;
      }
      written_ = export_report(out_.report, out_.run_dir);
      for (const auto& f : extra_files_) written_.push_back(f);
    } catch (const IoError& e) {
      io_failure(e.what(), e.path());
    }
    finish();
    return std::move(out_);
  }

 private:
  // Stage plumbing

  void record(const std::string& name, const std::string& status, const std::string& reason = "") {
    out_.manifest.stages.push_back({name, status, reason});
    if (status == "failed" && io_code_ == exit_code::ok) stage_failed_ = true;
  }
  void skip(const std::string& name, const std::string& reason) { record(name, "skipped", reason); }

  bool stage(const std::string& name, const std::function<void()>& body) {
    try {
      body();
      record(name, "ok");
      return true;
    } catch (const IoError&) {
      throw;
    } catch (const NonconvergenceError& e) {
      std::string hist;
      for (double h : e.history()) hist += (hist.empty() ? "" : ", ") + format_double(h);
      record(name, "failed", std::string(e.what()) + " (history: " + hist + ")");
    } catch (const std::exception& e) {
      record(name, "failed", e.what());
    }
    return false;
  }

  void io_failure(const std::string& what, const std::string& path) {
    io_code_ = exit_code::io;
    record("io", "failed", what);
    if (!path.empty()) out_.manifest.missing_inputs.push_back(path);
  }

  void prepare_dir() {
    std::error_code ec;
    std::filesystem::create_directories(out_.run_dir, ec);
    if (ec) throw IoError("cannot create " + out_.run_dir.string() + ": " + ec.message(), "");
    write_file_atomic(out_.run_dir / "config.json", cfg_.raw_text);
    extra_files_.push_back("config.json");
  }

  void write_extra(const std::string& name, const std::string& bytes) {
    write_file_atomic(out_.run_dir / name, bytes);
    extra_files_.push_back(name);
  }

  // Shared model objects

  std::shared_ptr<const KernelEvaluator> evaluator() {
    if (!ev_) {
      const auto& s = cfg_.solver;
      ev_ = std::make_shared<const KernelEvaluator>(cfg_.kernel.build(), SphereQuadrature(s.sphere_polar, s.sphere_azimuth),
                                                    PlanarRule(s.planar_radial, s.planar_azimuth));
    }
    return ev_;
  }

  const TransportOperators& operators() {
    if (!ops_) {
      const auto& s = cfg_.solver;
      auto grid = std::make_shared<const PhaseSpaceGrid>(cfg_.domain, s.dx, VelocityGrid::gauss_hermite(s.velocity_order, s.v_max));
      ops_ = make_operators(grid, evaluator(), cfg_.weight(), s.dense_k, cfg_.threads);
    }
    return *ops_;
  }

  const GammaTensor& gamma_tensor() {
    if (!gamma_) {
      const auto& s = cfg_.solver;
      gamma_.emplace(evaluator()->kernel(), cfg_.weight(), operators().grid->velocity, s.gamma_u_order, s.gamma_polar,
                     s.gamma_azimuth, cfg_.threads);
    }
    return *gamma_;
  }

  // Commands

  void forward() {
    json fw;
    const auto& sc = cfg_.solver.solver;
    stage("linear", [&] {
      const TransportOperators& ops = operators();
      const LinearSolution sol = solve_linear(cfg_.source, sc, ops);
      fw["linear"] = {{"spatial_nodes", ops.grid->nx()},
                      {"velocity_nodes", ops.grid->nv()},
                      {"time_steps", sol.times.size()},
                      {"term_norms", num_array(sol.term_norms)},
                      {"truncation_ratio", num(sol.truncation_ratio)},
                      {"sup_total", num(series_sup(sol.total))}};
    });
    if (cfg_.solver.nonlinear) {
      stage("nonlinear", [&] {
        const NonlinearSolution f = solve_nonlinear(cfg_.source, sc, operators(), gamma_tensor());
        fw["nonlinear"] = {{"epsilon", sc.epsilon},
                           {"history", num_array(f.history)},
                           {"contraction", num(f.contraction)}};
      });
    }
    if (!cfg_.solver.epsilon_list.empty()) {
      stage("gap", [&] {
        out_.report.gap = linearization_gap(cfg_.source, cfg_.solver.epsilon_list, sc, operators(), gamma_tensor());
      });
    }
    out_.report.forward = std::move(fw);
  }

  void albedo(bool with_extras) {
    json al;
    const WeightFunction w = cfg_.weight();
    stage("synthesis", [&] {
      SingularDecomposition d = synthesize_decomposition(*evaluator(), w, cfg_.domain, cfg_.albedo.synthesis,
                                                         cfg_.inverse.spec.noise, cfg_.seed, cfg_.threads);
      write_extra("decomposition.json", decomposition_to_json(d).dump() + "\n");
      al["synthesis"] = {{"ballistic_rays", d.ballistic.size()},
                         {"single_scatter_records", d.single_scatter.size()},
                         {"noise", cfg_.inverse.spec.noise}};
      data_ = std::move(d);
    });
    if (with_extras) {
      std::vector<AlbedoSample> samples;
      if (cfg_.albedo.trace.rays > 0) stage("trace", [&] { samples = trace(); });
      write_extra("samples.csv", samples_csv(samples).str());
      al["trace_samples"] = samples.size();
      const auto& P = cfg_.albedo.probes;
      if (!P.nu.empty() || !P.ktilde.empty()) {
        json probes;
        const bool ok = stage("probes", [&] {
          probes = run_probes();
          if (probes.value("failures", 0) > 0) throw DataError("probes: " + std::to_string(probes["failures"].get<int>()) + " probe(s) failed");
        });
        write_extra("probes.json", probes.dump(2) + "\n");
        al["probes"] = ok ? "ok" : "failed";
      }
    }
    out_.report.albedo = std::move(al);
  }

  std::vector<AlbedoSample> trace() {
    const TransportOperators& ops = operators();
    const LinearSolution sol = solve_linear(cfg_.source, cfg_.solver.solver, ops);
    const auto& vg = ops.grid->velocity;
    std::vector<double> times = cfg_.albedo.trace.times;
    if (times.empty()) times.push_back(sol.times.back());
    std::vector<TraceQuery> q;
    const int rays = cfg_.albedo.trace.rays;
    for (int i = 0; i < rays; ++i) {
      const std::size_t k = static_cast<std::size_t>(i) * vg.size() / static_cast<std::size_t>(rays);
      const Vec3 v = vg.node(k);
      const Vec3 x = cfg_.domain.center() + cfg_.domain.radius() * normalized(v);
      for (double t : times) q.push_back({t, x, v});
    }
    return outgoing_trace(sol, cfg_.source, ops, q);
  }

  Vec3 on_boundary(const Vec3& x) const {
    const Vec3 d = x - cfg_.domain.center();
    if (norm(d) == 0.0) throw DomainError("probe: x must not be the domain center");
    return cfg_.domain.center() + cfg_.domain.radius() * normalized(d);
  }

  json run_probes() {
    const TransportOperators& ops = operators();
    const auto& vg = ops.grid->velocity;
    const auto& P = cfg_.albedo.probes;
    const WeightFunction w = cfg_.weight();
    json out{{"nu", json::array()}, {"ktilde", json::array()}};
    int failures = 0;
    for (const auto& p : P.nu) {
      const Vec3 v = vg.node(vg.nearest(p.v));
      json e{{"v", vec_json(v)}};
      try {
        const Vec3 x = on_boundary(p.x);
        e["x"] = vec_json(x);
        const double direct = ballistic_coefficient(cfg_.domain, x, v, ops.nu[vg.nearest(v)]).attenuation;
        e.update(probe_to_json(probe_nu(ops, x, v, P.spec, P.order), direct));
      } catch (const std::exception& ex) {
        e["error"] = ex.what();
        ++failures;
      }
      out["nu"].push_back(std::move(e));
    }
    for (const auto& p : P.ktilde) {
      const Vec3 v = vg.node(vg.nearest(p.v)), vp = vg.node(vg.nearest(p.vp));
      json e{{"v", vec_json(v)}, {"vp", vec_json(vp)}, {"s", p.s}};
      try {
        const Vec3 x = on_boundary(p.x);
        e["x"] = vec_json(x);
        e.update(probe_to_json(probe_ktilde(ops, x, p.s, v, vp, P.spec, P.order), evaluator()->ktilde(w, vp, v)));
      } catch (const std::exception& ex) {
        e["error"] = ex.what();
        ++failures;
      }
      out["ktilde"].push_back(std::move(e));
    }
    out["failures"] = failures;
    return out;
  }

  void reconstruct_from_dataset() {
    std::filesystem::path p = cfg_.inverse.dataset.empty() ? out_.run_dir / "decomposition.json"
                                                           : std::filesystem::path(cfg_.inverse.dataset);
    if (p.is_relative() && !cfg_.inverse.dataset.empty()) p = cfg_.base_dir / p;
    std::optional<SingularDecomposition> d;
    if (!std::filesystem::exists(p)) {
      io_failure("dataset not found: " + p.string(), p.string());
      skip("reconstruct", "input dataset unavailable");
      return;
    }
    try {
      d = load_decomposition(p);
      record("load_dataset", "ok");
    } catch (const IoError& e) {
      io_failure(e.what(), e.path());
      skip("reconstruct", "input dataset unavailable");
      return;
    } catch (const std::exception& e) {
      record("load_dataset", "failed", e.what());
      skip("reconstruct", "input dataset unavailable");
      return;
    }
    reconstruct_stages(*d);
  }

  void reconstruct_stages(const SingularDecomposition& d) {
    ReconstructionReport rep =
        reconstruct(d, *evaluator(), cfg_.weight(), cfg_.domain, cfg_.inverse.spec, cfg_.threads);
    for (const auto& s : rep.stages) record(s.name, s.status, s.reason);
    out_.report.reconstruction = std::move(rep);
  }

  void finish() {
    auto& m = out_.manifest;
    m.exit_code = io_code_ != exit_code::ok ? io_code_ : stage_failed_ ? exit_code::stage : exit_code::ok;
    m.files.clear();
    for (const auto& name : written_) {
      const auto path = out_.run_dir / name;
      std::error_code ec;
      if (!std::filesystem::exists(path, ec)) continue;
      m.files.push_back({name, std::filesystem::file_size(path, ec), sha256_hex(read_file_bytes(path))});
    }
    m.finished = utc_timestamp();
    try {
      std::error_code ec;
      std::filesystem::create_directories(out_.run_dir, ec);
      write_file_atomic(out_.run_dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");
    } catch (const IoError&) {
      m.exit_code = exit_code::io;
    }
    out_.exit_code = m.exit_code;
  }

  Command cmd_;
  ExperimentConfig cfg_;
  RunOutcome out_;
  std::shared_ptr<const KernelEvaluator> ev_;
  std::optional<TransportOperators> ops_;
  std::optional<GammaTensor> gamma_;
  std::optional<SingularDecomposition> data_;
  std::vector<std::string> extra_files_;
  std::vector<std::string> written_;
  bool stage_failed_ = false;
  int io_code_ = exit_code::ok;
};

}  // namespace detail

/// Runs one command; outputs go to out_dir/label, the manifest is written last.
inline RunOutcome run_command(Command cmd, const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  return detail::Run(cmd, cfg, opt).execute();
}

/// Parse, run and map every failure to an exit code; diagnostics go to err.
inline int run_cli(Command cmd, const std::filesystem::path& config_path, const RunOptions& opt, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config(config_path);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  } catch (const ConfigValidationError& e) {
    err << e.what() << "\n";
    return exit_code::config;
  }
  try {
    const RunOutcome r = run_command(cmd, cfg, opt);
    for (const auto& s : r.manifest.stages)
      if (s.status == "failed") err << "stage " << s.name << " failed: " << s.reason << "\n";
    for (const auto& p : r.manifest.missing_inputs) err << "missing input: " << p << "\n";
    return r.exit_code;
  } catch (const ConfigValidationError& e) {
    err << e.what() << "\n";
    return exit_code::config;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  }
}

}  // namespace boltzalbedo
