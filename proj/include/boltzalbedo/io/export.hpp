#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "boltzalbedo/albedo.hpp"
#include "boltzalbedo/core/errors.hpp"
#include "boltzalbedo/inverse/roundtrip.hpp"
#include "boltzalbedo/transport/nonlinear.hpp"

namespace boltzalbedo {

using json = nlohmann::json;

inline constexpr const char* kReportSchema = "boltzalbedo.report/1";
inline constexpr const char* kDecompositionSchema = "boltzalbedo.decomposition/1";

/// File-system failure while reading or writing artifacts.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::string path) : std::runtime_error(what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

inline std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string(), path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Writes through a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string(), tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("cannot write " + tmp.string(), tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message(), path.string());
}

/// Scientific notation with 17 significant digits; non-finite values as nan / inf / -inf.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_double(r[i]);
      out += "\n";
    }
    return out;
  }
};

/// Non-finite doubles become null so the document stays valid JSON.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json num_array(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(num(x));
  return a;
}

inline json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DataError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Decomposition dataset

inline json decomposition_to_json(const SingularDecomposition& d) {
  json j;
  j["schema"] = kDecompositionSchema;
  json b = json::array();
  for (const auto& r : d.ballistic)
    b.push_back({{"x", vec_json(r.x)}, {"v", vec_json(r.v)}, {"attenuation", r.attenuation}, {"tau", r.tau},
                 {"footpoint", vec_json(r.footpoint)}});
  json s = json::array();
  for (const auto& r : d.single_scatter)
    s.push_back({{"x", vec_json(r.x)}, {"v", vec_json(r.v)}, {"vp", vec_json(r.vp)}, {"lag", r.lag}, {"s", r.s},
                 {"tau_in", r.tau_in}, {"amplitude", r.amplitude}, {"dphi", r.dphi}});
  json m = json::array();
  for (const auto& r : d.residual)
    m.push_back({{"t", r.t}, {"x", vec_json(r.x)}, {"v", vec_json(r.v)}, {"total", r.total}, {"residual", r.residual}});
  j["ballistic"] = std::move(b);
  j["single_scatter"] = std::move(s);
  j["residual"] = std::move(m);
  return j;
}

inline SingularDecomposition decomposition_from_json(const json& j) {
  try {
    if (j.value("schema", std::string()) != kDecompositionSchema) throw DataError("decomposition: unknown schema");
    SingularDecomposition d;
    for (const auto& r : j.at("ballistic"))
      d.ballistic.push_back({vec_from_json(r.at("x")), vec_from_json(r.at("v")), r.at("attenuation").get<double>(),
                             r.at("tau").get<double>(), vec_from_json(r.at("footpoint"))});
    for (const auto& r : j.at("single_scatter")) {
      ScatterRecord s;
      s.x = vec_from_json(r.at("x"));
      s.v = vec_from_json(r.at("v"));
      s.vp = vec_from_json(r.at("vp"));
      s.lag = r.at("lag").get<double>();
      s.s = r.at("s").get<double>();
      s.tau_in = r.at("tau_in").get<double>();
      s.amplitude = r.at("amplitude").get<double>();
      s.dphi = r.at("dphi").get<double>();
      d.single_scatter.push_back(s);
    }
    for (const auto& r : j.at("residual"))
      d.residual.push_back({r.at("t").get<double>(), vec_from_json(r.at("x")), vec_from_json(r.at("v")),
                            r.at("total").get<double>(), r.at("residual").get<double>()});
    return d;
  } catch (const json::exception& e) {
    throw DataError(std::string("decomposition: malformed dataset: ") + e.what());
  }
}

inline SingularDecomposition load_decomposition(const std::filesystem::path& path) {
  const std::string text = read_file_bytes(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError("decomposition: " + path.string() + " is not valid JSON");
  }
  return decomposition_from_json(j);
}

// Reconstruction report

inline json reconstruction_to_json(const ReconstructionReport& r) {
  json j;
  j["noise"] = r.noise;
  json stages = json::array();
  for (const auto& s : r.stages) stages.push_back({{"name", s.name}, {"status", s.status}, {"reason", s.reason}});
  j["stages"] = std::move(stages);
  j["nu"] = {{"samples", r.nu_hat.size()},
             {"excluded_rays", r.nu_excluded},
             {"max_rel_err", num(r.nu_max_rel_err)},
             {"median_rel_err", num(r.nu_median_rel_err)}};
  json skipped = json::array();
  for (const auto& s : r.table.skipped)
    skipped.push_back({{"v", vec_json(s.v)}, {"vp", vec_json(s.vp)}, {"reason", s.reason}});
  j["kernel"] = {{"pairs", r.table.entries.size()},
                 {"skipped", std::move(skipped)},
                 {"asymmetry", num(r.table.asymmetry)},
                 {"ktilde_median_rel_err", num(r.ktilde_median_rel_err)},
                 {"k2_median_rel_err", num(r.k2_median_rel_err)}};
  if (r.fit) {
    const auto& f = *r.fit;
    j["fit"] = {{"c", num(f.c)},
                {"gamma", num(f.gamma_reported)},
                {"gamma_raw", num(f.gamma)},
                {"out_of_range", f.out_of_range},
                {"residual", num(f.residual)},
                {"iterations", f.residual_trace.size()}};
  } else {
    j["fit"] = nullptr;
  }
  j["I"] = {{"method", to_string(r.i_method)}, {"points", r.I_hat.size()}, {"sup_rel_err", num(r.I_sup_rel_err)}};
  json failures = json::array();
  for (const auto& f : r.slice_failures) failures.push_back({{"eta", num(f.eta)}, {"reason", f.reason}});
  j["qtilde"] = {{"slices", r.slices.size()},
                 {"failures", std::move(failures)},
                 {"median_rel_err", num(r.qtilde_median_rel_err)}};
  j["q"] = {{"theta", num_array(r.q.theta)},
            {"rho", num_array(r.q.rho)},
            {"skipped", r.q.skipped},
            {"symB_residual", num(r.q.symB_residual)},
            {"symB_relative", num(r.q.symB_relative)},
            {"median_rel_err", num(r.q_median_rel_err)},
            {"sup_rel_err", num(r.q_sup_rel_err)}};
  j["ok"] = r.ok();
  return j;
}

inline json gap_to_json(const GapTable& g) {
  bool monotone = true;
  for (std::size_t i = 1; i < g.gap.size(); ++i) monotone = monotone && g.gap[i] < g.gap[i - 1];
  return {{"epsilon", num_array(g.epsilon)}, {"gap", num_array(g.gap)}, {"slope", num(g.slope)}, {"monotone", monotone}};
}

inline json probe_to_json(const ProbeResult& p, double direct) {
  return {{"widths", num_array(p.widths)},
          {"estimates", num_array(p.estimates)},
          {"extrapolated", num(p.extrapolated)},
          {"direct", num(direct)},
          {"rel_err", num(direct != 0.0 ? std::abs(p.extrapolated / direct - 1.0) : std::abs(p.extrapolated))},
          {"normalization_error", num(p.normalization_error)}};
}

// Plot-data tables

inline CsvTable nu_profile_csv(const ReconstructionReport* r) {
  CsvTable t{{"speed", "nu_true", "nu_hat"}, {}};
  if (r)
    for (std::size_t i = 0; i < r->nu_hat.size() && i < r->nu_true.size(); ++i)
      t.rows.push_back({r->nu_hat.radii[i], r->nu_true[i], r->nu_hat.values[i]});
  return t;
}

inline CsvTable i_profile_csv(const ReconstructionReport* r) {
  CsvTable t{{"r", "I_true", "I_hat"}, {}};
  if (r)
    for (std::size_t i = 0; i < r->I_hat.size() && i < r->I_true.size(); ++i)
      t.rows.push_back({r->I_hat.radii[i], r->I_true[i], r->I_hat.values[i]});
  return t;
}

inline CsvTable qtilde_slices_csv(const ReconstructionReport* r) {
  CsvTable t{{"eta", "r", "value_true", "value_hat"}, {}};
  if (r)
    for (std::size_t s = 0; s < r->slices.size() && s < r->qtilde_true.size(); ++s) {
      const auto& sl = r->slices[s];
      for (std::size_t j = 0; j < sl.qtilde.size(); ++j)
        t.rows.push_back({sl.eta, sl.qtilde.radii[j], r->qtilde_true[s][j], sl.qtilde.values[j]});
    }
  return t;
}

inline CsvTable q_grid_csv(const ReconstructionReport* r) {
  CsvTable t{{"theta", "rho", "q_true", "q_hat", "rel_err"}, {}};
  if (r && r->q_true.size() == r->q.theta.size() * r->q.rho.size() && r->q.values.size() == r->q_true.size()) {
    const std::size_t nr = r->q.rho.size();
    for (std::size_t i = 0; i < r->q.theta.size(); ++i)
      for (std::size_t j = 0; j < nr; ++j)
        t.rows.push_back({r->q.theta[i], r->q.rho[j], r->q_true[i * nr + j], r->q.values[i * nr + j],
                          r->q_rel_err[i * nr + j]});
  }
  return t;
}

inline CsvTable gap_csv(const GapTable* g) {
  CsvTable t{{"epsilon", "gap"}, {}};
  if (g)
    for (std::size_t i = 0; i < g->epsilon.size(); ++i) t.rows.push_back({g->epsilon[i], g->gap[i]});
  return t;
}

inline CsvTable samples_csv(const std::vector<AlbedoSample>& samples) {
  CsvTable t{{"t", "x1", "x2", "x3", "v1", "v2", "v3", "value"}, {}};
  for (const auto& s : samples) t.rows.push_back({s.t, s.x.x, s.x.y, s.x.z, s.v.x, s.v.y, s.v.z, s.value});
  return t;
}

/// Everything a run reports; sections a command does not produce stay empty.
struct RunReport {
  std::string command;
  std::string label;
  std::uint64_t seed = 0;
  std::string config_sha256;
  json forward;  // null when absent
  json albedo;   // null when absent
  std::optional<GapTable> gap;
  std::optional<ReconstructionReport> reconstruction;
};

inline json report_to_json(const RunReport& r) {
  json j;
  j["schema"] = kReportSchema;
  j["command"] = r.command;
  j["label"] = r.label;
  j["seed"] = r.seed;
  j["config_sha256"] = r.config_sha256;
  j["forward"] = r.forward;
  j["albedo"] = r.albedo;
  j["gap"] = r.gap ? gap_to_json(*r.gap) : json(nullptr);
  j["reconstruction"] = r.reconstruction ? reconstruction_to_json(*r.reconstruction) : json(nullptr);
  return j;
}

/// Writes report.json and the five plot-data CSVs into dir; returns the file names written.
inline std::vector<std::string> export_report(const RunReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message(), dir.string());
  const ReconstructionReport* rec = r.reconstruction ? &*r.reconstruction : nullptr;
  const GapTable* gap = r.gap ? &*r.gap : nullptr;
  const std::vector<std::pair<std::string, std::string>> files{
      {"report.json", report_to_json(r).dump(2) + "\n"},
      {"nu_profile.csv", nu_profile_csv(rec).str()},
      {"i_profile.csv", i_profile_csv(rec).str()},
      {"qtilde_slices.csv", qtilde_slices_csv(rec).str()},
      {"q_grid.csv", q_grid_csv(rec).str()},
      {"gap.csv", gap_csv(gap).str()},
  };
  std::vector<std::string> names;
  for (const auto& [name, bytes] : files) {
    write_file_atomic(dir / name, bytes);
    names.push_back(name);
  }
  return names;
}

}  // namespace boltzalbedo
