#pragma once

// Configuration parsing, artifact serialization, and run manifests. All
// tabular output is RFC 4180 CSV (CRLF, quoted where needed) with numbers at
// 17 significant digits; structured output is JSON carrying a schema_version.
// Manifests list every emitted file with an FNV-1a checksum so a report pass
// can detect tampering.

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "heatobs/carleman.hpp"
#include "heatobs/frequency.hpp"
#include "heatobs/heat.hpp"
#include "heatobs/mesh.hpp"
#include "heatobs/morse.hpp"
#include "heatobs/observation.hpp"

namespace heatobs::io {

using nlohmann::json;

constexpr int kSchemaVersion = 1;
constexpr const char* kArtifactVersion = "1.0.0";

inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string fnv1a_hex(const std::string& bytes) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_rows(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_cell(row[i]);
    }
    out += "\r\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// serializers

inline json mesh_header(const Mesh& m) {
  return json{{"schema_version", kSchemaVersion},
              {"dimension", m.dimension},
              {"resolution", m.nx},
              {"dx", m.dx},
              {"dy", m.dy},
              {"nodes", m.node_count()}};
}

inline std::string mesh_csv(const Mesh& m) {
  std::vector<std::vector<std::string>> rows{{"node", "x", "y", "boundary"}};
  for (int n = 0; n < m.node_count(); ++n)
    rows.push_back({std::to_string(n), num(m.coords[n].x), num(m.coords[n].y),
                    m.is_boundary(n) ? "1" : "0"});
  return csv_rows(rows);
}

inline std::string field_csv(const Field& f) {
  const Mesh& m = *f.mesh;
  std::vector<std::vector<std::string>> rows{{"node", "x", "y", "value"}};
  for (int n = 0; n < f.size(); ++n)
    rows.push_back({std::to_string(n), num(m.coords[n].x), num(m.coords[n].y), num(f[n])});
  return csv_rows(rows);
}

inline json family_json(const WeightFamily& fam) {
  json members = json::array();
  for (int i = 0; i < fam.d; ++i) {
    json crit = json::array();
    for (int k = 0; k < fam.psi[i].count(); ++k)
      crit.push_back({{"x", fam.psi[i].critical_points[k].x},
                      {"y", fam.psi[i].critical_points[k].y},
                      {"value", fam.psi[i].critical_values[k]},
                      {"signature", fam.psi[i].hessian_signatures[k]}});
    members.push_back({{"critical_points", crit},
                       {"maximizer", {fam.maximizers[i].x, fam.maximizers[i].y}}});
  }
  const WeightConstants& c = fam.constants;
  return json{{"schema_version", kSchemaVersion},
              {"d", fam.d},
              {"r", fam.r},
              {"collar_width", fam.collar_width},
              {"members", members},
              {"region_sizes",
               {{"collar", fam.collar.size()}, {"omega", fam.omega.nodes.size()}}},
              {"constants",
               {{"c1", c.c1},
                {"c2", c.c2},
                {"c3", c.c3},
                {"c4", c.c4},
                {"c5", c.c5},
                {"c6", c.c6},
                {"mu", c.mu},
                {"c3_applicable", c.c3_applicable},
                {"ok", c.ok},
                {"failures", c.failures}}}};
}

inline json solution_manifest(const HeatSolution& sol, const json& potential_desc) {
  return json{{"schema_version", kSchemaVersion},
              {"mesh", mesh_header(*sol.mesh)},
              {"potential", potential_desc},
              {"dt", sol.dt},
              {"scheme", sol.scheme == TimeScheme::crank_nicolson ? "crank_nicolson"
                                                                  : "implicit_euler"},
              {"times", sol.times},
              {"snapshots", sol.snapshot_count()}};
}

inline std::string trace_csv(const FrequencyTrace& tr) {
  std::vector<std::vector<std::string>> rows{
      {"t", "y", "N", "X", "energy_residual", "Nprime_slack"}};
  for (int k = 0; k < tr.size(); ++k)
    rows.push_back({num(tr.times[k]), num(tr.y[k]), num(tr.N[k]), num(tr.X[k]),
                    num(tr.energy_residuals[k]), num(tr.Nprime_slacks[k])});
  return csv_rows(rows);
}

// parse a trace emitted by trace_csv; only the columns needed downstream
struct ParsedTrace {
  std::vector<double> times, y, N;
};

inline ParsedTrace parse_trace_csv(const std::string& text) {
  ParsedTrace out;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() < 3) throw std::runtime_error("trace csv: need at least t,y,N columns");
    out.times.push_back(vals[0]);
    out.y.push_back(vals[1]);
    out.N.push_back(vals[2]);
  }
  return out;
}

inline json commutator_json(const CommutatorReport& rep) {
  return json{{"schema_version", kSchemaVersion},
              {"t", rep.t},
              {"dx", rep.dx},
              {"lhs", rep.lhs},
              {"volume_hessian", rep.vol_hessian},
              {"volume_third", rep.vol_third},
              {"volume_zeroth", rep.vol_zeroth},
              {"boundary_cross", rep.bdry_cross},
              {"boundary_gradsq", rep.bdry_gradsq},
              {"boundary_laplacian", rep.bdry_lap},
              {"boundary_eta", rep.bdry_eta},
              {"rhs", rep.rhs},
              {"identity_residual", rep.identity_residual},
              {"scale", rep.scale},
              {"C0_measured", rep.C0_measured},
              {"C_measured", rep.C_measured},
              {"step5_slack", rep.step5_slack}};
}

inline json certificate_json(const Certificate& c) {
  json stages = json::array();
  for (const CertStage& st : c.stages)
    stages.push_back(
        {{"name", st.name}, {"pass", st.pass}, {"margin", st.margin}, {"note", st.note}});
  return json{{"schema_version", kSchemaVersion},
              {"passed", c.passed},
              {"failed_stage", c.failed_stage},
              {"branch", c.branch},
              {"constants",
               {{"s", c.s},
                {"h", c.h},
                {"h_geom", c.h_geom},
                {"C0", c.C0},
                {"C", c.C},
                {"mu", c.mu},
                {"c_weight", c.c_weight},
                {"ell", c.ell},
                {"M_ell", c.M_ell},
                {"log_K_ell", c.log_K_ell},
                {"M1", c.M1},
                {"beta", c.beta},
                {"log_K_total", c.log_K_total},
                {"c1_final", c.c1_final}}},
              {"data",
               {{"T", c.T},
                {"a_sup", c.a_sup},
                {"y0", c.y0},
                {"yT", c.yT},
                {"yT_omega_sq", c.yT_omega_sq},
                {"lhs_log", c.lhs_log},
                {"rhs_log", c.rhs_log},
                {"final_margin", c.final_margin}}},
              {"stages", stages},
              {"seed", c.seed},
              {"config_hash", c.config_hash}};
}

// ---------------------------------------------------------------------------
// experiment configuration

struct ExperimentConfig {
  int dimension = 1;
  int resolution = 201;
  std::vector<std::pair<Vec2, double>> omega_balls{{{0.5, 0.0}, 0.15}};
  std::string potential_kind = "constant"; // constant | separable | tabulated
  double potential_value = 0.0;
  int potential_k = 0;       // spatial mode for the separable kind
  double potential_rate = 0.0;
  std::vector<double> potential_values; // tabulated nodal values
  int d = 1;
  std::vector<Vec2> targets;
  double r = 0.0; // 0: default radius
  double collar_width = 0.1;
  double safety = 0.5;
  double T = 0.5;
  double dt = 5e-4;
  std::string scheme = "crank_nicolson";
  double C0 = 0.5;
  double tolerance = 10.0;
  long ell_override = 0;
  double h_override = 0.0;
  double beta = 0.5;          // used by observe/sweep
  std::uint64_t seed = 12345;
  std::string out = "run";
  std::string initial_kind = "cosine"; // constant | cosine | gaussian
  double initial_amplitude = 1.0;
  int initial_k = 1;
  double initial_offset = 0.0;
  std::string raw; // canonical serialized form, hashed into manifests
};

namespace detail {

inline void require_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw std::invalid_argument("config: unknown key " + path + "/" + it.key());
  }
}

template <typename T>
inline T fetch(const json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: bad type at ") + path + "/" + key);
  }
}

} // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using detail::fetch;
  using detail::require_keys;
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  require_keys(j, "", {"schema_version", "mesh", "omega", "potential", "weights", "solver",
                       "pipeline", "initial", "seed", "out"});
  ExperimentConfig c;
  if (fetch<int>(j, "", "schema_version", kSchemaVersion) != kSchemaVersion)
    throw std::invalid_argument("config: unsupported schema_version");

  if (j.contains("mesh")) {
    const json& m = j.at("mesh");
    require_keys(m, "/mesh", {"dimension", "resolution"});
    c.dimension = fetch<int>(m, "/mesh", "dimension", c.dimension);
    c.resolution = fetch<int>(m, "/mesh", "resolution", c.resolution);
  }
  if (j.contains("omega")) {
    const json& w = j.at("omega");
    require_keys(w, "/omega", {"balls"});
    if (w.contains("balls")) {
      c.omega_balls.clear();
      int i = 0;
      for (const json& b : w.at("balls")) {
        const std::string p = "/omega/balls/" + std::to_string(i++);
        require_keys(b, p, {"center", "radius"});
        auto ctr = b.at("center").get<std::vector<double>>();
        if (ctr.size() != 2) throw std::invalid_argument("config: center needs 2 entries at " + p);
        c.omega_balls.push_back({{ctr[0], ctr[1]}, fetch<double>(b, p, "radius", 0.0)});
      }
    }
  }
  if (j.contains("potential")) {
    const json& a = j.at("potential");
    require_keys(a, "/potential", {"kind", "value", "k", "rate", "values"});
    c.potential_kind = fetch<std::string>(a, "/potential", "kind", c.potential_kind);
    c.potential_value = fetch<double>(a, "/potential", "value", c.potential_value);
    c.potential_k = fetch<int>(a, "/potential", "k", c.potential_k);
    c.potential_rate = fetch<double>(a, "/potential", "rate", c.potential_rate);
    c.potential_values = fetch<std::vector<double>>(a, "/potential", "values", {});
    if (c.potential_kind != "constant" && c.potential_kind != "separable" &&
        c.potential_kind != "tabulated")
      throw std::invalid_argument("config: bad value at /potential/kind");
  }
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    require_keys(w, "/weights", {"d", "targets", "r", "collar_width", "safety"});
    c.d = fetch<int>(w, "/weights", "d", c.d);
    c.r = fetch<double>(w, "/weights", "r", c.r);
    c.collar_width = fetch<double>(w, "/weights", "collar_width", c.collar_width);
    c.safety = fetch<double>(w, "/weights", "safety", c.safety);
    if (w.contains("targets")) {
      for (const json& t : w.at("targets")) {
        auto v = t.get<std::vector<double>>();
        if (v.size() != 2)
          throw std::invalid_argument("config: target needs 2 entries at /weights/targets");
        c.targets.push_back({v[0], v[1]});
      }
    }
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    require_keys(s, "/solver", {"T", "dt", "scheme"});
    c.T = fetch<double>(s, "/solver", "T", c.T);
    c.dt = fetch<double>(s, "/solver", "dt", c.dt);
    c.scheme = fetch<std::string>(s, "/solver", "scheme", c.scheme);
    if (c.scheme != "crank_nicolson" && c.scheme != "implicit_euler")
      throw std::invalid_argument("config: bad value at /solver/scheme");
  }
  if (j.contains("pipeline")) {
    const json& p = j.at("pipeline");
    require_keys(p, "/pipeline",
                 {"C0", "tolerance", "ell_override", "h_override", "beta"});
    c.C0 = fetch<double>(p, "/pipeline", "C0", c.C0);
    c.tolerance = fetch<double>(p, "/pipeline", "tolerance", c.tolerance);
    c.ell_override = fetch<long>(p, "/pipeline", "ell_override", c.ell_override);
    c.h_override = fetch<double>(p, "/pipeline", "h_override", c.h_override);
    c.beta = fetch<double>(p, "/pipeline", "beta", c.beta);
  }
  if (j.contains("initial")) {
    const json& u = j.at("initial");
    require_keys(u, "/initial", {"kind", "amplitude", "k", "offset"});
    c.initial_kind = fetch<std::string>(u, "/initial", "kind", c.initial_kind);
    c.initial_amplitude = fetch<double>(u, "/initial", "amplitude", c.initial_amplitude);
    c.initial_k = fetch<int>(u, "/initial", "k", c.initial_k);
    c.initial_offset = fetch<double>(u, "/initial", "offset", c.initial_offset);
    if (c.initial_kind != "constant" && c.initial_kind != "cosine" &&
        c.initial_kind != "gaussian")
      throw std::invalid_argument("config: bad value at /initial/kind");
  }
  c.seed = fetch<std::uint64_t>(j, "", "seed", c.seed);
  c.out = fetch<std::string>(j, "", "out", c.out);
  c.raw = j.dump(2);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: parse error: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// builders from a parsed config

inline Mesh config_mesh(const ExperimentConfig& c) { return build_mesh(c.dimension, c.resolution); }

inline ObservationRegion config_omega(const ExperimentConfig& c, const Mesh& m) {
  return make_observation_region(m, c.omega_balls);
}

inline Potential config_potential(const ExperimentConfig& c, const Mesh& m) {
  if (c.potential_kind == "constant") return constant_potential(c.potential_value);
  if (c.potential_kind == "separable") {
    const double amp = c.potential_value, rate = c.potential_rate;
    const int k = c.potential_k;
    const int dim = m.dimension;
    auto fn = [amp, rate, k, dim](const Vec2& p, double t) {
      double sp = std::cos(k * M_PI * p.x);
      if (dim == 2) sp *= std::cos(k * M_PI * p.y);
      return amp * sp * std::exp(rate * t);
    };
    // sup over the time interval is taken by the caller's T; rate <= 0 keeps
    // the initial amplitude the sup
    if (rate > 0.0)
      throw std::invalid_argument("config: separable potential needs rate <= 0");
    return make_potential(fn, std::abs(amp), true);
  }
  if (static_cast<int>(c.potential_values.size()) != m.node_count())
    throw std::invalid_argument("config: tabulated potential length must match node count");
  std::vector<double> vals = c.potential_values;
  const Mesh* mp = &m;
  double sup = 0.0;
  for (double v : vals) sup = std::max(sup, std::abs(v));
  auto fn = [vals, mp](const Vec2& p, double) {
    // nearest-node lookup
    int best = 0;
    double bd = 1e300;
    for (int n = 0; n < mp->node_count(); ++n) {
      const double d = std::abs(p.x - mp->coords[n].x) + std::abs(p.y - mp->coords[n].y);
      if (d < bd) {
        bd = d;
        best = n;
      }
    }
    return vals[best];
  };
  return make_potential(fn, sup, false);
}

inline Field config_initial(const ExperimentConfig& c, const Mesh& m) {
  const double A = c.initial_amplitude, off = c.initial_offset;
  const int k = c.initial_k;
  if (c.initial_kind == "constant")
    return sample(m, [A](double, double) { return A; });
  if (c.initial_kind == "cosine")
    return sample(m, [A, off, k](double x, double) { return off + A * std::cos(k * M_PI * x); });
  return sample(m, [A](double x, double y) {
    const double dx = x - 0.5, dy = y;
    return A * std::exp(-40.0 * (dx * dx + dy * dy));
  });
}

inline WeightFamily config_family(const ExperimentConfig& c, const Mesh& m,
                                  const ObservationRegion& omega) {
  std::vector<MorseFunction> members;
  if (c.d == 1) {
    members.push_back(base_morse(m));
  } else if (c.d == 3 && m.dimension == 1) {
    std::array<double, 3> p{};
    if (c.targets.size() == 3) {
      for (int i = 0; i < 3; ++i) p[i] = c.targets[i].x;
    } else {
      p = {0.25, 0.5, 0.75};
    }
    members = cyclic_family_1d(m, p);
  } else {
    throw std::invalid_argument("config: weights d must be 1, or 3 on the interval");
  }
  std::vector<Vec2> maxima;
  for (const auto& psi : members) maxima.push_back(psi.critical_points[psi.argmax()]);
  const double r = (c.r > 0.0) ? c.r : default_ball_radius(omega, maxima);
  return make_weight_family(std::move(members), omega, r, c.collar_width);
}

// ---------------------------------------------------------------------------
// artifact writing and manifests

struct ArtifactWriter {
  std::filesystem::path dir;
  std::vector<std::pair<std::string, std::string>> entries; // (relative path, checksum)

  explicit ArtifactWriter(std::filesystem::path d) : dir(std::move(d)) {
    std::filesystem::create_directories(dir);
  }

  void emit(const std::string& rel, const std::string& content) {
    const std::filesystem::path p = dir / rel;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
    entries.push_back({rel, fnv1a_hex(content)});
  }

  void emit_json(const std::string& rel, const json& j) { emit(rel, j.dump(2) + "\n"); }

  void write_manifest(const std::string& config_hash, const std::string& timestamp) {
    json files = json::array();
    for (const auto& [rel, sum] : entries) files.push_back({{"path", rel}, {"fnv1a", sum}});
    json m{{"schema_version", kSchemaVersion},
           {"artifact_version", kArtifactVersion},
           {"config_hash", config_hash},
           {"timestamp", timestamp},
           {"files", files}};
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
  }
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ReportResult {
  bool checksums_ok = true;
  std::vector<std::string> mismatches;
  json consolidated;
};

// verify every manifest entry and aggregate any stage margins found in the
// emitted JSON files; deterministic ordering, no timestamps in the output
inline ReportResult report_run(const std::filesystem::path& dir) {
  ReportResult res;
  json manifest = json::parse(read_file(dir / "manifest.json"));
  json files = json::array();
  json stages = json::array();
  for (const json& f : manifest.at("files")) {
    const std::string rel = f.at("path").get<std::string>();
    const std::string want = f.at("fnv1a").get<std::string>();
    std::string got;
    try {
      got = fnv1a_hex(read_file(dir / rel));
    } catch (const std::exception&) {
      got = "missing";
    }
    if (got != want) {
      res.checksums_ok = false;
      res.mismatches.push_back(rel);
    }
    files.push_back({{"path", rel}, {"fnv1a", want}, {"verified", got == want}});
    if (rel.size() > 5 && rel.substr(rel.size() - 5) == ".json" && got == want) {
      json j = json::parse(read_file(dir / rel));
      if (j.contains("stages"))
        for (const json& st : j.at("stages"))
          stages.push_back({{"file", rel},
                            {"name", st.at("name")},
                            {"pass", st.at("pass")},
                            {"margin", st.at("margin")}});
    }
  }
  res.consolidated = json{{"schema_version", kSchemaVersion},
                          {"config_hash", manifest.at("config_hash")},
                          {"checksums_ok", res.checksums_ok},
                          {"mismatches", res.mismatches},
                          {"files", files},
                          {"stage_margins", stages}};
  return res;
}

} // namespace heatobs::io
