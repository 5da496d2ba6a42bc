#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include "heatobs/io.hpp"

namespace fs = std::filesystem;
using heatobs::io::json;

namespace {

const std::string kCli = HEATOBS_CLI_PATH;
const std::string kDefaultConfig = std::string(HEATOBS_CONFIG_DIR) + "/default.json";

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("heatobs_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    ::setenv("HEATOBS_EPOCH", "0", 1);
  }
  ~Sandbox() { fs::remove_all(dir); }
  fs::path p(const std::string& rel) const { return dir / rel; }
};

int run(const std::string& args, const fs::path& capture = {}) {
  std::string cmd = kCli + " " + args;
  if (!capture.empty()) cmd += " >" + capture.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json patched_default(const std::function<void(json&)>& patch) {
  json j = json::parse(slurp(kDefaultConfig));
  patch(j);
  return j;
}

void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

} // namespace

TEST_CASE("mesh and weights emit manifested artifacts") {
  Sandbox sb;
  REQUIRE(run("mesh --config " + kDefaultConfig + " --out " + sb.p("m").string()) == 0);
  CHECK(fs::exists(sb.p("m/mesh.json")));
  CHECK(fs::exists(sb.p("m/mesh.csv")));
  CHECK(fs::exists(sb.p("m/manifest.json")));
  json header = json::parse(slurp(sb.p("m/mesh.json")));
  CHECK(header.at("dimension") == 1);
  CHECK(header.at("resolution") == 201);
  CHECK(header.at("schema_version") == 1);

  REQUIRE(run("weights --config " + kDefaultConfig + " --out " + sb.p("w").string()) == 0);
  json fam = json::parse(slurp(sb.p("w/weights.json")));
  CHECK(fam.at("constants").at("ok") == true);
  CHECK(fam.at("constants").at("mu").get<double>() > 0.0);
  CHECK(fs::exists(sb.p("w/psi_0.csv")));

  SUBCASE("stored family re-verifies") {
    CHECK(run("weights verify --run " + sb.p("w").string(), sb.p("log")) == 0);
  }
}

TEST_CASE("certify on the bundled default config") {
  Sandbox sb;
  REQUIRE(run("certify --config " + kDefaultConfig + " --out " + sb.p("c").string()) == 0);
  json cert = json::parse(slurp(sb.p("c/certificate.json")));
  CHECK(cert.at("passed") == true);
  CHECK(cert.at("branch") == "main");
  CHECK(cert.at("schema_version") == 1);
  for (const json& st : cert.at("stages")) CHECK(st.at("pass") == true);

  SUBCASE("identical config and seed give byte-identical artifacts") {
    REQUIRE(run("certify --config " + kDefaultConfig + " --out " + sb.p("c2").string()) == 0);
    CHECK(slurp(sb.p("c/certificate.json")) == slurp(sb.p("c2/certificate.json")));
    CHECK(slurp(sb.p("c/manifest.json")) == slurp(sb.p("c2/manifest.json")));
  }

  SUBCASE("report verifies a fresh run and is byte-stable") {
    REQUIRE(run("report --run " + sb.p("c").string(), sb.p("r1.json")) == 0);
    REQUIRE(run("report --run " + sb.p("c").string(), sb.p("r2.json")) == 0);
    CHECK(slurp(sb.p("r1.json")) == slurp(sb.p("r2.json")));
    json rep = json::parse(slurp(sb.p("r1.json")));
    CHECK(rep.at("checksums_ok") == true);
  }

  SUBCASE("tampering is detected and named") {
    std::ofstream(sb.p("c/certificate.json"), std::ios::app) << "tamper";
    CHECK(run("report --run " + sb.p("c").string(), sb.p("r.json")) == 1);
    CHECK(slurp(sb.p("r.json")).find("certificate.json") != std::string::npos);
  }
}

TEST_CASE("config validation failures exit 2 with the key path") {
  Sandbox sb;
  SUBCASE("unknown key") {
    json j = patched_default([](json& c) { c["solver"]["bogus_knob"] = 1; });
    write(sb.p("bad.json"), j.dump(2));
    CHECK(run("certify --config " + sb.p("bad.json").string() + " --out " + sb.p("x").string(),
              sb.p("log")) == 2);
    CHECK(slurp(sb.p("log")).find("/solver/bogus_knob") != std::string::npos);
  }
  SUBCASE("bad enum value") {
    json j = patched_default([](json& c) { c["solver"]["scheme"] = "leapfrog"; });
    write(sb.p("bad.json"), j.dump(2));
    CHECK(run("certify --config " + sb.p("bad.json").string() + " --out " + sb.p("x").string(),
              sb.p("log")) == 2);
    CHECK(slurp(sb.p("log")).find("/solver/scheme") != std::string::npos);
  }
  SUBCASE("bad type") {
    json j = patched_default([](json& c) { c["mesh"]["resolution"] = "many"; });
    write(sb.p("bad.json"), j.dump(2));
    CHECK(run("certify --config " + sb.p("bad.json").string() + " --out " + sb.p("x").string(),
              sb.p("log")) == 2);
    CHECK(slurp(sb.p("log")).find("/mesh/resolution") != std::string::npos);
  }
  SUBCASE("missing config") {
    CHECK(run("certify --out " + sb.p("x").string(), sb.p("log")) == 2);
  }
  SUBCASE("usage error") { CHECK(run("frobnicate", sb.p("log")) == 2); }
}

TEST_CASE("frequency trace feeds interpolate") {
  Sandbox sb;
  // shorter run keeps this test quick
  json j = patched_default([](json& c) {
    c["solver"]["T"] = 0.2;
    c["solver"]["dt"] = 1e-3;
  });
  write(sb.p("cfg.json"), j.dump(2));
  REQUIRE(run("frequency --config " + sb.p("cfg.json").string() + " --out " +
              sb.p("f").string()) == 0);
  CHECK(fs::exists(sb.p("f/trace.csv")));

  json params{{"T", 0.2},  {"h", 0.1},  {"C0", 0.5},  {"F1", 0.0},      {"F2", 10.0},
              {"t1", 0.1}, {"t2", 0.15}, {"t3", 0.2}, {"tolerance", 1e-3}};
  write(sb.p("params.json"), params.dump(2));

  SUBCASE("clean trace passes") {
    CHECK(run("interpolate --config " + sb.p("cfg.json").string() + " --out " +
              sb.p("i").string() + " --trace " + sb.p("f/trace.csv").string() + " --params " +
              sb.p("params.json").string()) == 0);
    json out = json::parse(slurp(sb.p("i/interpolate.json")));
    CHECK(out.at("holds") == true);
    CHECK(out.at("hypotheses_ok") == true);
  }

  SUBCASE("injected hypothesis violation exits 1") {
    heatobs::io::ParsedTrace tr = heatobs::io::parse_trace_csv(slurp(sb.p("f/trace.csv")));
    std::string text = "t,y,N,X,energy_residual,Nprime_slack\r\n";
    for (size_t k = 0; k < tr.times.size(); ++k) {
      double N = tr.N[k];
      if (k == tr.times.size() / 2) N += 1e4 * (tr.times[1] - tr.times[0]);
      text += heatobs::io::num(tr.times[k]) + "," + heatobs::io::num(tr.y[k]) + "," +
              heatobs::io::num(N) + ",0,0,0\r\n";
    }
    write(sb.p("bad_trace.csv"), text);
    CHECK(run("interpolate --config " + sb.p("cfg.json").string() + " --out " +
              sb.p("i2").string() + " --trace " + sb.p("bad_trace.csv").string() +
              " --params " + sb.p("params.json").string()) == 1);
  }
}

TEST_CASE("simulate, commutator-check, observe, sweep round trip") {
  Sandbox sb;
  json j = patched_default([](json& c) {
    c["mesh"]["resolution"] = 101;
    c["solver"]["T"] = 0.2;
    c["solver"]["dt"] = 2e-3;
    c["initial"]["offset"] = 1.2;
  });
  write(sb.p("cfg.json"), j.dump(2));
  const std::string cfg = " --config " + sb.p("cfg.json").string();

  REQUIRE(run("simulate" + cfg + " --out " + sb.p("s").string() + " --stride 10") == 0);
  CHECK(fs::exists(sb.p("s/solution.json")));
  CHECK(fs::exists(sb.p("s/snapshots/snap_000000.csv")));

  REQUIRE(run("commutator-check" + cfg + " --out " + sb.p("cc").string() +
              " --run " + sb.p("s").string() + " --stride 10") == 0);
  json cc = json::parse(slurp(sb.p("cc/commutator.json")));
  CHECK(cc.at("pass") == true);
  CHECK(cc.at("worst_relative_residual").get<double>() <= cc.at("budget").get<double>());

  json j2 = patched_default([](json& c) {
    c["mesh"]["resolution"] = 48;
    c["solver"]["dt"] = 2e-3;
  });
  write(sb.p("small.json"), j2.dump(2));
  const std::string small = " --config " + sb.p("small.json").string();
  REQUIRE(run("observe" + small + " --out " + sb.p("o").string() + " --t 0.1") == 0);
  json obs = json::parse(slurp(sb.p("o/observe.json")));
  CHECK(obs.at("required_K").get<double>() > 0.0);

  REQUIRE(run("sweep" + small + " --out " + sb.p("sw").string() +
              " --times 0.1 0.2 --potentials 0") == 0);
  json fit = json::parse(slurp(sb.p("sw/sweep_fit.json")));
  CHECK(fit.at("k2_t_a").get<double>() == 0.0);
  CHECK(fit.at("k3_a23").get<double>() == 0.0);
  CHECK(fs::exists(sb.p("sw/sweep.csv")));
}
