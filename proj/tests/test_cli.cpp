#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("steadytube_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run_raw(const std::string& command, const std::string& config_text, const std::string& tag) {
  const fs::path dir = scratch_dir() / tag;
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << config_text;
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + STEADYTUBE_BINARY + "\" " + command + " --config \"" + cfg.string() +
                          "\" --out \"" + (dir / "out").string() + "\" > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(log);
  return r;
}

Run run(const std::string& command, const json& config, const std::string& tag) {
  return run_raw(command, config.dump(2), tag);
}

json read_json(const std::string& tag, const std::string& file) {
  return json::parse(slurp(scratch_dir() / tag / "out" / file));
}

const json kShockGas = {{"rho0", 0.5}, {"u0", 2.0}, {"u1", "conjugate"}, {"gamma", 2.0}, {"a", 1.0}};

}  // namespace

TEST_CASE("classify reports the interior shock") {
  const Run r = run("classify", {{"command", "classify"}, {"gas", kShockGas}}, "classify");
  CHECK(r.code == 0);
  CHECK(r.out.find("InteriorShock") != std::string::npos);
  const json j = read_json("classify", "classify.json");
  CHECK(j["kind"] == "InteriorShock");
  CHECK(j["shock_location"].get<double>() == doctest::Approx(0.7571).epsilon(1e-4));
  CHECK(j.contains("provenance"));
}

TEST_CASE("check reports the rotation example's spectral failure") {
  const json cfg = {{"command", "check"}, {"system", {{"system", "rotation_example"}}}, {"samples", {{0.0, 0.0}}}};
  const Run r = run("check", cfg, "check");
  CHECK(r.code == 0);
  CHECK(r.out.find("speccond FAIL") != std::string::npos);
}

TEST_CASE("invalid configurations exit with status 2") {
  CHECK(run_raw("classify", "{\"command\": \"classify\", \"gas\": ", "malformed").code == 2);
  json unknown = {{"command", "classify"}, {"gas", kShockGas}, {"colour", "blue"}};
  CHECK(run("classify", unknown, "unknown").code == 2);
  CHECK(run("classify", {{"command", "solve"}, {"gas", kShockGas}}, "mismatch").code == 2);
  json bad_gas = kShockGas;
  bad_gas["gamma"] = 0.5;
  CHECK(run("classify", {{"command", "classify"}, {"gas", bad_gas}}, "badgas").code == 2);
}

TEST_CASE("solve writes a profile table with a provenance header") {
  const json cfg = {{"command", "solve"},
                    {"system", {{"system", "isentropic_ns"}, {"gamma", 2.0}, {"a", 1.0}, {"nu", 0.5}}},
                    {"U0", {1.0, 0.5}},
                    {"U1II", {0.6}}};
  const Run r = run("solve", cfg, "solve");
  REQUIRE(r.code == 0);
  const std::string csv = slurp(scratch_dir() / "solve" / "out" / "profile.csv");
  CHECK(csv.rfind("#", 0) == 0);
  CHECK(csv.find("config_hash") != std::string::npos);
  CHECK(csv.find("x,U1,U2") != std::string::npos);
  const json j = read_json("solve", "solve.json");
  CHECK(j["nondegenerate"].get<bool>());
}

TEST_CASE("numerical failures exit with status 3 and leave a diagnostic") {
  const json cfg = {{"command", "solve"},
                    {"system", {{"system", "rotation_example"}}},
                    {"U0", {0.0, 0.0}},
                    {"U1II", {1.0, 0.0}}};
  const Run r = run("solve", cfg, "numfail");
  CHECK(r.code == 3);
  CHECK(fs::exists(scratch_dir() / "numfail" / "out" / "diagnostic.json"));
}

TEST_CASE("identical configurations produce identical hashes") {
  const json cfg = {{"command", "classify"}, {"gas", kShockGas}};
  REQUIRE(run("classify", cfg, "hash_a").code == 0);
  REQUIRE(run("classify", cfg, "hash_b").code == 0);
  const json a = read_json("hash_a", "classify.json");
  const json b = read_json("hash_b", "classify.json");
  CHECK(a["provenance"]["config_hash"] == b["provenance"]["config_hash"]);
  json other = cfg;
  other["gas"]["rho0"] = 0.4;
  REQUIRE(run("classify", other, "hash_c").code == 0);
  CHECK(read_json("hash_c", "classify.json")["provenance"]["config_hash"] != a["provenance"]["config_hash"]);
}

TEST_CASE("sweep-nu appends fitted slopes as trailing comments") {
  const json cfg = {{"command", "sweep-nu"},
                    {"gas", kShockGas},
                    {"nu_list", {1e-2, 3e-3, 1e-3, 3e-4}},
                    {"p_list", {1.0}}};
  const Run r = run("sweep-nu", cfg, "sweep");
  REQUIRE(r.code == 0);
  const std::string csv = slurp(scratch_dir() / "sweep" / "out" / "sweep_nu.csv");
  const auto pos = csv.find("# slope_L1:");
  REQUIRE(pos != std::string::npos);
  CHECK(csv.find("# slope_shock_location:") != std::string::npos);
  CHECK(csv.find_first_not_of(" \n", csv.find('\n', pos)) == csv.find("# slope_shock_location:"));
}
