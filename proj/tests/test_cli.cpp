#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ratiopt/cli/app.hpp"
#include "ratiopt/cli/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ratiopt;
using namespace ratiopt::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ratiopt_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

struct Result {
  int code;
  std::string out, err;
};

Result run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "ratiopt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Removes the wall-clock columns so two runs can be compared byte for byte.
std::string without_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    out += (pos == std::string::npos ? line : line.substr(0, pos)) + "\n";
  }
  return out;
}

int exit_status(const std::string& command) {
  const int raw = std::system(command.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST_CASE("config defaults and typed access") {
  Config c;
  CHECK(c.num("beta") == 0.015);
  CHECK(c.integer("imax") == 2000);
  CHECK(c.num("rel_tol") == 1e-8);
  CHECK(c.origin("beta") == "default");
  CHECK(c.int_list("m_list") == std::vector<long long>{32, 64});
  CHECK_THROWS_AS(c.num("family"), Error);
  CHECK(is_known_key("gamma"));
  CHECK_FALSE(is_known_key("gama"));
}

TEST_CASE("unknown config keys name the key and line") {
  Config c;
  try {
    c.load_text("gamma = 1e-3\n# comment\n\nbetta = 2\n", "run.cfg");
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("betta") != std::string::npos);
    CHECK(msg.find("run.cfg:4") != std::string::npos);
  }
  try {
    c.load_text("gamma 3\n", "run.cfg");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("run.cfg:1") != std::string::npos);
  }
  CHECK_THROWS_AS(c.apply_preset("table9"), Error);
}

TEST_CASE("layer precedence") {
  Config c;
  c.apply_preset("table1-gaussian");
  CHECK(c.integer("n") == 2048);
  c.load_text("seed = 4\nn = 512\n", "f.cfg");
  CHECK(c.integer("n") == 512);
  ::setenv("RATIOPT_SEED", "77", 1);
  c.apply_env();
  ::unsetenv("RATIOPT_SEED");
  CHECK(c.u64("seed") == 77);
  CHECK(c.origin("seed") == "env RATIOPT_SEED");
  c.set("seed", "9", "flag");
  CHECK(c.u64("seed") == 9);
  for (const auto& name : preset_names()) CHECK_NOTHROW(Config().apply_preset(name));
}

TEST_CASE("manifest hash depends on command and config only") {
  Config a, b;
  CHECK(canonical_manifest("solve", a) == canonical_manifest("solve", b));
  CHECK(canonical_manifest("solve", a) != canonical_manifest("identify", a));
  b.set("gamma", "2e-4", "flag");
  CHECK(fnv1a64(canonical_manifest("solve", a)) != fnv1a64(canonical_manifest("solve", b)));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("solve with a zero iteration cap exits 2") {
  const auto dir = scratch("imax0");
  const auto r = run_args({"solve", "--solver", "admm", "--imax", "0", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.out.find("total_it=0") != std::string::npos);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "series.csv"));
}

TEST_CASE("malformed keys exit 1 naming the key") {
  const auto dir = scratch("badkey");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "bad.cfg");
    f << "gamma = 1e-3\nlamda = 4\n";
  }
  auto r = run_args({"solve", "--config", (dir / "bad.cfg").string(), "--out", dir.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("lamda") != std::string::npos);
  CHECK(r.err.find(":2") != std::string::npos);

  r = run_args({"solve", "--set", "lamda=4"});
  CHECK(r.code == 1);
  CHECK(r.err.find("lamda") != std::string::npos);

  CHECK(run_args({"solve", "--no-such-flag"}).code == 1);
  CHECK(run_args({}).code == 1);
  CHECK(run_args({"--help"}).code == 0);
  CHECK(run_args({"solve", "--beta", "-1", "--out", dir.string()}).code == 1);
}

TEST_CASE("solve converges on an easy instance and is reproducible") {
  const auto d1 = scratch("solve1"), d2 = scratch("solve2");
  const std::vector<std::string> common{"solve", "--beta", "1e-4", "--m", "48", "--n", "128", "--s", "3"};
  auto a1 = common, a2 = common;
  a1.insert(a1.end(), {"--out", d1.string()});
  a2.insert(a2.end(), {"--out", d2.string()});
  const auto r1 = run_args(a1), r2 = run_args(a2);
  CHECK(r1.code == 0);
  CHECK(r2.code == 0);
  CHECK(r1.out.find("status=converged") != std::string::npos);
  const std::string s1 = slurp(d1 / "series.csv"), s2 = slurp(d2 / "series.csv");
  CHECK(s1.rfind("# manifest_hash=", 0) == 0);
  // the out key differs between the two runs, so only the data rows must agree
  CHECK(s1.substr(s1.find('\n')) == s2.substr(s2.find('\n')));
  const std::string report = slurp(d1 / "report.json");
  CHECK(report.find("\"manifest_hash\"") != std::string::npos);
  CHECK(report.find("\"started\"") != std::string::npos);
}

TEST_CASE("identify with one seed is deterministic and an empty grid fails") {
  const auto d1 = scratch("id1"), d2 = scratch("id2");
  const std::vector<std::string> args{"identify", "--n", "64", "--m-list", "24", "--s-list", "2", "--T-list", "5",
                                      "--seeds", "1", "--gamma", "1e-3", "--beta", "1e-3"};
  auto a1 = args, a2 = args;
  a1.insert(a1.end(), {"--out", d1.string()});
  a2.insert(a2.end(), {"--out", d2.string(), "--jobs", "2"});
  CHECK(run_args(a1).code == 0);
  CHECK(run_args(a2).code == 0);
  const std::string h1 = slurp(d1 / "identify.csv"), h2 = slurp(d2 / "identify.csv");
  CHECK(h1.substr(h1.find('\n')) == h2.substr(h2.find('\n')));
  const std::string r1 = without_timing(slurp(d1 / "identify_runs.csv"));
  const std::string r2 = without_timing(slurp(d2 / "identify_runs.csv"));
  CHECK(r1.substr(r1.find('\n')) == r2.substr(r2.find('\n')));

  auto empty = args;
  empty[4] = "";
  empty.insert(empty.end(), {"--out", scratch("id3").string()});
  CHECK(run_args(empty).code == 1);
}

TEST_CASE("single-solver profile gives a flat curve") {
  const auto dir = scratch("prof");
  const auto r = run_args({"profile", "--m", "24", "--n", "64", "--s-list", "2", "--solvers", "hafam5", "--gamma",
                           "1e-3", "--beta", "1e-3", "--out", dir.string()});
  CHECK(r.code == 0);
  std::istringstream in(slurp(dir / "profile_kkt.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# manifest_hash=", 0) == 0);
  std::getline(in, line);
  CHECK(line == "tau,solver,pi");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.substr(line.rfind(',') + 1) == "1");
  }
  CHECK(rows == 37);
}

TEST_CASE("realdata is deterministic for a fixed seed") {
  const std::string data = std::string(RATIOPT_DATA_DIR) + "/diabetes_schema_smoke.csv";
  const auto d1 = scratch("rd1"), d2 = scratch("rd2");
  const std::vector<std::string> args{"realdata", "--preset", "diabetes-smoke", "--data", data, "--reps", "1"};
  auto a1 = args, a2 = args;
  a1.insert(a1.end(), {"--out", d1.string()});
  a2.insert(a2.end(), {"--out", d2.string()});
  CHECK(run_args(a1).code == 0);
  CHECK(run_args(a2).code == 0);
  auto rows = [](const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line, out;
    std::getline(in, line);
    while (std::getline(in, line)) {
      // drop cpu and error columns
      auto cut = line;
      for (int k = 0; k < 2; ++k) cut = cut.substr(0, cut.rfind(','));
      out += cut + "\n";
    }
    return out;
  };
  CHECK(rows(d1 / "realdata_runs.csv") == rows(d2 / "realdata_runs.csv"));
  CHECK(run_args({"realdata", "--data", "/nonexistent.csv", "--out", d1.string()}).code == 1);
}

TEST_CASE("installed binary honors the exit code contract") {
  const std::string tool = RATIOPT_TOOL;
  const auto dir = scratch("bin");
  CHECK(exit_status(tool + " solve --solver admm --imax 0 --out " + dir.string() + " > /dev/null") == 2);
  CHECK(exit_status(tool + " solve --set nope=1 --out " + dir.string() + " 2> /dev/null") == 1);
  CHECK(exit_status(tool + " --version > /dev/null") == 0);
}
