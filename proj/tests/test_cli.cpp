#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(CLI_WORK_DIR);
const fs::path kScenarios = SCENARIO_DIR;

int run(const std::string& args, const std::string& stdout_file = "/dev/null") {
  const std::string cmd = std::string(PUMPSIM_EXE) + " " + args + " > " + stdout_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_file(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("states lists 43 labels and is stable") {
  fs::create_directories(kWork);
  const auto a = kWork / "states_a.txt";
  const auto b = kWork / "states_b.txt";
  CHECK(run("states", a.string()) == 0);
  CHECK(run("states", b.string()) == 0);
  const std::string text = slurp(a);
  CHECK(text == slurp(b));
  CHECK(text.find("0, g3_m-3\n") != std::string::npos);
  CHECK(text.find("42, e5_m5\n") != std::string::npos);
  CHECK(text.find("# states=43") != std::string::npos);
  const auto p = kWork / "states_prune.txt";
  CHECK(run("states --prune --config " + (kScenarios / "pumping_dynamics.ini").string(), p.string()) == 0);
  CHECK(slurp(p).find("# active=") != std::string::npos);
  CHECK(run("states --prune") == 2);
}

TEST_CASE("config errors exit with 2 and name the field") {
  const auto bad = write_file("bad.ini", "[beams.pb]\ntarget = 4->4\nintensity = 1\n");
  const std::string cmd = std::string(PUMPSIM_EXE) + " pump --config " + bad.string() + " 2>&1 >/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string err;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) err += buf;
  const int status = pclose(pipe);
  CHECK(WEXITSTATUS(status) == 2);
  CHECK(err.find("intensity") != std::string::npos);
  CHECK(run("pump") == 2);
  CHECK(run("nonsense") == 2);
}

TEST_CASE("pump output feeds the fit") {
  const auto out = kWork / "pump";
  CHECK(run("pump --config " + (kScenarios / "pumping_dynamics.ini").string() + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "trajectory.csv"));
  CHECK(fs::exists(out / "metrics.txt"));
  const auto fit_out = kWork / "fit";
  const auto report = kWork / "fit.txt";
  CHECK(run("fit --config " + (kScenarios / "pumping_dynamics.ini").string() + " --out " + fit_out.string() +
                " --data " + (out / "m0_fraction.csv").string() + " --data " + (out / "m1_fraction.csv").string(),
            report.string()) == 0);
  const std::string text = slurp(report);
  const auto pos = text.find("alpha_hat=");
  REQUIRE(pos != std::string::npos);
  const double alpha = std::stod(text.substr(pos + 10));
  CHECK(std::abs(alpha - 0.013) < 1e-4);
  CHECK(text.find("converged=true") != std::string::npos);
  CHECK(fs::exists(fit_out / "fit.csv"));
}

TEST_CASE("data errors exit with 3") {
  const auto empty = write_file("empty.csv", "# no rows\n");
  CHECK(run("fit --config " + (kScenarios / "pumping_dynamics.ini").string() + " --out " + (kWork / "e").string() +
            " --data " + empty.string()) == 3);
  const auto broken = write_file("broken.csv", "0.001, 0.5\n0.002, x\n");
  const std::string cmd = std::string(PUMPSIM_EXE) + " fit --config " + (kScenarios / "pumping_dynamics.ini").string() +
                          " --out " + (kWork / "e").string() + " --data " + broken.string() + " 2>&1 >/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string err;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) err += buf;
  CHECK(WEXITSTATUS(pclose(pipe)) == 3);
  CHECK(err.find("broken.csv:2") != std::string::npos);
}
