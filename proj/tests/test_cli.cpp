#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#ifndef TELM_CLI_BIN
#error "TELM_CLI_BIN must point at the telm executable"
#endif
#ifndef TELM_ORACLE_BIN
#error "TELM_ORACLE_BIN must point at the telm-oracle executable"
#endif

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("telm-cli-" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int telm(const std::string& args, const std::string& stdout_file = "/dev/null") {
  const std::string cmd = std::string(TELM_CLI_BIN) + " " + args + " > " + stdout_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sample_lines(const std::string& path) {
  std::ifstream in(path);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.find(R"("kind":"sample")") != std::string::npos) out += line + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("plan, run, analyze, report") {
  TempDir tmp;
  REQUIRE(telm("plan --half-width 0.1 --alpha 0.01 --min-length 8 --max-length 12 --seed 3 --out " +
                   (tmp / "plan.json"),
               tmp / "plan.out") == 0);
  const auto sizes = nlohmann::json::parse(slurp(tmp / "plan.out"));
  CHECK(sizes["hoeffding_n"] == 265);

  REQUIRE(telm("run --plan " + (tmp / "plan.json") + " --endpoint oracle:linear:1,-0.02,0.5 --seed 3 --out " +
               (tmp / "run.jsonl") + " --in-flight 4 --timing " + (tmp / "timing.jsonl")) == 0);
  REQUIRE(telm("run --plan " + (tmp / "plan.json") + " --endpoint oracle:linear:1,-0.02,0.5 --seed 3 --out " +
               (tmp / "run1.jsonl") + " --in-flight 1") == 0);

  REQUIRE(telm("analyze --run " + (tmp / "run.jsonl") + " --out " + (tmp / "a.json") + " --csv-prefix " +
               (tmp / "plot-")) == 0);
  REQUIRE(telm("analyze --run " + (tmp / "run1.jsonl") + " --out " + (tmp / "a1.json")) == 0);
  CHECK(slurp(tmp / "a.json") == slurp(tmp / "a1.json"));
  const auto a = nlohmann::json::parse(slurp(tmp / "a.json"));
  CHECK(a["dispatched"] == 5 * 265);
  CHECK(fs::exists(tmp / "plot-accuracy-monotonicity.csv"));

  REQUIRE(telm("report --run " + (tmp / "run.jsonl") + " --out " + (tmp / "r.json") + " --markdown " +
               (tmp / "r.md")) == 0);
  CHECK(slurp(tmp / "r.md").find("| Reproducibility |") != std::string::npos);
  CHECK(nlohmann::json::parse(slurp(tmp / "r.json"))["template"] == "TEL'M");

  // The subprocess responder and the in-process oracle share one noise
  // convention, so their sample lines agree.
  REQUIRE(telm("run --plan " + (tmp / "plan.json") + " --endpoint oracle:constant:0.8 --seed 3 --out " +
               (tmp / "local.jsonl")) == 0);
  REQUIRE(telm("run --plan " + (tmp / "plan.json") + " --endpoint 'subprocess:" + TELM_ORACLE_BIN +
               " --seed 3 --accuracy 0.8' --seed 3 --out " + (tmp / "sub.jsonl")) == 0);
  CHECK(sample_lines(tmp / "local.jsonl") == sample_lines(tmp / "sub.jsonl"));

  // A responder that exits at startup is an endpoint failure.
  CHECK(telm("run --plan " + (tmp / "plan.json") + " --endpoint 'subprocess:" + TELM_ORACLE_BIN +
             " --curve " + (tmp / "missing.json") + "' --out " + (tmp / "bad.jsonl")) == 3);
}

TEST_CASE("mono and bounds") {
  TempDir tmp;
  std::ofstream(tmp / "b.csv") << "index,weight,mean,delta\n1,0.5,0.8,0.05\n2,0.5,0.9,0.05\n";
  REQUIRE(telm("mono --csv " + (tmp / "b.csv") + " --out " + (tmp / "sol.csv"), tmp / "m.json") == 0);
  const auto m = nlohmann::json::parse(slurp(tmp / "m.json"));
  CHECK(m["distance_lower_bound"].get<double>() == doctest::Approx(0.05));
  CHECK(slurp(tmp / "sol.csv").rfind("index,mean,", 0) == 0);

  REQUIRE(telm("bounds --p 0.9 --q 0.95", tmp / "b.json") == 0);
  const auto b = nlohmann::json::parse(slurp(tmp / "b.json"));
  CHECK(b["r_lower"] == 0.85);
  CHECK(b["r_upper"] == 0.95);
  CHECK(b["r_independent"].get<double>() == doctest::Approx(0.855));
}

TEST_CASE("exit codes") {
  TempDir tmp;
  CHECK(telm("") == 2);
  CHECK(telm("bounds --p 0.3 --q 0.9") == 2);
  CHECK(telm("plan --half-width 0 --alpha 0.05") == 2);
  CHECK(telm("run --plan /no/such/plan.json --endpoint oracle:exact --out " + (tmp / "x")) == 2);
  std::ofstream(tmp / "bad.csv") << "1,0.7,0.5,0.1\n2,0.7,0.4,0.1\n";
  CHECK(telm("mono --csv " + (tmp / "bad.csv")) == 2);

  REQUIRE(telm("plan --half-width 0.2 --alpha 0.1 --min-length 3 --max-length 4 --out " + (tmp / "p.json")) == 0);
  CHECK(telm("run --plan " + (tmp / "p.json") + " --endpoint ftp://x --out " + (tmp / "x")) == 2);
  CHECK(telm("run --plan " + (tmp / "p.json") + " --endpoint http://127.0.0.1:9 --timeout-ms 300 --out " +
             (tmp / "x")) == 3);
  CHECK(telm("run --plan " + (tmp / "p.json") + " --endpoint subprocess:/no/such/binary --out " +
             (tmp / "x")) == 3);
  CHECK(telm("--help") == 0);
}
