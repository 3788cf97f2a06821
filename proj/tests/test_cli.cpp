#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "permbo/cli.hpp"
#include "permbo/config.hpp"

using namespace permbo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("permbo_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const std::vector<std::string> kSmall{"--trials", "2", "--T", "2", "--override",
                                      "acquisition.raw_samples=16", "--override",
                                      "acquisition.restarts=1", "--override",
                                      "acquisition.ascent_steps=2", "--override", "gp_fit.restarts=1",
                                      "--override", "benchmarks=[\"particle\",\"max_spanning_tree\"]"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double x : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, -0.0})
    CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("bench run writes a deterministic bundle") {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  REQUIRE(run_cli(with({"bench", "run", "--out", a.string(), "--seed", "7"}, kSmall)) == 0);
  REQUIRE(run_cli(with({"bench", "run", "--out", b.string(), "--seed", "7", "--threads", "2"}, kSmall)) == 0);
  const std::string ta = slurp(a / "trajectories.csv");
  CHECK(ta == slurp(b / "trajectories.csv"));
  CHECK(slurp(a / "diagnostics.csv") == slurp(b / "diagnostics.csv"));

  const auto L = lines(ta);
  REQUIRE(L.size() == 2 + 2 * 2 * 2 * 3);
  CHECK(L[0] == "# schema=permbo/1 base_seed=7");
  CHECK(L[1] == "benchmark,surrogate,variant,trial,iteration,best_so_far,raw_value,phase_ms");
  double prev = -INFINITY;
  for (std::size_t i = 2; i < L.size(); ++i) {
    const auto f = split(L[i]);
    REQUIRE(f.size() == 8);
    CHECK(f[7].empty());
    const double best = std::stod(f[5]), raw = std::stod(f[6]);
    CHECK(raw <= best);
    if (f[4] != "0") CHECK(best >= prev);
    prev = best;
  }
  CHECK(split(L[2])[0] == "particle");
  CHECK(split(L.back())[0] == "max_spanning_tree");

  const Json s = Json::parse(slurp(a / "summary.json"));
  CHECK(s["schema"] == kSchemaVersion);
  CHECK(s["base_seed"] == 7);
  CHECK(s.contains("timestamp"));
  REQUIRE(s["runs"].size() == 4);
  CHECK(s["runs"][0]["completed"] == 2);
  CHECK(s["runs"][0]["trials"][1]["seed"] == 8);

  // The echoed config reproduces the run on its own.
  const Json echo = Json::parse(slurp(a / "config.json"));
  CHECK(resolve_config(echo) == echo);
  const fs::path c = scratch("run_c");
  REQUIRE(run_cli({"bench", "run", "--config", (a / "config.json").string(), "--out", c.string()}) == 0);
  CHECK(slurp(c / "trajectories.csv") == ta);
  CHECK(slurp(c / "config.json") == slurp(a / "config.json"));
}

TEST_CASE("timing fills phase_ms") {
  const fs::path a = scratch("timing");
  REQUIRE(run_cli({"bench", "run", "--out", a.string(), "--trials", "1", "--T", "1", "--override",
                   "surrogates=[\"GP_flat\"]", "--override", "experiment.timing=true"}) == 0);
  const auto L = lines(slurp(a / "trajectories.csv"));
  REQUIRE(L.size() == 4);
  CHECK(split(L[2])[7].empty());
  CHECK(std::stod(split(L[3])[7]) >= 0.0);
}

TEST_CASE("config errors exit 2 with a machine-readable record") {
  const fs::path a = scratch("bad");
  CHECK(run_cli({"bench", "run", "--out", a.string(), "--override", "experiment.T=-3"}) == 2);
  const Json e = Json::parse(slurp(a / "error.json"));
  CHECK(e["schema"] == kSchemaVersion);
  CHECK(e["error"]["field"] == "experiment.T");
  CHECK(!e["error"]["message"].get<std::string>().empty());
  CHECK(!fs::exists(a / "trajectories.csv"));

  const fs::path b = scratch("bad_diag");
  CHECK(run_cli({"diag", "spectrum", "--out", b.string()}) == 2);
  CHECK(Json::parse(slurp(b / "error.json"))["error"]["field"] == "diag");
  CHECK(run_cli({"bench", "walk", "--out", b.string()}) == 2);

  const fs::path c = scratch("bad_file");
  fs::create_directories(c);
  std::ofstream(c / "cfg.json") << "{\"experiment\": {\"T\": 2,}}";
  CHECK(run_cli({"bench", "run", "--config", (c / "cfg.json").string(), "--out", c.string()}) == 2);
  CHECK(Json::parse(slurp(c / "error.json"))["error"]["field"] == "--config");
  CHECK(run_cli({"bench"}) == 2);
  CHECK(run_cli({"bench", "run", "--no-such-flag"}) == 2);
}

TEST_CASE("diag psd with one draw") {
  const fs::path a = scratch("psd");
  REQUIRE(run_cli({"diag", "psd", "--out", a.string(), "--draws", "1", "--override",
                   "diagnostics.psd.sizes=[12]"}) == 0);
  const auto L = lines(slurp(a / "diagnostics.csv"));
  CHECK(L[1] == "record_type,benchmark,surrogate,variant,trial,iteration,N,metric,value");
  std::size_t violations = 0, draws = 0;
  for (const auto& l : L) {
    const auto f = split(l);
    if (f.size() != 9) continue;
    if (f[0] == "psd_offline") ++draws;
    if (f[7].rfind("violation", 0) == 0) {
      ++violations;
      CHECK(std::stod(f[8]) == 0.0);
    }
  }
  CHECK(draws == 3);
  CHECK(violations == 9);
  const Json s = Json::parse(slurp(a / "summary.json"));
  CHECK(s["psd"]["dimension"] == 20);
  CHECK(lines(slurp(a / "trajectories.csv")).size() == 2);
}

TEST_CASE("diag posterior records every iteration") {
  const fs::path a = scratch("posterior");
  REQUIRE(run_cli(with({"diag", "posterior", "--out", a.string(), "--override",
                        "diagnostics.posterior.probe_size=8", "--override", "surrogates=[\"GP_Perm\"]"},
                       kSmall)) == 0);
  std::size_t rows = 0;
  for (const auto& l : lines(slurp(a / "diagnostics.csv"))) {
    const auto f = split(l);
    if (f.size() == 9 && f[0] == "posterior" && f[7] == "sigma_next") {
      ++rows;
      CHECK(std::stod(f[8]) >= 0.0);
    }
  }
  CHECK(rows == 2 * 2 * 2);
  const Json s = Json::parse(slurp(a / "summary.json"));
  CHECK(s["posterior"]["runs"].size() == 2);
}

TEST_CASE("sweep reports a selection") {
  const fs::path a = scratch("sweep");
  REQUIRE(run_cli(with({"bench", "sweep", "--out", a.string(), "--override", "surrogates=[\"GP_Perm\"]",
                        "--override", "sweep.values=[0.5]"},
                       kSmall)) == 0);
  const Json sel = Json::parse(slurp(a / "summary.json"))["selection"];
  CHECK(sel["parameter"] == "gp_perm.epsilon");
  CHECK(sel["best"]["variant"] == "gp_perm.epsilon=0.5");
  CHECK(sel["variants"].size() == 1);

  const fs::path b = scratch("sweep_twins");
  REQUIRE(run_cli(with({"bench", "sweep", "--out", b.string(), "--override", "surrogates=[\"GP_flat\"]",
                        "--override", "sweep.parameter=gp_perm.ip_weight", "--override",
                        "sweep.values=[1,1]"},
                       kSmall)) == 0);
  const Json twins = Json::parse(slurp(b / "summary.json"))["selection"];
  CHECK(twins["variants"][0]["score"] == twins["variants"][1]["score"]);
  CHECK(twins["best"] == twins["variants"][0]);

  const fs::path c = scratch("sweep_empty");
  CHECK(run_cli({"bench", "sweep", "--out", c.string(), "--override", "sweep.values=[]"}) == 2);
}
