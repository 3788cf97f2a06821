#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "permbo/config.hpp"

using namespace permbo;

namespace {

std::string failing_field(const Json& user) {
  try {
    run_configs(resolve_config(user));
  } catch (const ConfigError& e) {
    return e.field;
  }
  return "";
}

}  // namespace

TEST_CASE("defaults resolve to a valid run") {
  const Json c = resolve_config(Json::object());
  CHECK(c == default_config());
  CHECK(c["schema"] == kSchemaVersion);
  const auto runs = run_configs(c);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].surrogate == KernelFamily::GpPerm);
  CHECK(runs[1].surrogate == KernelFamily::Flat);
  CHECK(runs[0].benchmark.id == BenchmarkId::TwosetAblation);
  CHECK(!runs[0].feasibility);
  CHECK(c["sweep"]["values"].size() == 10);
}

TEST_CASE("config echo round-trips") {
  Json c = resolve_config(Json::object());
  apply_override(c, "benchmarks=[\"ccs_like\",\"particle\"]");
  apply_override(c, "experiment.T=3");
  apply_override(c, "gp_perm.epsilon=0.05");
  apply_override(c, "feasibility.enabled=true");
  apply_override(c, "feasibility.mask=disk");
  apply_override(c, "benchmark_params.particle.constants.target=[0.25,-0.5]");
  const Json echoed = Json::parse(c.dump(2));
  CHECK(resolve_config(echoed) == c);
  CHECK(resolve_config(echoed).dump() == c.dump());
  const auto a = run_configs(c), b = run_configs(resolve_config(echoed));
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].T == 3);
    CHECK(a[i].gp_perm.sinkhorn.epsilon == 0.05);
    CHECK(a[i].feasibility->kind == MaskKind::Disk);
    CHECK(benchmark_to_json(a[i].benchmark) == benchmark_to_json(b[i].benchmark));
  }
  CHECK(a[2].benchmark.particle.target.x == 0.25);
  CHECK(a[2].benchmark.particle.target.y == -0.5);
}

TEST_CASE("benchmark specs survive serialization") {
  for (BenchmarkId id : all_benchmarks()) {
    BenchmarkSpec s = default_spec(id);
    s.aux_seed = 17;
    const BenchmarkSpec back = benchmark_from_json(id, benchmark_to_json(s));
    CHECK(benchmark_to_json(back) == benchmark_to_json(s));
    CHECK(back.shape().flat_dim() == s.shape().flat_dim());
  }
}

TEST_CASE("overrides parse JSON values and fall back to strings") {
  Json c = resolve_config(Json::object());
  apply_override(c, "feasibility.file=masks/a.txt");
  CHECK(c["feasibility"]["file"] == "masks/a.txt");
  apply_override(c, "acquisition.q=4");
  CHECK(c["acquisition"]["q"] == 4);
  apply_override(c, "gp_fit.learn_noise=false");
  CHECK(c["gp_fit"]["learn_noise"] == false);
  apply_override(c, "gp_perm.ip_weight=0");
  CHECK(c["gp_perm"]["ip_weight"].get<double>() == 0.0);
  CHECK_THROWS_AS(apply_override(c, "no_equals"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "=3"), ConfigError);
  const Json before = c;
  CHECK_THROWS_AS(apply_override(c, "acquisition.q=two"), ConfigError);
  CHECK(c == before);
}

TEST_CASE("invalid configs name the offending field") {
  CHECK(failing_field({{"experiment", {{"T", -1}}}}) == "experiment.T");
  CHECK(failing_field({{"experiment", {{"bogus", 1}}}}) == "experiment.bogus");
  CHECK(failing_field({{"gp_perm", {{"epsilon", "small"}}}}) == "gp_perm.epsilon");
  CHECK(failing_field({{"acquisition", {{"q", 1.5}}}}) == "acquisition.q");
  CHECK(failing_field({{"schema", "permbo/0"}}) == "schema");
  CHECK(failing_field({{"benchmarks", {"nope"}}}) == "benchmarks[0]");
  CHECK(failing_field({{"benchmarks", Json::array()}}) == "benchmarks");
  CHECK(failing_field({{"surrogates", {"GP_Perm", "GP_Nope"}}}) == "surrogates[1]");
  CHECK(failing_field({{"feasibility", {{"enabled", true}, {"mask", "hexagon"}}}}) == "feasibility.mask");
  CHECK(failing_field({{"benchmark_params", {{"particle", {{"constants", {{"target", {1.0}}}}}}}}}) ==
        "benchmark_params.particle.constants.target");
  CHECK(failing_field({{"gp_perm", {{"epsilon", 0.0}}}}) == "twoset_ablation/GP_Perm");
  CHECK(failing_field({{"experiment", {{"n_trials", 0}}}}) == "twoset_ablation/GP_Perm");
  CHECK(failing_field(Json::array()) == "<root>");
  CHECK(failing_field(Json::object()).empty());
}
