#include "permbo/config.hpp"

namespace permbo {

namespace {

Json point(Point2 p) { return Json::array({p.x, p.y}); }

Point2 to_point(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

Json benchmark_to_json(const BenchmarkSpec& s) {
  Json j;
  if (s.two_set()) {
    j["n_inj"] = s.n_inj;
    j["n_prod"] = s.n_prod;
  } else {
    j["n_points"] = s.n_points;
  }
  j["aux_seed"] = s.aux_seed;
  j["lower"] = s.lower;
  j["upper"] = s.upper;
  Json c;
  switch (s.id) {
    case BenchmarkId::Particle:
      c = {{"A", s.particle.A}, {"B", s.particle.B}, {"alpha", s.particle.alpha},
           {"beta", s.particle.beta}, {"eps", s.particle.eps}, {"target", point(s.particle.target)}};
      break;
    case BenchmarkId::MaxArea:
      c = {{"r", s.max_area.r}, {"C", s.max_area.C}, {"k", s.max_area.k},
           {"mc_points", s.max_area.mc_points}};
      break;
    case BenchmarkId::MmdMatch:
      c = {{"M", s.mmd.M}, {"weight1", s.mmd.weight1}, {"mean1", point(s.mmd.mean1)},
           {"mean2", point(s.mmd.mean2)}, {"sd", s.mmd.sd}, {"bandwidth", s.mmd.bandwidth},
           {"median_subsample", s.mmd.median_subsample}};
      break;
    case BenchmarkId::MaxSpanningTree: c = Json::object(); break;
    case BenchmarkId::Facility:
      c = {{"sigma", s.facility.sigma}, {"lambda", s.facility.lambda}, {"kappa", s.facility.kappa},
           {"r_rep", s.facility.r_rep}, {"M", s.facility.M}};
      break;
    case BenchmarkId::SoftKmedoids:
      c = {{"tau", s.kmedoids.tau}, {"M", s.kmedoids.M}, {"ring_radius", s.kmedoids.ring_radius},
           {"ring_sd", s.kmedoids.ring_sd}, {"ring_fraction", s.kmedoids.ring_fraction},
           {"blob_center", point(s.kmedoids.blob_center)}, {"blob_sd", s.kmedoids.blob_sd}};
      break;
    case BenchmarkId::CcsLike:
      c = {{"d_star", s.ccs.d_star}, {"sigma_d", s.ccs.sigma_d}, {"sigma_theta", s.ccs.sigma_theta},
           {"u", point(s.ccs.u)}, {"tau", s.ccs.tau}, {"w_inj", s.ccs.w_inj},
           {"w_prod", s.ccs.w_prod}, {"eps", s.ccs.eps}};
      break;
    case BenchmarkId::TwosetAblation:
      c = {{"tau", s.twoset.tau}, {"lambda_inj", s.twoset.lambda_inj},
           {"lambda_prod", s.twoset.lambda_prod}, {"eps", s.twoset.eps}};
      break;
  }
  j["constants"] = c;
  return j;
}

BenchmarkSpec benchmark_from_json(BenchmarkId id, const Json& j) {
  BenchmarkSpec s = default_spec(id);
  if (s.two_set()) {
    s.n_inj = j.at("n_inj").get<std::size_t>();
    s.n_prod = j.at("n_prod").get<std::size_t>();
  } else {
    s.n_points = j.at("n_points").get<std::size_t>();
  }
  s.aux_seed = j.at("aux_seed").get<std::uint64_t>();
  s.lower = j.at("lower").get<double>();
  s.upper = j.at("upper").get<double>();
  const Json& c = j.at("constants");
  auto num = [&](const char* k) { return c.at(k).get<double>(); };
  auto count = [&](const char* k) { return c.at(k).get<std::size_t>(); };
  switch (id) {
    case BenchmarkId::Particle:
      s.particle = {num("A"), num("B"), num("alpha"), num("beta"), num("eps"), to_point(c.at("target"))};
      break;
    case BenchmarkId::MaxArea: s.max_area = {num("r"), num("C"), num("k"), count("mc_points")}; break;
    case BenchmarkId::MmdMatch:
      s.mmd = {count("M"), num("weight1"), to_point(c.at("mean1")), to_point(c.at("mean2")),
               num("sd"), num("bandwidth"), count("median_subsample")};
      break;
    case BenchmarkId::MaxSpanningTree: break;
    case BenchmarkId::Facility:
      s.facility = {num("sigma"), num("lambda"), num("kappa"), num("r_rep"), count("M")};
      break;
    case BenchmarkId::SoftKmedoids:
      s.kmedoids = {num("tau"), count("M"), num("ring_radius"), num("ring_sd"), num("ring_fraction"),
                    to_point(c.at("blob_center")), num("blob_sd")};
      break;
    case BenchmarkId::CcsLike:
      s.ccs = {num("d_star"), num("sigma_d"), num("sigma_theta"), to_point(c.at("u")),
               num("tau"), num("w_inj"), num("w_prod"), num("eps")};
      break;
    case BenchmarkId::TwosetAblation:
      s.twoset = {num("tau"), num("lambda_inj"), num("lambda_prod"), num("eps")};
      break;
  }
  return s;
}

Json default_config() {
  const RunConfig r;
  Json bp;
  for (BenchmarkId id : all_benchmarks()) bp[to_string(id)] = benchmark_to_json(default_spec(id));
  const auto& f = r.fit;
  const auto& a = r.acquisition;
  const FeasibilityConfig fe;
  const SinkhornConfig sk;
  return Json{
      {"schema", kSchemaVersion},
      {"base_seed", r.base_seed},
      {"threads", 0},
      {"benchmarks", Json::array({"twoset_ablation"})},
      {"surrogates", Json::array({"GP_Perm", "GP_flat"})},
      {"experiment",
       {{"n_trials", 10}, {"n_init", r.n_init}, {"T", r.T}, {"penalty_margin", r.penalty_margin},
        {"timing", false}}},
      {"gp_perm",
       {{"epsilon", sk.epsilon}, {"max_iters", sk.max_iters}, {"tol", sk.tol},
        {"ip_weight", r.gp_perm.ip_weight}}},
      {"gp_fit",
       {{"restarts", f.restarts}, {"max_steps", f.max_steps}, {"noise_init", f.noise_init},
        {"noise_floor", f.noise_floor}, {"learn_noise", f.learn_noise}, {"optimize", f.optimize},
        {"jitter_ladder", f.jitter_ladder}, {"restart_spread", f.restart_spread},
        {"grad_tol", f.grad_tol}, {"lengthscale_prior_shape", f.lengthscale_prior_shape},
        {"lengthscale_prior_rate", f.lengthscale_prior_rate}}},
      {"acquisition",
       {{"q", a.q}, {"mc_samples", a.mc_samples}, {"tau0", a.tau0}, {"tau_max", a.tau_max},
        {"restarts", a.restarts}, {"raw_samples", a.raw_samples}, {"ascent_steps", a.ascent_steps},
        {"fd_step", a.fd_step}}},
      {"feasibility",
       {{"enabled", false}, {"mask", to_string(fe.kind)}, {"nx", fe.nx}, {"ny", fe.ny},
        {"seed", fe.seed}, {"file", fe.file}, {"k_nearest", fe.k_nearest},
        {"barrier",
         {{"enabled", fe.use_barrier}, {"margin", fe.barrier.margin}, {"weight", fe.barrier.weight},
          {"sharpness", fe.barrier.sharpness}}}}},
      {"benchmark_params", bp},
      {"sweep",
       {{"parameter", "gp_perm.epsilon"},
        {"values", Json::array({1e-2, 5e-2, 5e-3, 1e-4, 0.5, 1.0, 5.0, 10.0, 2.0, 0.1})}}},
      {"diagnostics",
       {{"psd",
         {{"n_inj", 4}, {"n_prod", 6}, {"sizes", Json::array({64, 128})}, {"draws", 20},
          {"seed", 0}, {"training", false}, {"prefix_cap", 64}}},
        {"posterior", {{"probe_size", 256}, {"probe_seed", 0}}}}},
  };
}

namespace {

void merge(Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string field = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError(field, "unknown key");
    Json& dst = base[it.key()];
    const Json& src = it.value();
    if (dst.is_object()) {
      merge(dst, src, field);
    } else if (dst.is_boolean()) {
      if (!src.is_boolean()) throw ConfigError(field, "expected true or false");
      dst = src;
    } else if (dst.is_number_unsigned() || dst.is_number_integer()) {
      if (!src.is_number_integer() || (src.is_number_integer() && !src.is_number_unsigned() && src.get<long long>() < 0))
        throw ConfigError(field, "expected a non-negative integer");
      dst = src.get<std::uint64_t>();
    } else if (dst.is_number()) {
      if (!src.is_number()) throw ConfigError(field, "expected a number");
      dst = src.get<double>();
    } else if (dst.is_string()) {
      if (!src.is_string()) throw ConfigError(field, "expected a string");
      dst = src;
    } else if (dst.is_array()) {
      if (!src.is_array()) throw ConfigError(field, "expected an array");
      if (!dst.empty() && dst.front().is_array()) {
        dst = src;
      } else {
        for (std::size_t i = 0; i < src.size(); ++i) {
          const bool ok = dst.empty() || (dst.front().is_string() ? src[i].is_string() : src[i].is_number());
          if (!ok) throw ConfigError(field + "[" + std::to_string(i) + "]", "wrong element type");
        }
        dst = src;
      }
    }
  }
}

}  // namespace

Json resolve_config(const Json& user) {
  Json out = default_config();
  merge(out, user, "");
  if (out["schema"] != kSchemaVersion)
    throw ConfigError("schema", std::string("unsupported schema, expected ") + kSchemaVersion);
  // Points are fixed-length pairs.
  for (auto& [name, params] : out["benchmark_params"].items())
    for (auto& [key, value] : params["constants"].items())
      if (value.is_array() && (value.size() != 2 || !value[0].is_number() || !value[1].is_number()))
        throw ConfigError("benchmark_params." + name + ".constants." + key, "expected [x, y]");
  return out;
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must look like key.path=value");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json patch = value;
  std::vector<std::string> keys;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    keys.push_back(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto k = keys.rbegin(); k != keys.rend(); ++k) patch = Json{{*k, patch}};
  Json merged = config;
  merge(merged, patch, "");
  config = std::move(merged);
}

std::vector<RunConfig> run_configs(const Json& c) {
  RunConfig base;
  try {
    base.base_seed = c.at("base_seed").get<std::uint64_t>();
    const Json& e = c.at("experiment");
    base.n_trials = e.at("n_trials").get<std::size_t>();
    base.n_init = e.at("n_init").get<std::size_t>();
    base.T = e.at("T").get<std::size_t>();
    base.penalty_margin = e.at("penalty_margin").get<double>();
    base.timing = e.at("timing").get<bool>();

    const Json& g = c.at("gp_perm");
    base.gp_perm.sinkhorn.epsilon = g.at("epsilon").get<double>();
    base.gp_perm.sinkhorn.max_iters = g.at("max_iters").get<int>();
    base.gp_perm.sinkhorn.tol = g.at("tol").get<double>();
    base.gp_perm.ip_weight = g.at("ip_weight").get<double>();

    const Json& f = c.at("gp_fit");
    base.fit.restarts = f.at("restarts").get<int>();
    base.fit.max_steps = f.at("max_steps").get<int>();
    base.fit.noise_init = f.at("noise_init").get<double>();
    base.fit.noise_floor = f.at("noise_floor").get<double>();
    base.fit.learn_noise = f.at("learn_noise").get<bool>();
    base.fit.optimize = f.at("optimize").get<bool>();
    base.fit.jitter_ladder = f.at("jitter_ladder").get<std::vector<double>>();
    base.fit.restart_spread = f.at("restart_spread").get<double>();
    base.fit.grad_tol = f.at("grad_tol").get<double>();
    base.fit.lengthscale_prior_shape = f.at("lengthscale_prior_shape").get<double>();
    base.fit.lengthscale_prior_rate = f.at("lengthscale_prior_rate").get<double>();

    const Json& a = c.at("acquisition");
    base.acquisition.q = a.at("q").get<std::size_t>();
    base.acquisition.mc_samples = a.at("mc_samples").get<std::size_t>();
    base.acquisition.tau0 = a.at("tau0").get<double>();
    base.acquisition.tau_max = a.at("tau_max").get<double>();
    base.acquisition.restarts = a.at("restarts").get<std::size_t>();
    base.acquisition.raw_samples = a.at("raw_samples").get<std::size_t>();
    base.acquisition.ascent_steps = a.at("ascent_steps").get<std::size_t>();
    base.acquisition.fd_step = a.at("fd_step").get<double>();

    const Json& fe = c.at("feasibility");
    if (fe.at("enabled").get<bool>()) {
      FeasibilityConfig fc;
      try {
        fc.kind = mask_from_string(fe.at("mask").get<std::string>());
      } catch (const std::invalid_argument& ex) {
        throw ConfigError("feasibility.mask", ex.what());
      }
      fc.nx = fe.at("nx").get<std::size_t>();
      fc.ny = fe.at("ny").get<std::size_t>();
      fc.seed = fe.at("seed").get<std::uint64_t>();
      fc.file = fe.at("file").get<std::string>();
      fc.k_nearest = fe.at("k_nearest").get<std::size_t>();
      const Json& b = fe.at("barrier");
      fc.use_barrier = b.at("enabled").get<bool>();
      fc.barrier = {b.at("margin").get<double>(), b.at("weight").get<double>(), b.at("sharpness").get<double>()};
      base.feasibility = fc;
    }
  } catch (const Json::exception& ex) {
    throw ConfigError("<config>", ex.what());
  }

  const Json& names = c.at("benchmarks");
  const Json& surrogates = c.at("surrogates");
  if (names.empty()) throw ConfigError("benchmarks", "at least one benchmark is required");
  if (surrogates.empty()) throw ConfigError("surrogates", "at least one surrogate is required");
  std::vector<RunConfig> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    BenchmarkId id;
    try {
      id = benchmark_from_string(names[i].get<std::string>());
    } catch (const std::invalid_argument& ex) {
      throw ConfigError("benchmarks[" + std::to_string(i) + "]", ex.what());
    }
    const std::string bname = to_string(id);
    BenchmarkSpec spec;
    try {
      spec = benchmark_from_json(id, c.at("benchmark_params").at(bname));
    } catch (const Json::exception& ex) {
      throw ConfigError("benchmark_params." + bname, ex.what());
    }
    for (std::size_t s = 0; s < surrogates.size(); ++s) {
      RunConfig r = base;
      r.benchmark = spec;
      try {
        r.surrogate = kernel_family_from_string(surrogates[s].get<std::string>());
      } catch (const std::invalid_argument& ex) {
        throw ConfigError("surrogates[" + std::to_string(s) + "]", ex.what());
      }
      try {
        r.validate();
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(bname + "/" + to_string(r.surrogate), ex.what());
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace permbo
