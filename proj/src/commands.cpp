#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "permbo/cli.hpp"
#include "permbo/config.hpp"
#include "permbo/diagnostics.hpp"
#include "permbo/metrics.hpp"
#include "permbo/sampling.hpp"

namespace fs = std::filesystem;

namespace permbo {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string csv(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

struct Options {
  std::string config;
  std::string out = "permbo_out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads, trials, T, draws;
  std::vector<std::string> overrides;
};

Json load_config(const Options& o) {
  Json user = Json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("--config", "cannot open " + o.config);
    user = Json::parse(in, nullptr, false);
    if (user.is_discarded()) throw ConfigError("--config", "not valid JSON: " + o.config);
  }
  Json c = resolve_config(user);
  for (const auto& a : o.overrides) apply_override(c, a);
  if (o.seed) apply_override(c, "base_seed=" + std::to_string(*o.seed));
  if (o.threads) apply_override(c, "threads=" + std::to_string(*o.threads));
  if (o.trials) apply_override(c, "experiment.n_trials=" + std::to_string(*o.trials));
  if (o.T) apply_override(c, "experiment.T=" + std::to_string(*o.T));
  if (o.draws) apply_override(c, "diagnostics.psd.draws=" + std::to_string(*o.draws));
  return c;
}

std::size_t thread_count(const Json& c) {
  const auto t = c.at("threads").get<std::size_t>();
  return t > 0 ? t : std::max(1u, std::thread::hardware_concurrency());
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

/// NaN and infinities become null.
Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

struct Run {
  RunConfig cfg;
  ExperimentResult result;
};

class Bundle {
 public:
  Bundle(fs::path dir, const Json& config, std::string command)
      : dir_(std::move(dir)), config_(config) {
    seed_ = config.at("base_seed").get<std::uint64_t>();
    summary_ = {{"schema", kSchemaVersion}, {"base_seed", seed_}, {"timestamp", timestamp()},
                {"command", std::move(command)}, {"runs", Json::array()}};
    traj_ << "# schema=" << kSchemaVersion << " base_seed=" << seed_ << "\n"
          << "benchmark,surrogate,variant,trial,iteration,best_so_far,raw_value,phase_ms\n";
    diag_ << "# schema=" << kSchemaVersion << " base_seed=" << seed_ << "\n"
          << "record_type,benchmark,surrogate,variant,trial,iteration,N,metric,value\n";
  }

  void diag(const std::string& type, const std::string& bench, const std::string& surrogate,
            const std::string& variant, const std::string& trial, const std::string& iteration,
            const std::string& N, const std::string& metric, double value) {
    diag_ << type << ',' << bench << ',' << surrogate << ',' << csv(variant) << ',' << trial << ','
          << iteration << ',' << N << ',' << metric << ',' << format_double(value) << '\n';
  }

  void add_run(const Run& r) {
    const std::string b = to_string(r.cfg.benchmark.id), s = to_string(r.cfg.surrogate);
    Json trials = Json::array();
    for (std::size_t i = 0; i < r.result.trials.size(); ++i) {
      const TrialRecord& t = r.result.trials[i];
      const TrialSummary& sm = r.result.summaries[i];
      trials.push_back({{"trial", t.trial_index}, {"seed", t.seed}, {"auc", number(sm.auc)},
                        {"final_best", number(sm.final_best)}, {"fit_failures", t.fit_failures},
                        {"error", t.error.empty() ? Json(nullptr) : Json(t.error)}});
      for (std::size_t it : t.fit_failures)
        diag("fit_failure", b, s, r.cfg.variant, std::to_string(i), std::to_string(it), "", "fallback", 1.0);
      if (!t.ok()) {
        diag("trial_error", b, s, r.cfg.variant, std::to_string(i), "", "", "failed", 1.0);
        continue;
      }
      for (std::size_t it = 0; it < t.best_so_far.size(); ++it) {
        traj_ << b << ',' << s << ',' << csv(r.cfg.variant) << ',' << i << ',' << it << ','
              << format_double(t.best_so_far[it]) << ',' << format_double(t.iteration_best[it]) << ',';
        if (it > 0 && it <= t.phase_ms.size()) {
          const auto& ph = t.phase_ms[it - 1];
          traj_ << format_double(ph[0] + ph[1] + ph[2]);
        }
        traj_ << '\n';
      }
    }
    const ExperimentResult& e = r.result;
    summary_["runs"].push_back(
        {{"benchmark", b}, {"surrogate", s}, {"variant", r.cfg.variant},
         {"n_trials", r.cfg.n_trials}, {"n_init", r.cfg.n_init}, {"T", r.cfg.T}, {"q", r.cfg.q()},
         {"completed", e.completed}, {"auc_mean", number(e.auc_mean)},
         {"auc_std", e.std_undefined ? Json(nullptr) : number(e.auc_std)},
         {"final_mean", number(e.final_mean)},
         {"final_std", e.std_undefined ? Json(nullptr) : number(e.final_std)},
         {"std_undefined", e.std_undefined}, {"trials", trials}});
  }

  Json& summary() { return summary_; }

  void write() {
    fs::create_directories(dir_);
    write_file(dir_ / "trajectories.csv", traj_.str());
    write_file(dir_ / "diagnostics.csv", diag_.str());
    write_file(dir_ / "summary.json", summary_.dump(2) + "\n");
    write_file(dir_ / "config.json", config_.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  Json config_;
  std::uint64_t seed_ = 0;
  Json summary_;
  std::ostringstream traj_, diag_;
};

/// Every pair must finish at least one trial.
bool all_pairs_completed(const std::vector<Run>& runs) {
  for (const auto& r : runs)
    if (r.result.completed == 0) return false;
  return true;
}

std::vector<Run> run_all(const std::vector<RunConfig>& cfgs, std::size_t threads,
                         const std::function<ObserverFactory(const RunConfig&, std::size_t)>& obs = {}) {
  std::vector<Run> runs;
  for (std::size_t k = 0; k < cfgs.size(); ++k) {
    const RunConfig& c = cfgs[k];
    std::cerr << "running " << to_string(c.benchmark.id) << " / " << to_string(c.surrogate) << " ["
              << c.variant << "] trials=" << c.n_trials << "\n";
    runs.push_back({c, run_experiment(c, threads, obs ? obs(c, k) : ObserverFactory{})});
  }
  return runs;
}

int bench_run(const Json& c, const fs::path& out) {
  const auto cfgs = run_configs(c);
  Bundle bundle(out, c, "bench run");
  const auto runs = run_all(cfgs, thread_count(c));
  for (const auto& r : runs) bundle.add_run(r);
  bundle.write();
  return all_pairs_completed(runs) ? 0 : 1;
}

int bench_sweep(const Json& c, const fs::path& out) {
  const std::string param = c.at("sweep").at("parameter").get<std::string>();
  const Json& values = c.at("sweep").at("values");
  if (values.empty()) throw ConfigError("sweep.values", "grid is empty");
  const auto benches = c.at("benchmarks").size();
  const auto surrogates = c.at("surrogates").size();

  std::vector<RunConfig> cfgs;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Json ci = c;
    apply_override(ci, param + "=" + values[i].dump());
    const std::string label = param + "=" + values[i].dump();
    labels.push_back(label);
    for (RunConfig& r : run_configs(ci)) {
      r.variant = label;
      cfgs.push_back(std::move(r));
    }
  }
  Bundle bundle(out, c, "bench sweep");
  const auto runs = run_all(cfgs, thread_count(c));
  for (const auto& r : runs) bundle.add_run(r);

  // Variants are (value, surrogate) pairs; run order is value, benchmark, surrogate.
  const std::size_t nv = values.size() * surrogates;
  std::vector<std::vector<VariantMetrics>> metrics(benches, std::vector<VariantMetrics>(nv));
  Json variants = Json::array();
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t s = 0; s < surrogates; ++s)
      variants.push_back({{"variant", labels[i]}, {"surrogate", c["surrogates"][s]}});
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const std::size_t i = k / (benches * surrogates), b = (k / surrogates) % benches, s = k % surrogates;
    VariantMetrics& m = metrics[b][i * surrogates + s];
    for (const auto& sm : runs[k].result.summaries)
      if (std::isfinite(sm.auc)) {
        m.auc.push_back(sm.auc);
        m.final_best.push_back(sm.final_best);
      }
  }
  const SelectionResult sel = selection_score(metrics);
  for (std::size_t v = 0; v < nv; ++v) variants[v]["score"] = number(sel.scores[v]);
  Json degenerate = Json::array();
  for (std::size_t b : sel.degenerate_benchmarks) degenerate.push_back(c["benchmarks"][b]);
  bundle.summary()["selection"] = {{"parameter", param}, {"variants", variants},
                                   {"best", variants[sel.best]},
                                   {"degenerate_benchmarks", degenerate}};
  for (std::size_t v = 0; v < nv; ++v)
    bundle.diag("selection", "", variants[v]["surrogate"].get<std::string>(),
                variants[v]["variant"].get<std::string>(), "", "", "", "score", sel.scores[v]);
  bundle.write();
  std::cerr << "best variant: " << variants[sel.best].dump() << "\n";
  return all_pairs_completed(runs) ? 0 : 1;
}

std::vector<PsdVariant> psd_variants(const Json& c, const DesignShape& shape) {
  SinkhornConfig sk;
  sk.epsilon = c["gp_perm"]["epsilon"].get<double>();
  sk.max_iters = c["gp_perm"]["max_iters"].get<int>();
  sk.tol = c["gp_perm"]["tol"].get<double>();
  std::vector<PsdVariant> out;
  for (double ip : {1.0, 0.0}) {
    auto k = std::shared_ptr<const Kernel>(make_gp_perm_kernel(shape, GpPermOptions{sk, ip}));
    out.push_back({ip > 0 ? "GP_Perm(+IP)" : "GP_Perm(-IP)", k, k->unit_log_params()});
  }
  auto flat = std::shared_ptr<const Kernel>(make_flat_kernel(shape));
  out.push_back({"GP_flat", flat, flat->unit_log_params()});
  return out;
}

Json group_json(const PsdGroup& g) {
  return {{"variant", g.variant}, {"N", g.N}, {"draws", g.lambda_min.size()},
          {"failures", g.failures}, {"median", number(g.median)}, {"mean", number(g.mean)},
          {"min", number(g.min)},
          {"violation", {number(g.violation[0]), number(g.violation[1]), number(g.violation[2])}}};
}

void psd_summary_rows(Bundle& bundle, const std::string& type, const std::string& bench,
                      const std::string& surrogate, const std::string& variant, const PsdGroup& g) {
  const std::string N = std::to_string(g.N);
  bundle.diag(type, bench, surrogate, variant, "", "", N, "median", g.median);
  bundle.diag(type, bench, surrogate, variant, "", "", N, "mean", g.mean);
  bundle.diag(type, bench, surrogate, variant, "", "", N, "min", g.min);
  bundle.diag(type, bench, surrogate, variant, "", "", N, "failures", static_cast<double>(g.failures));
  for (std::size_t k = 0; k < kPsdDeltas.size(); ++k) {
    char name[40];
    std::snprintf(name, sizeof name, "violation_delta_%g", kPsdDeltas[k]);
    bundle.diag(type, bench, surrogate, variant, "", "", N, name, g.violation[k]);
  }
}

int diag_psd(const Json& c, const fs::path& out) {
  const Json& pc = c.at("diagnostics").at("psd");
  const DesignShape shape{0, pc.at("n_inj").get<std::size_t>(), pc.at("n_prod").get<std::size_t>()};
  if (shape.flat_dim() == 0) throw ConfigError("diagnostics.psd", "n_inj + n_prod must be positive");
  const auto sizes = pc.at("sizes").get<std::vector<std::size_t>>();
  for (std::size_t i = 0; i < sizes.size(); ++i)
    if (sizes[i] < 2) throw ConfigError("diagnostics.psd.sizes[" + std::to_string(i) + "]", "N must be >= 2");
  const auto draws = pc.at("draws").get<std::size_t>();
  if (draws == 0) throw ConfigError("diagnostics.psd.draws", "must be positive");
  const auto cap = pc.at("prefix_cap").get<std::size_t>();
  if (cap == 0) throw ConfigError("diagnostics.psd.prefix_cap", "must be positive");
  const bool training = pc.at("training").get<bool>();
  const auto cfgs = training ? run_configs(c) : std::vector<RunConfig>{};

  Bundle bundle(out, c, "diag psd");
  const PsdReport rep = psd_stress_offline(psd_variants(c, shape), shape, sizes, draws,
                                           pc.at("seed").get<std::uint64_t>(), thread_count(c));
  Json offline = Json::array();
  for (const auto& g : rep.groups) {
    for (std::size_t k = 0; k < g.lambda_min.size(); ++k)
      bundle.diag("psd_offline", "", "", g.variant, std::to_string(k), "", std::to_string(g.N),
                  "lambda_min", g.lambda_min[k]);
    psd_summary_rows(bundle, "psd_offline_summary", "", "", g.variant, g);
    offline.push_back(group_json(g));
  }
  bundle.summary()["psd"] = {{"deltas", kPsdDeltas}, {"dimension", shape.flat_dim()},
                             {"hyperparameters", "unit"}, {"offline", offline}};

  if (training) {
    // Hyperparameters learned at the last iteration of trial 0 stand in for the whole run.
    std::vector<Eigen::VectorXd> learned(cfgs.size());
    const auto runs = run_all(cfgs, thread_count(c), [&](const RunConfig&, std::size_t k) {
      return ObserverFactory([&learned, k](std::size_t trial) -> IterationObserver {
        if (trial != 0) return {};
        return [&learned, k](std::size_t, const GpModel& m, std::span<const Design>,
                             std::span<const double>) { learned[k] = m.log_params(); };
      });
    });
    Json tr = Json::array();
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const Run& r = runs[k];
      bundle.add_run(r);
      const Problem p(r.cfg);
      const auto kernel = p.make_kernel();
      const bool have = learned[k].size() == static_cast<Eigen::Index>(kernel->num_params());
      const PsdVariant v{to_string(r.cfg.surrogate), kernel, have ? learned[k] : kernel->unit_log_params()};
      const TrainingPsd t = psd_stress_training(r.result.trials, p.bounds(), v, cap);
      const std::string b = to_string(r.cfg.benchmark.id);
      std::size_t row = 0;
      for (const auto& trial : r.result.trials) {
        if (!trial.ok()) continue;
        const auto& lam = t.lambda[row++];
        for (std::size_t it = 0; it < lam.size(); ++it) {
          const std::size_t n = std::min(cap, r.cfg.n_init + it * r.cfg.q());
          bundle.diag("psd_training", b, v.name, r.cfg.variant, std::to_string(trial.trial_index),
                      std::to_string(it), std::to_string(n), "lambda_min", lam[it]);
        }
      }
      for (std::size_t it = 0; it < t.median_per_iteration.size(); ++it)
        bundle.diag("psd_training_median", b, v.name, r.cfg.variant, "", std::to_string(it), "",
                    "median_lambda_min", t.median_per_iteration[it]);
      psd_summary_rows(bundle, "psd_training_summary", b, v.name, r.cfg.variant, t.overall);
      Json g = group_json(t.overall);
      g["benchmark"] = b;
      g["hyperparameters"] = have ? "learned (trial 0, last iteration)" : "unit";
      tr.push_back(g);
    }
    bundle.summary()["psd"]["training"] = tr;
  }
  bundle.write();
  return 0;
}

struct PosteriorRow {
  std::size_t iteration = 0;
  std::size_t n = 0;
  PosteriorDiagnostics d;
};

int diag_posterior(const Json& c, const fs::path& out) {
  const auto cfgs = run_configs(c);
  const Json& pc = c.at("diagnostics").at("posterior");
  const auto probe_size = pc.at("probe_size").get<std::size_t>();
  const auto probe_seed = pc.at("probe_seed").get<std::uint64_t>();
  if (probe_size == 0) throw ConfigError("diagnostics.posterior.probe_size", "must be positive");

  // rows[k][trial]: written only by the thread running that trial.
  std::vector<std::vector<std::vector<PosteriorRow>>> rows(cfgs.size());
  std::vector<std::vector<std::vector<Design>>> probes(cfgs.size());
  std::vector<Eigen::MatrixXd> Z(cfgs.size());
  for (std::size_t k = 0; k < cfgs.size(); ++k) {
    rows[k].resize(cfgs[k].n_trials);
    probes[k] = probe_batches(cfgs[k].benchmark.shape(), cfgs[k].q(), probe_size, probe_seed);
    Z[k] = qmc_normals(cfgs[k].acquisition.mc_samples, cfgs[k].q(), probe_seed);
  }
  const auto runs = run_all(cfgs, thread_count(c), [&](const RunConfig& cfg, std::size_t k) {
    return ObserverFactory([&, k, acq = cfg.acquisition](std::size_t trial) -> IterationObserver {
      return [&, k, trial, acq](std::size_t t, const GpModel& m, std::span<const Design> batch,
                                std::span<const double> vals) {
        const double f_best = m.y_std().maxCoeff() * m.y_sd() + m.y_mean();
        rows[k][trial].push_back({t, m.size(), posterior_diagnostics(m, probes[k], batch, vals, f_best, acq, Z[k])});
      };
    });
  });

  Bundle bundle(out, c, "diag posterior");
  Json per = Json::array();
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const Run& r = runs[k];
    bundle.add_run(r);
    const std::string b = to_string(r.cfg.benchmark.id), s = to_string(r.cfg.surrogate);
    std::vector<double> rho, sz, sn, res;
    std::size_t undefined = 0;
    for (std::size_t trial = 0; trial < rows[k].size(); ++trial)
      for (const auto& row : rows[k][trial]) {
        const std::string tr = std::to_string(trial), it = std::to_string(row.iteration),
                          n = std::to_string(row.n);
        const auto& d = row.d;
        bundle.diag("posterior", b, s, r.cfg.variant, tr, it, n, "rho_qlogei",
                    d.rho_defined ? d.rho_qlogei : std::numeric_limits<double>::quiet_NaN());
        bundle.diag("posterior", b, s, r.cfg.variant, tr, it, n, "rho_defined", d.rho_defined ? 1.0 : 0.0);
        bundle.diag("posterior", b, s, r.cfg.variant, tr, it, n, "mean_sigma_Z", d.mean_sigma_Z);
        bundle.diag("posterior", b, s, r.cfg.variant, tr, it, n, "sigma_next", d.sigma_next);
        bundle.diag("posterior", b, s, r.cfg.variant, tr, it, n, "abs_mean_std_residual",
                    d.abs_mean_std_residual);
        if (d.rho_defined)
          rho.push_back(d.rho_qlogei);
        else
          ++undefined;
        sz.push_back(d.mean_sigma_Z);
        sn.push_back(d.sigma_next);
        if (std::isfinite(d.abs_mean_std_residual)) res.push_back(d.abs_mean_std_residual);
      }
    auto stat = [](const std::vector<double>& x) {
      return Json{{"mean", number(mean(x))}, {"std", number(sample_std(x))}, {"count", x.size()}};
    };
    per.push_back({{"benchmark", b}, {"surrogate", s}, {"variant", r.cfg.variant},
                   {"rho_qlogei", stat(rho)}, {"rho_undefined", undefined},
                   {"mean_sigma_Z", stat(sz)}, {"sigma_next", stat(sn)},
                   {"abs_mean_std_residual", stat(res)}});
  }
  bundle.summary()["posterior"] = {{"probe_size", probe_size}, {"probe_seed", probe_seed},
                                   {"averaged_over", "all iterations and trials"}, {"runs", per}};
  bundle.write();
  return all_pairs_completed(runs) ? 0 : 1;
}

void write_error(const fs::path& out, const ConfigError& e) {
  const Json err = {{"schema", kSchemaVersion},
                    {"error", {{"field", e.field}, {"message", e.message}}}};
  std::cerr << err.dump() << "\n";
  std::error_code ec;
  fs::create_directories(out, ec);
  if (!ec) write_file(out / "error.json", err.dump(2) + "\n");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Bayesian optimization over set-valued designs"};
  app.require_subcommand(1);
  Options o;
  std::string action;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run config; omitted keys take their defaults");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
    sub->add_option("--trials", o.trials, "trials per (benchmark, surrogate)");
    sub->add_option("--T", o.T, "BO iterations");
    sub->add_option("--override", o.overrides, "key.path=value, repeatable");
  };
  CLI::App* bench = app.add_subcommand("bench", "run experiments");
  bench->add_option("action", action, "run | sweep")->required();
  add_common(bench);
  CLI::App* diag = app.add_subcommand("diag", "kernel and posterior diagnostics");
  diag->add_option("name", action, "psd | posterior")->required();
  add_common(diag);
  diag->add_option("--draws", o.draws, "PSD draws per matrix size");
  CLI::App* cfg = app.add_subcommand("config", "print the resolved config");
  add_common(cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const fs::path out(o.out);
  try {
    const Json c = load_config(o);
    if (cfg->parsed()) {
      run_configs(c);
      std::cout << c.dump(2) << "\n";
      return 0;
    }
    if (bench->parsed()) {
      if (action == "run") return bench_run(c, out);
      if (action == "sweep") return bench_sweep(c, out);
      throw ConfigError("bench", "unknown action '" + action + "' (expected run or sweep)");
    }
    if (action == "psd") return diag_psd(c, out);
    if (action == "posterior") return diag_posterior(c, out);
    throw ConfigError("diag", "unknown diagnostic '" + action + "' (expected psd or posterior)");
  } catch (const ConfigError& e) {
    write_error(out, e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> storage{"permbo"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace permbo
