#include "divker/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"

#include "divker/discrete_scores.hpp"
#include "divker/errors.hpp"
#include "divker/model.hpp"
#include "divker/paths.hpp"
#include "divker/schedules.hpp"
#include "divker/sde_scores.hpp"

namespace divker {

namespace {

SystemModel build_model(const RunConfig& c) {
  if (c.model == "ou") return linear_ou_model(c.model_a, c.model_sigma, c.model_dim);
  if (c.model == "cubic") {
    return cubic_model(c.model_noise == "unit" ? CubicNoise::unit : CubicNoise::bump);
  }
  return lorenz96_model(c.model_dim, c.model_damping, c.model_base_diffusion, c.model_forcing);
}

InitialDistribution build_init(const RunConfig& c, int dim) {
  if (c.init == "point") return InitialDistribution::point_mass(Vec::Constant(dim, c.init_value));
  return InitialDistribution::gaussian(dim, c.init_mean, c.init_std);
}

enum class Outcome { ok, capped, singular, divergent };

struct PathResult {
  Outcome outcome = Outcome::ok;
  PathSample sample;
};

struct Context {
  const RunConfig& cfg;
  SystemModel model;
  InitialDistribution init;
  SimulationPlan plan;
  DiscreteChain chain;
  NoiseKernel kernel;
  std::optional<Schedule> alpha;
  Schedule beta;
  CovectorOptions opts;

  PathResult compute(const PathRecord& path) const {
    PathResult r;
    r.sample.path_id = path.path_id;
    if (path.divergent()) {
      r.outcome = Outcome::divergent;
      return r;
    }
    r.sample.terminal = path.terminal();
    const std::string& e = cfg.estimator;
    try {
      if (e == "sde-kernel") {
        r.sample.nu = sde_kernel_score(path, model, beta, init.score);
        check_covector(r.sample.nu, path.steps(), opts.explosion_cap);
      } else if (e == "sde-div") {
        r.sample.nu = drive_covector(path, model, SdeStepper::divergence, nullptr, init.score, opts).nu;
      } else if (e == "sde-divker") {
        r.sample.nu =
            drive_covector(path, model, SdeStepper::divker, &*alpha, init.score, opts).nu;
      } else if (e == "sde-divker-noh0") {
        r.sample.nu = drive_covector(path, model, SdeStepper::divker_noh0, nullptr, {}, opts).nu;
      } else if (e == "nstep-kernel") {
        r.sample.nu = nstep_kernel_score(path, chain, kernel, beta, init.score);
        check_covector(r.sample.nu, path.steps(), opts.explosion_cap);
      } else if (e == "nstep-div") {
        r.sample.nu = nstep_divergence_score(path, chain, kernel, init.score, opts).nu;
      } else if (e == "nstep-divker") {
        r.sample.nu = nstep_divker_forward(path, chain, kernel, *alpha, init.score, opts).nu;
      } else {
        r.sample.nu = nstep_divker_noh0(path, chain, kernel, opts).nu;
      }
    } catch (const CovectorExplosion&) {
      r.outcome = Outcome::capped;
    } catch (const SingularStep&) {
      r.outcome = Outcome::singular;
    }
    return r;
  }
};

std::optional<Schedule> build_alpha(const RunConfig& c, const SystemModel& model,
                                    const InitialDistribution& init, const SimulationPlan& plan,
                                    double& resolved) {
  const bool uses_alpha = c.estimator == "sde-divker" || c.estimator == "nstep-divker";
  if (!uses_alpha) return std::nullopt;
  if (c.alpha == "reciprocal") {
    return c.estimator == "sde-divker" ? Schedule::reciprocal_time() : Schedule::reciprocal_step();
  }
  if (c.alpha.rfind("auto:", 0) == 0) {
    const int probes = std::stoi(c.alpha.substr(5));
    SimulationPlan probe_plan = plan;
    probe_plan.n_paths = static_cast<std::size_t>(probes);
    resolved = safe_alpha_estimate(model, init, probe_plan, probes, c.seed ^ 0x5afe5afeULL).alpha;
    // rate to per-step weight
    if (c.estimator == "nstep-divker") resolved = -std::expm1(-resolved * plan.dt());
  } else {
    resolved = std::stod(c.alpha.substr(6));
  }
  return Schedule::constant(resolved);
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write {}", p.string()));
  f << text;
}

}  // namespace

RunReport run(const RunConfig& cfg, const RunOptions& options) {
  validate_config(cfg);
  const auto start = std::chrono::steady_clock::now();

  SystemModel model = build_model(cfg);
  const bool kernel_estimator = cfg.estimator == "sde-kernel" || cfg.estimator == "nstep-kernel";
  if (kernel_estimator && !model.is_additive) {
    throw UnsupportedEstimator(fmt::format(
        "{} needs additive noise; model '{}' has state-dependent diffusion", cfg.estimator,
        model.name));
  }
  InitialDistribution init = build_init(cfg, model.dim);
  const SimulationPlan plan = SimulationPlan::from_step(cfg.total_time, cfg.dt, cfg.paths, cfg.seed);

  RunReport report;
  report.config = cfg;
  report.n_paths = cfg.paths;
  Schedule beta = cfg.beta == "linear" ? beta_linear(plan.total_time) : Schedule::constant(1.0);
  auto alpha = build_alpha(cfg, model, init, plan, report.alpha);
  if (alpha) alpha->require_nonnegative(plan.steps, plan.total_time);
  DiscreteChain chain = euler_chain(model, plan.dt());
  NoiseKernel kernel = NoiseKernel::gaussian(model.dim, plan.dt());
  CovectorOptions opts;
  opts.explosion_cap = cfg.cap;
  const Context ctx{cfg, std::move(model), std::move(init), plan, std::move(chain),
                    std::move(kernel), std::move(alpha), std::move(beta), opts};

  std::vector<PathResult> results(cfg.paths);
  std::vector<PathRecord> dumped(std::min(cfg.dump_paths, cfg.paths));
  const int threads = std::max(1, options.threads);
  auto worker = [&](int w) {
    // strided ownership: worker w handles path ids w, w + threads, ...
    for (std::size_t p = static_cast<std::size_t>(w); p < cfg.paths; p += threads) {
      PathRecord path = simulate_sde_path(ctx.model, ctx.init, plan, p);
      results[p] = ctx.compute(path);
      if (p < dumped.size()) dumped[p] = std::move(path);
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          worker(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (auto& r : results) {
    switch (r.outcome) {
      case Outcome::ok:
        report.samples.push_back(std::move(r.sample));
        break;
      case Outcome::capped:
        ++report.n_capped;
        break;
      case Outcome::singular:
        ++report.n_singular;
        break;
      case Outcome::divergent:
        ++report.n_divergent;
        break;
    }
  }
  if (report.samples.empty()) throw Error("no usable paths: every path was capped or diverged");

  if (cfg.analysis == "bins") {
    BinGrid grid{cfg.bins_lo, cfg.bins_hi, cfg.bins_n, cfg.bins_coordinate};
    report.scores = bin_and_average(report.samples, grid, cfg.bins_min_count, cfg.bins_paths_per_bin);
  } else {
    const Vec v = Vec::Ones(ctx.model.dim);
    report.response = linear_response_deviation(
        report.samples, [](const Vec& x) { return x.mean(); }, v,
        HistogramSpec{cfg.hist_lo, cfg.hist_hi, cfg.hist_n});
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!options.out_dir.empty()) {
    const std::filesystem::path dir(options.out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "config.txt", serialize_config(cfg));
    if (report.scores) {
      std::ofstream f(dir / "scores.csv", std::ios::binary);
      write_scores_csv(f, *report.scores);
    }
    if (report.response) {
      std::ofstream f(dir / "deviations.csv", std::ios::binary);
      write_deviations_csv(f, *report.response);
    }
    if (!dumped.empty()) {
      std::ofstream f(dir / "paths.csv", std::ios::binary);
      write_path_dump(f, dumped);
    }
    write_file(dir / "report.json", report_json(report) + "\n");
  }
  return report;
}

std::string report_json(const RunReport& r) {
  using nlohmann::json;
  json j;
  j["experiment"] = r.config.experiment;
  j["model"] = r.config.model;
  j["estimator"] = r.config.estimator;
  j["seed"] = r.config.seed;
  j["T"] = r.config.total_time;
  j["dt"] = r.config.dt;
  j["n_paths"] = r.n_paths;
  j["n_used"] = r.samples.size();
  j["n_capped"] = r.n_capped;
  j["n_singular"] = r.n_singular;
  j["n_divergent"] = r.n_divergent;
  j["cap"] = r.config.cap;
  if (r.config.estimator == "sde-divker" || r.config.estimator == "nstep-divker") {
    j["alpha"] = r.config.alpha == "reciprocal" ? json("reciprocal") : json(r.alpha);
  }
  j["wall_seconds"] = r.wall_seconds;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  if (r.scores) {
    j["overflow"] = r.scores->overflow;
    json bins = json::array();
    for (const auto& b : r.scores->bins) {
      json row{{"bin_index", b.bin_index},
               {"bin_center", b.bin_center},
               {"count", b.count},
               {"used", b.used},
               {"flagged", b.flagged},
               {"log_density", finite_or_null(b.log_density)}};
      json mean = json::array(), se = json::array();
      for (Eigen::Index i = 0; i < b.mean_nu.size(); ++i) {
        mean.push_back(finite_or_null(b.mean_nu[i]));
        se.push_back(finite_or_null(b.se_nu[i]));
      }
      row["mean_nu"] = mean;
      row["se_nu"] = se;
      bins.push_back(row);
    }
    j["bins"] = bins;
  }
  if (r.response) {
    j["deviation"] = {{"mean", r.response->mean},
                      {"se", finite_or_null(r.response->se)},
                      {"histogram",
                       {{"lo", r.response->histogram.lo},
                        {"hi", r.response->histogram.hi},
                        {"counts", r.response->counts},
                        {"underflow", r.response->underflow},
                        {"overflow", r.response->overflow}}}};
  }
  return j.dump(2);
}

std::string report_summary(const RunReport& r) {
  std::string s = fmt::format(
      "{} [{} / {}]  T = {}  dt = {}  seed = {}\npaths {}  used {}  capped {}  singular {}  "
      "divergent {}  ({:.1f} s)\n",
      r.config.experiment, r.config.model, r.config.estimator, r.config.total_time, r.config.dt,
      r.config.seed, r.n_paths, r.samples.size(), r.n_capped, r.n_singular, r.n_divergent,
      r.wall_seconds);
  if (r.config.estimator == "sde-divker" || r.config.estimator == "nstep-divker") {
    s += r.config.alpha == "reciprocal" ? "alpha = reciprocal\n"
                                        : fmt::format("alpha = {:.6g}\n", r.alpha);
  }
  if (r.scores) {
    s += fmt::format("{:>4} {:>8} {:>7} {:>11} {:>11} {:>10}\n", "bin", "center", "count",
                     "log h", "mean nu_1", "se");
    for (const auto& b : r.scores->bins) {
      s += fmt::format("{:>4} {:>8.3f} {:>7} {:>11.4f} {:>11.4f} {:>10.4f}{}\n", b.bin_index,
                       b.bin_center, b.count, b.log_density, b.mean_nu[0], b.se_nu[0],
                       b.flagged ? "  (few paths)" : "");
    }
    s += fmt::format("outside the bins: {}\n", r.scores->overflow);
  }
  if (r.response) {
    s += fmt::format("mean deviation {:.5f} +- {:.5f} (SE)\n", r.response->mean, r.response->se);
  }
  return s;
}

}  // namespace divker
