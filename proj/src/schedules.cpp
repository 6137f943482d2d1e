#include "divker/schedules.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "divker/errors.hpp"
#include "divker/model.hpp"
#include "divker/paths.hpp"
#include "divker/sde_scores.hpp"

namespace divker {

Schedule Schedule::constant(double value) {
  if (!std::isfinite(value)) throw ScheduleError("constant schedule value must be finite");
  return Schedule(ScheduleKind::constant, value);
}

Schedule Schedule::linear_in_time(double total_time) {
  if (!(total_time > 0.0)) throw ScheduleError("linear schedule needs T > 0");
  return Schedule(ScheduleKind::linear_in_time, total_time);
}

Schedule Schedule::reciprocal_step() { return Schedule(ScheduleKind::reciprocal_step, 0.0); }

Schedule Schedule::reciprocal_time() { return Schedule(ScheduleKind::reciprocal_time, 0.0); }

Schedule Schedule::tabulated(std::vector<double> values) {
  Schedule s(ScheduleKind::tabulated, 0.0);
  for (double v : values) {
    if (!std::isfinite(v)) throw ScheduleError("tabulated schedule has a non-finite entry");
  }
  s.table_ = std::move(values);
  return s;
}

Schedule Schedule::state_dependent(StateFunction fn) {
  if (!fn) throw ScheduleError("state-dependent schedule needs a function");
  Schedule s(ScheduleKind::state_dependent, 0.0);
  s.fn_ = std::move(fn);
  return s;
}

double Schedule::value_at(int step, double time, const Vec* state) const {
  switch (kind_) {
    case ScheduleKind::constant:
      return param_;
    case ScheduleKind::linear_in_time:
      return time / param_;
    case ScheduleKind::reciprocal_step:
      if (step < 1) throw ScheduleError("1/n schedule is undefined at n = 0");
      return 1.0 / step;
    case ScheduleKind::reciprocal_time:
      if (!(time > 0.0)) throw ScheduleError("1/t schedule is undefined at t = 0");
      return 1.0 / time;
    case ScheduleKind::tabulated:
      if (step < 0 || static_cast<std::size_t>(step) >= table_.size()) {
        throw ScheduleError(fmt::format("tabulated schedule has {} entries, step {} requested",
                                        table_.size(), step));
      }
      return table_[step];
    case ScheduleKind::state_dependent:
      if (state == nullptr) {
        throw ScheduleError("state-dependent schedule evaluated without a state");
      }
      return fn_(step, time, *state);
  }
  return 0.0;
}

double Schedule::derivative_at(double) const {
  switch (kind_) {
    case ScheduleKind::constant:
      return 0.0;
    case ScheduleKind::linear_in_time:
      return 1.0 / param_;
    default:
      throw ScheduleError(fmt::format("{} schedule has no analytic derivative", describe()));
  }
}

void Schedule::require_terminal_one(int steps, double total_time) const {
  if (kind_ == ScheduleKind::state_dependent) {
    throw ScheduleError("beta must be deterministic; a state-dependent schedule was given");
  }
  if (kind_ == ScheduleKind::tabulated && table_.size() < static_cast<std::size_t>(steps) + 1) {
    throw ScheduleError(fmt::format("beta table needs {} entries (steps 0..N), has {}", steps + 1,
                                    table_.size()));
  }
  const double last = value_at(steps, total_time);
  if (std::abs(last - 1.0) > 1e-12) {
    throw ScheduleError(fmt::format("beta must equal 1 at the final step, got {}", last));
  }
}

void Schedule::require_nonnegative(int steps, double total_time) const {
  if (kind_ == ScheduleKind::state_dependent) return;  // checked as it is evaluated
  const double dt = total_time / steps;
  for (int n = 1; n <= steps; ++n) {
    const double v = value_at(n, n * dt);
    if (v < 0.0) {
      throw ScheduleError(fmt::format("alpha is negative ({}) at step {}", v, n));
    }
  }
}

std::string Schedule::describe() const {
  switch (kind_) {
    case ScheduleKind::constant:
      return fmt::format("const:{}", param_);
    case ScheduleKind::linear_in_time:
      return "linear";
    case ScheduleKind::reciprocal_step:
      return "reciprocal-step";
    case ScheduleKind::reciprocal_time:
      return "reciprocal";
    case ScheduleKind::tabulated:
      return fmt::format("table[{}]", table_.size());
    case ScheduleKind::state_dependent:
      return "state";
  }
  return "?";
}

Schedule beta_linear(double total_time) { return Schedule::linear_in_time(total_time); }

SafeAlphaResult safe_alpha_estimate(const SystemModel& model, const InitialDistribution& init,
                                    const SimulationPlan& plan, int n_probe_paths,
                                    std::uint64_t seed, double safety) {
  if (n_probe_paths < 1) throw ScheduleError("safe alpha needs at least one probe path");
  SimulationPlan probe = plan;
  probe.seed = seed;
  probe.validate();

  CovectorOptions opts;
  opts.explosion_cap = std::numeric_limits<double>::infinity();
  double max_growth = 0.0;
  for (int p = 0; p < n_probe_paths; ++p) {
    const PathRecord path = simulate_sde_path(model, init, probe, static_cast<std::uint64_t>(p));
    if (path.divergent()) continue;
    for (int i = 0; i < model.dim; ++i) {
      const Vec e = Vec::Unit(model.dim, i);
      const CovectorResult r =
          drive_covector(path, model, SdeStepper::homogeneous, nullptr, {}, opts, &e);
      max_growth = std::max(max_growth, r.nu.norm());
    }
  }
  if (max_growth == 0.0) throw ScheduleError("every probe path diverged");

  SafeAlphaResult res;
  res.max_growth = max_growth;
  res.log_growth_rate = std::log(max_growth) / plan.total_time;
  res.alpha = safety * std::max(0.0, res.log_growth_rate);
  return res;
}

}  // namespace divker
