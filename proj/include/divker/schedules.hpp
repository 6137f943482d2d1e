#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "divker/types.hpp"

namespace divker {

struct SystemModel;
struct InitialDistribution;
struct SimulationPlan;

enum class ScheduleKind {
  constant,
  linear_in_time,   ///< t / T
  reciprocal_step,  ///< 1 / n, defined for n >= 1
  reciprocal_time,  ///< 1 / t, defined for t > 0
  tabulated,        ///< values indexed by step
  state_dependent,  ///< user function of (n, t, x_n)
};

/// Deterministic weight process: alpha (divergence-to-kernel shift) or beta
/// (kernel spreading). Values may read the current state but never a path
/// suffix, so a single forward pass can evaluate them.
class Schedule {
 public:
  using StateFunction = std::function<double(int step, double time, const Vec& state)>;

  static Schedule constant(double value);
  static Schedule linear_in_time(double total_time);
  static Schedule reciprocal_step();
  static Schedule reciprocal_time();
  static Schedule tabulated(std::vector<double> values);
  static Schedule state_dependent(StateFunction fn);

  ScheduleKind kind() const { return kind_; }
  bool reads_state() const { return kind_ == ScheduleKind::state_dependent; }
  bool has_derivative() const {
    return kind_ == ScheduleKind::constant || kind_ == ScheduleKind::linear_in_time;
  }

  /// Value at step n / time t. `state` is required for state-dependent
  /// schedules and ignored otherwise.
  double value_at(int step, double time, const Vec* state = nullptr) const;
  /// Time derivative; only constant and linear-in-time schedules carry one.
  double derivative_at(double time) const;

  /// Beta schedules: deterministic and equal to 1 at step N / time T.
  void require_terminal_one(int steps, double total_time) const;
  /// Alpha schedules: nonnegative on steps 1..N unless explicitly allowed.
  void require_nonnegative(int steps, double total_time) const;

  std::string describe() const;

 private:
  Schedule(ScheduleKind kind, double param) : kind_(kind), param_(param) {}

  ScheduleKind kind_;
  double param_ = 0.0;
  std::vector<double> table_;
  StateFunction fn_;
};

/// beta_t = t / T.
Schedule beta_linear(double total_time);

struct SafeAlphaResult {
  double alpha = 0.0;
  double log_growth_rate = 0.0;  ///< (1/T) log max_growth before the safety factor
  double max_growth = 1.0;
};

/// Empirical version of the "alpha > log|D^T| / T" rule: integrates the
/// source-free covector flow from each basis covector along probe paths and
/// scales the largest observed log growth rate by `safety`. A heuristic, not
/// a bound; contracting flows give 0.
SafeAlphaResult safe_alpha_estimate(const SystemModel& model, const InitialDistribution& init,
                                    const SimulationPlan& plan, int n_probe_paths,
                                    std::uint64_t seed, double safety = 1.5);

}  // namespace divker
