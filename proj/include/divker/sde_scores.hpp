#pragma once

#include <functional>

#include "divker/discrete_scores.hpp"
#include "divker/model.hpp"
#include "divker/paths.hpp"
#include "divker/schedules.hpp"

namespace divker {

/// Small-dt approximations of the step geometry of the Euler map
/// g(x) = x + F(x) dt + sigma(x) dB.
struct SdeStepTerms {
  /// grad div F dt + Hess sigma dB - Hess sigma grad sigma dt
  Vec approx_div_jacobian;
  /// nu -> (I - grad F^T dt - grad sigma dB^T + grad sigma grad sigma^T dt) nu
  std::function<Vec(const Vec&)> approx_pullback_inverse_apply;
};

/// The returned pullback closure references `model`, which must outlive it.
SdeStepTerms sde_step_terms(const SystemModel& model, const Vec& x, const Vec& dB, double dt);

/// Kernel formula for SDEs with additive noise:
/// beta_0 grad log h_0(x_0) + (1/sigma) sum_n (beta_n grad F^T(x_n) - beta'_n) dB_n.
Vec sde_kernel_score(const PathRecord& path, const SystemModel& model, const Schedule& beta,
                     const std::function<Vec(const Vec&)>& init_score);

/// One Euler step of the pure-divergence covector SDE.
CovectorState sde_divergence_step(const CovectorState& state, const Vec& x, const Vec& dB,
                                  double dt, const SystemModel& model);

/// One step of the divergence-kernel covector SDE; `alpha_next` is the
/// schedule value at step n+1, all other coefficients are taken at x_n.
CovectorState sde_divker_step(const CovectorState& state, const Vec& x, const Vec& dB, double dt,
                              double alpha_next, const SystemModel& model);

/// One step of the covector SDE that needs no initial score; sources are
/// weighted by t_n / T and the kernel term is dB / (T sigma).
CovectorState sde_divker_noh0_step(const CovectorState& state, const Vec& x, const Vec& dB,
                                   double dt, double t_over_T, double total_time,
                                   const SystemModel& model);

/// Source-free flow  d nu = (grad sigma grad sigma^T - grad F^T) nu dt - grad sigma (nu . dB).
CovectorState sde_homogeneous_step(const CovectorState& state, const Vec& x, const Vec& dB,
                                   double dt, const SystemModel& model);

enum class SdeStepper {
  divergence,
  divker,
  divker_noh0,
  homogeneous,
};

/// Folds a stepper along the path from its prescribed initial covector:
/// init_score(x_0) for divergence/divker, zero for divker_noh0, and
/// `initial` (required) for the homogeneous flow.
CovectorResult drive_covector(const PathRecord& path, const SystemModel& model,
                              SdeStepper stepper, const Schedule* alpha,
                              const std::function<Vec(const Vec&)>& init_score,
                              const CovectorOptions& opts = {}, const Vec* initial = nullptr);

}  // namespace divker
