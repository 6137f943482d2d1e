#include "divker/sde_scores.hpp"

#include <cmath>

#include <fmt/format.h>

#include "divker/errors.hpp"

namespace divker {

SdeStepTerms sde_step_terms(const SystemModel& model, const Vec& x, const Vec& dB, double dt) {
  const Vec gs = model.diffusion_gradient(x);
  SdeStepTerms terms;
  terms.approx_div_jacobian = model.drift_divergence_gradient(x) * dt +
                              model.diffusion_hessian_apply(x, dB) -
                              model.diffusion_hessian_apply(x, gs) * dt;
  terms.approx_pullback_inverse_apply = [&model, x, dB, dt, gs](const Vec& nu) -> Vec {
    return nu - dt * model.drift_jacobian_transpose_apply(x, nu) - gs * dB.dot(nu) +
           gs * (gs.dot(nu) * dt);
  };
  return terms;
}

Vec sde_kernel_score(const PathRecord& path, const SystemModel& model, const Schedule& beta,
                     const std::function<Vec(const Vec&)>& init_score) {
  if (!model.is_additive) {
    throw UnsupportedEstimator(fmt::format(
        "model '{}' has state-dependent diffusion; the kernel formula needs additive noise, use "
        "the divergence-kernel estimator instead",
        model.name));
  }
  if (path.divergent()) throw ModelError("cannot estimate on a divergent path");
  if (!beta.has_derivative()) {
    throw ScheduleError("the SDE kernel formula needs a beta schedule with an analytic derivative");
  }
  const int steps = static_cast<int>(path.steps());
  const double dt = path.dt;
  const double total = steps * dt;
  beta.require_terminal_one(steps, total);

  const Vec& x0 = path.states.front();
  const double sigma = model.checked_diffusion(x0);
  Vec nu = Vec::Zero(model.dim);
  const double beta0 = beta.value_at(0, 0.0);
  if (beta0 != 0.0) {
    if (!init_score) {
      throw ModelError("kernel formula with beta_0 != 0 needs the initial score");
    }
    nu = beta0 * init_score(x0);
  }
  Vec integral = Vec::Zero(model.dim);
  for (int n = 0; n < steps; ++n) {
    const double t = n * dt;
    const Vec& dB = path.increments[n];
    const double b = beta.value_at(n, t);
    if (b != 0.0) integral += b * model.drift_jacobian_transpose_apply(path.states[n], dB);
    integral -= beta.derivative_at(t) * dB;
  }
  return nu + integral / sigma;
}

namespace {

/// Shared body of the three covector SDE steps:
///   d nu = ((gs gs^T - grad F^T - alpha) nu + w (Hs gs + gs Lap s - grad div F)) dt
///          - (gs nu^T + w Hs + kernel / sigma) dB
CovectorState covector_step(const CovectorState& state, const Vec& x, const Vec& dB, double dt,
                            double alpha, double source_weight, double kernel_weight,
                            const SystemModel& model) {
  const Vec& nu = state.nu;
  Vec next = nu - dt * (model.drift_jacobian_transpose_apply(x, nu) + alpha * nu);
  if (source_weight != 0.0) next -= (source_weight * dt) * model.drift_divergence_gradient(x);
  if (!model.is_additive) {
    const Vec gs = model.diffusion_gradient(x);
    next += gs * (gs.dot(nu) * dt - nu.dot(dB));
    if (source_weight != 0.0) {
      next += source_weight * (dt * (model.diffusion_hessian_apply(x, gs) +
                                     model.diffusion_laplacian(x) * gs) -
                               model.diffusion_hessian_apply(x, dB));
    }
  }
  if (kernel_weight != 0.0) {
    next -= (kernel_weight / model.checked_diffusion(x, state.step_index)) * dB;
  }
  return {std::move(next), state.step_index + 1};
}

}  // namespace

CovectorState sde_divergence_step(const CovectorState& state, const Vec& x, const Vec& dB,
                                  double dt, const SystemModel& model) {
  return covector_step(state, x, dB, dt, 0.0, 1.0, 0.0, model);
}

CovectorState sde_divker_step(const CovectorState& state, const Vec& x, const Vec& dB, double dt,
                              double alpha_next, const SystemModel& model) {
  return covector_step(state, x, dB, dt, alpha_next, 1.0, alpha_next, model);
}

CovectorState sde_divker_noh0_step(const CovectorState& state, const Vec& x, const Vec& dB,
                                   double dt, double t_over_T, double total_time,
                                   const SystemModel& model) {
  if (t_over_T < 0.0 || t_over_T > 1.0) {
    throw ScheduleError(fmt::format("t/T must lie in [0, 1], got {}", t_over_T));
  }
  return covector_step(state, x, dB, dt, 0.0, t_over_T, 1.0 / total_time, model);
}

CovectorState sde_homogeneous_step(const CovectorState& state, const Vec& x, const Vec& dB,
                                   double dt, const SystemModel& model) {
  return covector_step(state, x, dB, dt, 0.0, 0.0, 0.0, model);
}

CovectorResult drive_covector(const PathRecord& path, const SystemModel& model,
                              SdeStepper stepper, const Schedule* alpha,
                              const std::function<Vec(const Vec&)>& init_score,
                              const CovectorOptions& opts, const Vec* initial) {
  if (path.divergent()) {
    throw ModelError(fmt::format("path {} diverged at step {}", path.path_id,
                                 *path.divergent_step));
  }
  if (path.states.front().size() != model.dim) {
    throw ModelError("path and model dimensions differ");
  }
  const std::size_t steps = path.steps();
  const double dt = path.dt;
  const double total = static_cast<double>(steps) * dt;

  CovectorState state;
  switch (stepper) {
    case SdeStepper::divergence:
    case SdeStepper::divker:
      if (!init_score) {
        throw ModelError("this covector SDE starts from grad log h_0, which the initial law "
                         "does not provide");
      }
      state.nu = init_score(path.states.front());
      break;
    case SdeStepper::divker_noh0:
      state.nu = Vec::Zero(model.dim);
      break;
    case SdeStepper::homogeneous:
      if (initial == nullptr) throw ModelError("homogeneous flow needs an initial covector");
      state.nu = *initial;
      break;
  }
  if (stepper == SdeStepper::divker && alpha == nullptr) {
    throw ScheduleError("divergence-kernel stepping needs an alpha schedule");
  }

  CovectorResult res;
  check_covector(state.nu, 0, opts.explosion_cap);
  res.max_norm = state.nu.norm();
  if (opts.trace != nullptr) opts.trace->push_back(state.nu);

  for (std::size_t n = 0; n < steps; ++n) {
    const Vec& x = path.states[n];
    const Vec& dB = path.increments[n];
    switch (stepper) {
      case SdeStepper::divergence:
        state = sde_divergence_step(state, x, dB, dt, model);
        break;
      case SdeStepper::divker: {
        const double a = alpha->value_at(static_cast<int>(n + 1), (n + 1) * dt,
                                         &path.states[n + 1]);
        state = sde_divker_step(state, x, dB, dt, a, model);
        break;
      }
      case SdeStepper::divker_noh0:
        state = sde_divker_noh0_step(state, x, dB, dt, static_cast<double>(n) / steps, total,
                                     model);
        break;
      case SdeStepper::homogeneous:
        state = sde_homogeneous_step(state, x, dB, dt, model);
        break;
    }
    check_covector(state.nu, n + 1, opts.explosion_cap);
    res.max_norm = std::max(res.max_norm, state.nu.norm());
    if (opts.trace != nullptr) opts.trace->push_back(state.nu);
  }
  res.nu = std::move(state.nu);
  return res;
}

}  // namespace divker
