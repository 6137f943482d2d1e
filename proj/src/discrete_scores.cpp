#include "divker/discrete_scores.hpp"

#include <cmath>

#include <fmt/format.h>

#include "divker/errors.hpp"

namespace divker {
namespace {

void require_usable_path(const PathRecord& path, const DiscreteChain& chain,
                         const NoiseKernel& kernel) {
  if (path.divergent()) {
    throw ModelError(fmt::format("path {} diverged at step {}; exclude it before estimating",
                                 path.path_id, *path.divergent_step));
  }
  if (path.states.size() != path.increments.size() + 1) {
    throw ModelError("path record needs exactly one more state than increments");
  }
  if (path.states.front().size() != chain.dim || kernel.dim != chain.dim) {
    throw ModelError("path, chain and kernel dimensions differ");
  }
}

Vec require_init_score(const std::function<Vec(const Vec&)>& init_score, const Vec& x0,
                       const char* estimator) {
  if (!init_score) {
    throw ModelError(fmt::format("{} needs the initial score grad log h_0, which this initial "
                                 "law does not provide",
                                 estimator));
  }
  return init_score(x0);
}

/// Geometry at step n, re-labelling singular-step errors with the index.
StepGeometry geometry_at(const DiscreteChain& chain, const Vec& x, const Vec& b,
                         const CovectorOptions& opts, std::size_t n) {
  try {
    return step_geometry(chain, x, b, opts);
  } catch (const SingularStep& e) {
    throw SingularStep(n, e.determinant(),
                       fmt::format("singular step geometry at step {}: |det g_*| = {:.3g}", n,
                                   e.determinant()));
  }
}

void record(CovectorResult& res, const CovectorOptions& opts, const Vec& nu) {
  res.max_norm = std::max(res.max_norm, nu.norm());
  if (opts.trace != nullptr) opts.trace->push_back(nu);
}

}  // namespace

void check_covector(const Vec& nu, std::size_t step, double cap) {
  const double norm = nu.norm();
  if (!std::isfinite(norm) || norm > cap) {
    throw CovectorExplosion(step, norm,
                            fmt::format("covector exploded at step {}: |nu| = {:.6g} (cap {:.3g})",
                                        step, norm, cap));
  }
}

double transition_density(const DiscreteChain& chain, const NoiseKernel& kernel, const Vec& x0,
                          const Vec& x1) {
  const double s = chain.checked_diffusion(x0);
  return std::pow(s, -chain.dim) * kernel.density((x1 - chain.map(x0)) / s);
}

Vec recover_noise(const DiscreteChain& chain, const Vec& x0, const Vec& x1) {
  return (x1 - chain.map(x0)) / chain.checked_diffusion(x0);
}

Vec one_step_kernel_score_term(const DiscreteChain& chain, const NoiseKernel& kernel,
                               const Vec& x0, const Vec& x1) {
  const double s = chain.checked_diffusion(x0);
  return kernel.log_density_gradient((x1 - chain.map(x0)) / s) / s;
}

Vec one_step_divergence_term(const DiscreteChain& chain, const Vec& x0, const Vec& x1,
                             const Vec& init_score, const CovectorOptions& opts) {
  const StepGeometry geo = step_geometry(chain, x0, recover_noise(chain, x0, x1), opts);
  return pullback_inverse_apply(geo, init_score - geo.div_jacobian);
}

Vec one_step_divker_term(const DiscreteChain& chain, const NoiseKernel& kernel, const Vec& x0,
                         const Vec& x1, const Vec& init_score, double alpha,
                         const CovectorOptions& opts) {
  return alpha * one_step_kernel_score_term(chain, kernel, x0, x1) +
         (1.0 - alpha) * one_step_divergence_term(chain, x0, x1, init_score, opts);
}

StepGeometry step_geometry_exact(const DiscreteChain& chain, const Vec& x, const Vec& b,
                                 double determinant_floor) {
  if (!chain.has_exact_geometry()) {
    throw ModelError("exact step geometry needs a 1-D chain with f'' and sigma''");
  }
  const double df = chain.map_jacobian(x)(0, 0);
  const double ds = chain.diffusion_gradient(x)[0];
  const double jac = df + b[0] * ds;
  if (!(std::abs(jac) > determinant_floor)) throw SingularStep(0, jac, "singular step geometry");
  const double d2 = chain.map_second_derivative(x[0]) + b[0] * chain.diffusion_second_derivative(x[0]);
  return {Mat::Constant(1, 1, jac), Vec::Constant(1, d2 / jac)};
}

namespace {

Mat generic_jacobian(const DiscreteChain& chain, const Vec& x, const Vec& b) {
  return chain.map_jacobian(x) + b * chain.diffusion_gradient(x).transpose();
}

double log_abs_det(const Mat& m, double floor) {
  const double det = Eigen::PartialPivLU<Mat>(m).determinant();
  if (!(std::abs(det) > floor)) throw SingularStep(0, det, "singular step geometry");
  return std::log(std::abs(det));
}

}  // namespace

StepGeometry step_geometry_generic(const DiscreteChain& chain, const Vec& x, const Vec& b,
                                   double probe_step, double determinant_floor) {
  if (!(probe_step > 0.0)) throw ModelError("step_geometry_generic needs probe_step > 0");
  StepGeometry geo;
  geo.jacobian = generic_jacobian(chain, x, b);
  log_abs_det(geo.jacobian, determinant_floor);
  geo.div_jacobian.resize(chain.dim);
  for (int i = 0; i < chain.dim; ++i) {
    Vec xp = x, xm = x;
    xp[i] += probe_step;
    xm[i] -= probe_step;
    geo.div_jacobian[i] = (log_abs_det(generic_jacobian(chain, xp, b), determinant_floor) -
                           log_abs_det(generic_jacobian(chain, xm, b), determinant_floor)) /
                          (2.0 * probe_step);
  }
  return geo;
}

StepGeometry step_geometry(const DiscreteChain& chain, const Vec& x, const Vec& b,
                           const CovectorOptions& opts) {
  switch (opts.geometry) {
    case GeometryMode::exact:
      return step_geometry_exact(chain, x, b, opts.determinant_floor);
    case GeometryMode::generic:
      return step_geometry_generic(chain, x, b, opts.probe_step, opts.determinant_floor);
    case GeometryMode::automatic:
      break;
  }
  if (chain.has_exact_geometry()) return step_geometry_exact(chain, x, b, opts.determinant_floor);
  return step_geometry_generic(chain, x, b, opts.probe_step, opts.determinant_floor);
}

Vec pullback_inverse_apply(const StepGeometry& geometry, const Vec& nu) {
  if (geometry.jacobian.rows() == 1) return nu / geometry.jacobian(0, 0);
  return Eigen::PartialPivLU<Mat>(geometry.jacobian.transpose()).solve(nu);
}

Vec nstep_kernel_score(const PathRecord& path, const DiscreteChain& chain,
                       const NoiseKernel& kernel, const Schedule& beta,
                       const std::function<Vec(const Vec&)>& init_score) {
  require_usable_path(path, chain, kernel);
  if (!chain.is_additive) {
    throw UnsupportedEstimator("the N-step kernel formula needs additive noise; use the "
                               "divergence-kernel estimator for state-dependent diffusion");
  }
  if (beta.reads_state()) {
    throw ScheduleError("kernel-formula beta schedules must be deterministic");
  }
  const int steps = static_cast<int>(path.steps());
  const double dt = path.dt;
  beta.require_terminal_one(steps, steps * dt);

  const Vec& x0 = path.states.front();
  const double sigma = chain.checked_diffusion(x0);
  Vec nu = Vec::Zero(chain.dim);
  const double beta0 = beta.value_at(0, 0.0);
  if (beta0 != 0.0) nu = beta0 * require_init_score(init_score, x0, "kernel formula with beta_0 != 0");

  Vec sum = Vec::Zero(chain.dim);
  double beta_n = beta0;
  for (int n = 0; n < steps; ++n) {
    const double beta_next = beta.value_at(n + 1, (n + 1) * dt);
    const Vec g = kernel.log_density_gradient(path.increments[n]);
    sum += beta_next * g;
    if (beta_n != 0.0) sum -= beta_n * chain.map_jacobian_transpose_apply(path.states[n], g);
    beta_n = beta_next;
  }
  return nu + sum / sigma;
}

CovectorResult nstep_divergence_score(const PathRecord& path, const DiscreteChain& chain,
                                      const NoiseKernel& kernel,
                                      const std::function<Vec(const Vec&)>& init_score,
                                      const CovectorOptions& opts) {
  require_usable_path(path, chain, kernel);
  CovectorResult res;
  Vec nu = require_init_score(init_score, path.states.front(), "divergence formula");
  check_covector(nu, 0, opts.explosion_cap);
  record(res, opts, nu);
  for (std::size_t n = 0; n < path.steps(); ++n) {
    const StepGeometry geo = geometry_at(chain, path.states[n], path.increments[n], opts, n);
    nu = pullback_inverse_apply(geo, nu - geo.div_jacobian);
    check_covector(nu, n + 1, opts.explosion_cap);
    record(res, opts, nu);
  }
  res.nu = std::move(nu);
  return res;
}

CovectorResult nstep_divker_forward(const PathRecord& path, const DiscreteChain& chain,
                                    const NoiseKernel& kernel, const Schedule& alpha,
                                    const std::function<Vec(const Vec&)>& init_score,
                                    const CovectorOptions& opts) {
  require_usable_path(path, chain, kernel);
  CovectorResult res;
  Vec nu = require_init_score(init_score, path.states.front(), "divergence-kernel formula");
  check_covector(nu, 0, opts.explosion_cap);
  record(res, opts, nu);
  for (std::size_t n = 0; n < path.steps(); ++n) {
    const Vec& x = path.states[n];
    const Vec& b = path.increments[n];
    const double a = alpha.value_at(static_cast<int>(n + 1), (n + 1) * path.dt, &path.states[n + 1]);
    Vec next = Vec::Zero(chain.dim);
    if (a != 1.0) {
      const StepGeometry geo = geometry_at(chain, x, b, opts, n);
      next = (1.0 - a) * pullback_inverse_apply(geo, nu - geo.div_jacobian);
    }
    if (a != 0.0) next += a * kernel.log_density_gradient(b) / chain.checked_diffusion(x);
    nu = std::move(next);
    check_covector(nu, n + 1, opts.explosion_cap);
    record(res, opts, nu);
  }
  res.nu = std::move(nu);
  return res;
}

CovectorResult nstep_divker_noh0(const PathRecord& path, const DiscreteChain& chain,
                                 const NoiseKernel& kernel, const CovectorOptions& opts) {
  require_usable_path(path, chain, kernel);
  CovectorResult res;
  const double total = static_cast<double>(path.steps());
  Vec nu = Vec::Zero(chain.dim);
  record(res, opts, nu);
  for (std::size_t n = 0; n < path.steps(); ++n) {
    const Vec& x = path.states[n];
    const Vec& b = path.increments[n];
    const StepGeometry geo = geometry_at(chain, x, b, opts, n);
    const double w = static_cast<double>(n) / total;
    nu = pullback_inverse_apply(geo, nu - w * geo.div_jacobian) +
         kernel.log_density_gradient(b) / (total * chain.checked_diffusion(x));
    check_covector(nu, n + 1, opts.explosion_cap);
    record(res, opts, nu);
  }
  res.nu = std::move(nu);
  return res;
}

}  // namespace divker
