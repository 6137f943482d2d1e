#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "divker/paths.hpp"
#include "divker/schedules.hpp"
#include "divker/types.hpp"

namespace divker {

/// Running covector of the recursive score formulas.
struct CovectorState {
  Vec nu;
  std::size_t step_index = 0;
};

/// Jacobian g_{b*}(x) of g_b(x) = f(x) + sigma(x) b and its log-determinant
/// gradient div g_{b*} = grad|g_{b*}| / |g_{b*}|.
struct StepGeometry {
  Mat jacobian;
  Vec div_jacobian;
};

enum class GeometryMode {
  automatic,  ///< exact when the chain provides 1-D closed forms, else generic
  exact,
  generic,
};

struct CovectorOptions {
  double explosion_cap = 1e12;
  double determinant_floor = 1e-12;
  GeometryMode geometry = GeometryMode::automatic;
  double probe_step = 1e-5;
  /// When set, receives nu_0 .. nu_N.
  std::vector<Vec>* trace = nullptr;
};

struct CovectorResult {
  Vec nu;
  double max_norm = 0.0;  ///< max_n |nu_n| along the path
};

/// p(x0, x1) = sigma(x0)^{-M} k((x1 - f(x0)) / sigma(x0)).
double transition_density(const DiscreteChain& chain, const NoiseKernel& kernel, const Vec& x0,
                          const Vec& x1);

/// b_0 = (x1 - f(x0)) / sigma(x0).
Vec recover_noise(const DiscreteChain& chain, const Vec& x0, const Vec& x1);

/// grad log k(b_0) / sigma(x0).
Vec one_step_kernel_score_term(const DiscreteChain& chain, const NoiseKernel& kernel,
                               const Vec& x0, const Vec& x1);

/// g^{*-1}(grad log h_0(x0) - div g_{b_0*}(x0)).
Vec one_step_divergence_term(const DiscreteChain& chain, const Vec& x0, const Vec& x1,
                             const Vec& init_score, const CovectorOptions& opts = {});

/// alpha * kernel term + (1 - alpha) * divergence term.
Vec one_step_divker_term(const DiscreteChain& chain, const NoiseKernel& kernel, const Vec& x0,
                         const Vec& x1, const Vec& init_score, double alpha,
                         const CovectorOptions& opts = {});

/// Closed-form 1-D geometry: jacobian f' + b sigma', divergence
/// (f'' + b sigma'') / (f' + b sigma').
StepGeometry step_geometry_exact(const DiscreteChain& chain, const Vec& x, const Vec& b,
                                 double determinant_floor = 1e-12);

/// Geometry from the chain's Jacobian callbacks, with div g_* taken as the
/// central finite-difference gradient of log|det g_*|. Validation grade.
StepGeometry step_geometry_generic(const DiscreteChain& chain, const Vec& x, const Vec& b,
                                   double probe_step, double determinant_floor = 1e-12);

StepGeometry step_geometry(const DiscreteChain& chain, const Vec& x, const Vec& b,
                           const CovectorOptions& opts);

/// g^{*-1} nu: solves g_*^T w = nu by partially pivoted LU.
Vec pullback_inverse_apply(const StepGeometry& geometry, const Vec& nu);

/// Kernel formula spread over all steps with weights beta_n (additive noise
/// only). beta_0 != 0 needs `init_score`.
Vec nstep_kernel_score(const PathRecord& path, const DiscreteChain& chain,
                       const NoiseKernel& kernel, const Schedule& beta,
                       const std::function<Vec(const Vec&)>& init_score);

/// nu_{n+1} = g^{*-1}(nu_n - div g_{b_n*}(x_n)), nu_0 = grad log h_0(x_0).
CovectorResult nstep_divergence_score(const PathRecord& path, const DiscreteChain& chain,
                                      const NoiseKernel& kernel,
                                      const std::function<Vec(const Vec&)>& init_score,
                                      const CovectorOptions& opts = {});

/// nu_{n+1} = (1 - a_{n+1}) g^{*-1}(nu_n - div g_*) + a_{n+1} grad log k(b_n) / sigma(x_n),
/// with a_{n+1} read at step n+1 (and x_{n+1} for state-dependent schedules).
CovectorResult nstep_divker_forward(const PathRecord& path, const DiscreteChain& chain,
                                    const NoiseKernel& kernel, const Schedule& alpha,
                                    const std::function<Vec(const Vec&)>& init_score,
                                    const CovectorOptions& opts = {});

/// nu_0 = 0, nu_{n+1} = g^{*-1}(nu_n - (n/N) div g_*) + grad log k(b_n) / (N sigma(x_n)).
CovectorResult nstep_divker_noh0(const PathRecord& path, const DiscreteChain& chain,
                                 const NoiseKernel& kernel, const CovectorOptions& opts = {});

/// Throws CovectorExplosion when nu is non-finite or above the cap.
void check_covector(const Vec& nu, std::size_t step, double cap);

}  // namespace divker
