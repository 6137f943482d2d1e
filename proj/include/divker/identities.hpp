#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divker/model.hpp"
#include "divker/paths.hpp"

namespace divker {

struct IdentityCheck {
  std::string name;
  double value = 0.0;      ///< measured residual (or slope, for order checks)
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
  bool informational = false;  ///< reported, not gated
};

struct IdentitySuite {
  std::vector<IdentityCheck> checks;
  bool all_passed() const;
};

/// One-dimensional one-step system with h_0 = N(0, 1).
struct OneStepBenchmark {
  std::string name;
  DiscreteChain chain;
  NoiseKernel kernel;
};

/// f = 0.9x with sigma = 1 (kernel variance 1) and with the bump diffusion
/// 0.5 + exp(-x^2) (kernel variance 0.01); Euler steps of dx = -x^3 dt with
/// both diffusions (kernel variance dt).
std::vector<OneStepBenchmark> one_step_benchmarks(double dt = 0.01);

enum class OneStepEstimator { kernel, divergence, divker };

struct OneStepGrid {
  double lo = -8.0;
  double hi = 8.0;
  double spacing = 1e-3;
};

/// max over x1 of |E[w | x1] - grad log h_1(x1)|, both by quadrature on the
/// same grid.
double one_step_residual(const OneStepBenchmark& bench, OneStepEstimator estimator,
                         double alpha, const std::vector<double>& points,
                         const OneStepGrid& grid = {});

/// Every benchmark against kernel, divergence and divergence-kernel with
/// alpha in {0, 0.3, 1} at 11 points of [-1.8, 1.8].
IdentitySuite one_step_identity_suite(double tolerance = 1e-4, const OneStepGrid& grid = {});

/// Path-level identities on the Euler chain of the cubic bump system.
IdentityCheck check_divker_alpha_zero(std::size_t n_paths, std::uint64_t seed);
IdentityCheck check_divker_alpha_one(std::size_t n_paths, std::uint64_t seed);
IdentityCheck check_reciprocal_step_noh0(std::size_t n_paths, std::uint64_t seed);
/// SDE form: (t/T) nu' with alpha = 1/t, started from h_0 = N(0, 1), agrees
/// with the no-h_0 flow to within 2 sqrt(dt) at every step of every shared
/// path. The detail string also gives the fraction of paths within bounds.
IdentityCheck check_reciprocal_time_noh0(const SystemModel& model, std::size_t n_paths,
                                         std::uint64_t seed, double total_time = 1.0,
                                         double dt = 1e-3);

/// Log-log slope of mean |approx - exact| against dt for div g_* and
/// g^{*-1} of the cubic bump Euler step over the given dt values.
struct OrderResult {
  std::vector<double> dts;
  std::vector<double> div_error;
  std::vector<double> pullback_error;
  double div_slope = 0.0;
  double pullback_slope = 0.0;
};
OrderResult approximation_order(const std::vector<double>& dts, std::size_t n_draws,
                                std::uint64_t seed);

/// Everything above at validation-sized sample counts.
IdentitySuite full_identity_suite();

}  // namespace divker
