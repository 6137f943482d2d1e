#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "divker/types.hpp"

namespace divker {

/// When the strict positivity of the diffusion coefficient is verified.
enum class PositivityCheck {
  every_evaluation,
  first_step_only,
};

#ifdef NDEBUG
inline constexpr PositivityCheck kDefaultPositivityCheck = PositivityCheck::first_step_only;
#else
inline constexpr PositivityCheck kDefaultPositivityCheck = PositivityCheck::every_evaluation;
#endif

/// SDE  dx = F(x) dt + sigma(x) dB  in R^M with a scalar diffusion field and
/// its analytic derivative bundle. Immutable once built; every callback must
/// be safe to call concurrently.
struct SystemModel {
  std::string name;
  int dim = 0;

  std::function<Vec(const Vec&)> drift;
  /// (x, nu) -> grad F(x)^T nu
  std::function<Vec(const Vec&, const Vec&)> drift_jacobian_transpose_apply;
  std::function<double(const Vec&)> drift_divergence;
  std::function<Vec(const Vec&)> drift_divergence_gradient;

  std::function<double(const Vec&)> diffusion;
  std::function<Vec(const Vec&)> diffusion_gradient;
  /// (x, w) -> Hess sigma(x) w
  std::function<Vec(const Vec&, const Vec&)> diffusion_hessian_apply;
  std::function<double(const Vec&)> diffusion_laplacian;

  bool is_additive = false;
  PositivityCheck positivity_check = kDefaultPositivityCheck;

  /// sigma(x), throwing ModelError when it is not strictly positive. With
  /// first_step_only the check runs only when step == 0.
  double checked_diffusion(const Vec& x, std::size_t step = 0) const;

  /// Dense grad F assembled from M transpose applications.
  Mat drift_jacobian(const Vec& x) const;
  /// Dense Hessian of sigma assembled from M Hessian applications.
  Mat diffusion_hessian(const Vec& x) const;
};

/// dx = -a x dt + sigma dB in R^dim (additive noise).
SystemModel linear_ou_model(double a, double sigma, int dim = 1);

enum class CubicNoise {
  unit,  ///< sigma_1(x) = 1
  bump,  ///< sigma_2(x) = 0.5 + exp(-x^2)
};

/// One-dimensional dx = -x^3 dt + sigma_i(x) dB.
SystemModel cubic_model(CubicNoise noise);

/// Cyclic Lorenz-96 with quadratic damping and diffusion
/// base + exp(-|x|^2/2) acting on every coordinate.
SystemModel lorenz96_model(int dim = 40, double damping = 0.01, double base_diffusion = 2.0,
                           double forcing = 8.0);

/// `copies` uncoupled replicas of a one-dimensional additive model.
SystemModel decoupled_model(const SystemModel& base, int copies);

struct CallbackCheck {
  std::string callback;
  double max_error = 0.0;  ///< max |analytic - fd| / (|fd| + floor / tol)
  bool passed = true;
};

struct ValidationReport {
  std::vector<CallbackCheck> checks;
  double tolerance = 1e-6;
  double absolute_floor = 1e-9;

  bool all_passed() const;
  const CallbackCheck& at(const std::string& callback) const;
};

/// Compares every analytic derivative callback against central finite
/// differences at the given points. The drift-divergence gradient and the
/// diffusion Hessian are differenced from the (separately checked)
/// first-derivative callbacks.
ValidationReport validate_derivatives(const SystemModel& model, std::span<const Vec> points,
                                      double step, double tolerance = 1e-6,
                                      double absolute_floor = 1e-9);

}  // namespace divker
