#include "divker/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "divker/errors.hpp"

namespace divker {

double SystemModel::checked_diffusion(const Vec& x, std::size_t step) const {
  const double s = diffusion(x);
  if (positivity_check == PositivityCheck::every_evaluation || step == 0) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ModelError(fmt::format("model '{}': diffusion must be positive, got {} at step {}",
                                   name, s, step));
    }
  }
  return s;
}

Mat SystemModel::drift_jacobian(const Vec& x) const {
  Mat jac(dim, dim);
  Vec e = Vec::Zero(dim);
  for (int i = 0; i < dim; ++i) {
    e[i] = 1.0;
    // row i of grad F is grad F^T e_i
    jac.row(i) = drift_jacobian_transpose_apply(x, e).transpose();
    e[i] = 0.0;
  }
  return jac;
}

Mat SystemModel::diffusion_hessian(const Vec& x) const {
  Mat hess(dim, dim);
  Vec e = Vec::Zero(dim);
  for (int i = 0; i < dim; ++i) {
    e[i] = 1.0;
    hess.col(i) = diffusion_hessian_apply(x, e);
    e[i] = 0.0;
  }
  return hess;
}

SystemModel linear_ou_model(double a, double sigma, int dim) {
  if (dim < 1) throw ModelError("linear OU model needs dim >= 1");
  if (!(sigma > 0.0)) throw ModelError("linear OU model needs sigma > 0");
  SystemModel m;
  m.name = "ou";
  m.dim = dim;
  m.drift = [a](const Vec& x) -> Vec { return -a * x; };
  m.drift_jacobian_transpose_apply = [a](const Vec&, const Vec& nu) -> Vec { return -a * nu; };
  m.drift_divergence = [a, dim](const Vec&) { return -a * dim; };
  m.drift_divergence_gradient = [dim](const Vec&) -> Vec { return Vec::Zero(dim); };
  m.diffusion = [sigma](const Vec&) { return sigma; };
  m.diffusion_gradient = [dim](const Vec&) -> Vec { return Vec::Zero(dim); };
  m.diffusion_hessian_apply = [dim](const Vec&, const Vec&) -> Vec { return Vec::Zero(dim); };
  m.diffusion_laplacian = [](const Vec&) { return 0.0; };
  m.is_additive = true;
  return m;
}

SystemModel cubic_model(CubicNoise noise) {
  SystemModel m;
  m.dim = 1;
  m.drift = [](const Vec& x) -> Vec { return Vec::Constant(1, -x[0] * x[0] * x[0]); };
  m.drift_jacobian_transpose_apply = [](const Vec& x, const Vec& nu) -> Vec {
    return Vec::Constant(1, -3.0 * x[0] * x[0] * nu[0]);
  };
  m.drift_divergence = [](const Vec& x) { return -3.0 * x[0] * x[0]; };
  m.drift_divergence_gradient = [](const Vec& x) -> Vec { return Vec::Constant(1, -6.0 * x[0]); };

  switch (noise) {
    case CubicNoise::unit:
      m.name = "cubic-sigma1";
      m.diffusion = [](const Vec&) { return 1.0; };
      m.diffusion_gradient = [](const Vec&) -> Vec { return Vec::Zero(1); };
      m.diffusion_hessian_apply = [](const Vec&, const Vec&) -> Vec { return Vec::Zero(1); };
      m.diffusion_laplacian = [](const Vec&) { return 0.0; };
      m.is_additive = true;
      break;
    case CubicNoise::bump:
      m.name = "cubic-sigma2";
      m.diffusion = [](const Vec& x) { return 0.5 + std::exp(-x[0] * x[0]); };
      m.diffusion_gradient = [](const Vec& x) -> Vec {
        return Vec::Constant(1, -2.0 * x[0] * std::exp(-x[0] * x[0]));
      };
      m.diffusion_hessian_apply = [](const Vec& x, const Vec& w) -> Vec {
        const double x2 = x[0] * x[0];
        return Vec::Constant(1, (4.0 * x2 - 2.0) * std::exp(-x2) * w[0]);
      };
      m.diffusion_laplacian = [](const Vec& x) {
        const double x2 = x[0] * x[0];
        return (4.0 * x2 - 2.0) * std::exp(-x2);
      };
      m.is_additive = false;
      break;
  }
  return m;
}

SystemModel lorenz96_model(int dim, double damping, double base_diffusion, double forcing) {
  if (dim < 4) {
    throw ModelError(fmt::format("lorenz96 needs at least 4 coordinates for its cyclic "
                                 "stencil, got {}",
                                 dim));
  }
  if (damping < 0.0) throw ModelError("lorenz96 damping must be >= 0");
  if (!(base_diffusion >= 0.0)) throw ModelError("lorenz96 base diffusion must be >= 0");

  const int n = dim;
  auto wrap = [n](int i) { return ((i % n) + n) % n; };

  SystemModel m;
  m.name = "lorenz96";
  m.dim = dim;
  m.drift = [=](const Vec& x) -> Vec {
    Vec f(n);
    for (int i = 0; i < n; ++i) {
      f[i] = (x[wrap(i + 1)] - x[wrap(i - 2)]) * x[wrap(i - 1)] - x[i] + forcing -
             damping * x[i] * x[i];
    }
    return f;
  };
  m.drift_jacobian_transpose_apply = [=](const Vec& x, const Vec& nu) -> Vec {
    Vec out(n);
    for (int j = 0; j < n; ++j) {
      // F^{j-1} depends on x^j through x^{(j-1)+1}; F^{j+2} through x^{(j+2)-2};
      // F^{j+1} through x^{(j+1)-1}; F^j through its own linear and damping terms.
      out[j] = nu[wrap(j - 1)] * x[wrap(j - 2)] - nu[wrap(j + 2)] * x[wrap(j + 1)] +
               nu[wrap(j + 1)] * (x[wrap(j + 2)] - x[wrap(j - 1)]) +
               nu[j] * (-1.0 - 2.0 * damping * x[j]);
    }
    return out;
  };
  m.drift_divergence = [=](const Vec& x) { return -n - 2.0 * damping * x.sum(); };
  m.drift_divergence_gradient = [=](const Vec&) -> Vec { return Vec::Constant(n, -2.0 * damping); };

  m.diffusion = [=](const Vec& x) { return base_diffusion + std::exp(-0.5 * x.squaredNorm()); };
  m.diffusion_gradient = [](const Vec& x) -> Vec {
    return -std::exp(-0.5 * x.squaredNorm()) * x;
  };
  m.diffusion_hessian_apply = [](const Vec& x, const Vec& w) -> Vec {
    const double g = std::exp(-0.5 * x.squaredNorm());
    return g * (x * x.dot(w) - w);
  };
  m.diffusion_laplacian = [n](const Vec& x) {
    const double r2 = x.squaredNorm();
    return std::exp(-0.5 * r2) * (r2 - n);
  };
  m.is_additive = false;
  return m;
}

SystemModel decoupled_model(const SystemModel& base, int copies) {
  if (base.dim != 1) throw ModelError("decoupled_model expects a one-dimensional base model");
  if (!base.is_additive) {
    throw ModelError("decoupled_model needs additive noise; a shared scalar diffusion would "
                     "couple the copies");
  }
  if (copies < 1) throw ModelError("decoupled_model needs at least one copy");

  auto coord = [](const Vec& x, int i) { return Vec::Constant(1, x[i]); };
  const Vec origin = Vec::Zero(1);
  const double sigma = base.diffusion(origin);

  SystemModel m;
  m.name = fmt::format("{}x{}", base.name, copies);
  m.dim = copies;
  m.drift = [=](const Vec& x) -> Vec {
    Vec f(copies);
    for (int i = 0; i < copies; ++i) f[i] = base.drift(coord(x, i))[0];
    return f;
  };
  m.drift_jacobian_transpose_apply = [=](const Vec& x, const Vec& nu) -> Vec {
    Vec out(copies);
    for (int i = 0; i < copies; ++i) {
      out[i] = base.drift_jacobian_transpose_apply(coord(x, i), coord(nu, i))[0];
    }
    return out;
  };
  m.drift_divergence = [=](const Vec& x) {
    double d = 0.0;
    for (int i = 0; i < copies; ++i) d += base.drift_divergence(coord(x, i));
    return d;
  };
  m.drift_divergence_gradient = [=](const Vec& x) -> Vec {
    Vec g(copies);
    for (int i = 0; i < copies; ++i) g[i] = base.drift_divergence_gradient(coord(x, i))[0];
    return g;
  };
  m.diffusion = [sigma](const Vec&) { return sigma; };
  m.diffusion_gradient = [copies](const Vec&) -> Vec { return Vec::Zero(copies); };
  m.diffusion_hessian_apply = [copies](const Vec&, const Vec&) -> Vec { return Vec::Zero(copies); };
  m.diffusion_laplacian = [](const Vec&) { return 0.0; };
  m.is_additive = true;
  return m;
}

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const CallbackCheck& ValidationReport::at(const std::string& callback) const {
  for (const auto& c : checks) {
    if (c.callback == callback) return c;
  }
  throw Error(fmt::format("no validation entry for callback '{}'", callback));
}

namespace {

class Comparator {
 public:
  Comparator(const SystemModel& model, double tol, double floor)
      : model_(model), tol_(tol), floor_(floor) {}

  void compare(CallbackCheck& check, double analytic, double fd, const Vec& x) const {
    if (!std::isfinite(analytic)) {
      throw ModelError(fmt::format("model '{}': callback {} returned a non-finite value at x = "
                                   "[{}]",
                                   model_.name, check.callback, fmt::join(x, ", ")));
    }
    if (!std::isfinite(fd)) {
      throw ModelError(fmt::format("model '{}': finite difference for {} is non-finite at x = "
                                   "[{}]",
                                   model_.name, check.callback, fmt::join(x, ", ")));
    }
    const double err = std::abs(analytic - fd) / (std::abs(fd) + floor_ / tol_);
    check.max_error = std::max(check.max_error, err);
    if (std::abs(analytic - fd) > tol_ * std::abs(fd) + floor_) check.passed = false;
  }

 private:
  const SystemModel& model_;
  double tol_;
  double floor_;
};

template <class F>
Vec central_difference(F&& fn, const Vec& x, int i, double h) {
  Vec xp = x, xm = x;
  xp[i] += h;
  xm[i] -= h;
  return (fn(xp) - fn(xm)) / (2.0 * h);
}

}  // namespace

ValidationReport validate_derivatives(const SystemModel& model, std::span<const Vec> points,
                                      double step, double tolerance, double absolute_floor) {
  if (!(step > 0.0)) throw ModelError("validate_derivatives: step must be positive");

  ValidationReport report;
  report.tolerance = tolerance;
  report.absolute_floor = absolute_floor;
  CallbackCheck jac{"drift_jacobian_transpose_apply"}, div{"drift_divergence"},
      divgrad{"drift_divergence_gradient"}, sgrad{"diffusion_gradient"},
      shess{"diffusion_hessian_apply"}, slap{"diffusion_laplacian"};
  const Comparator cmp(model, tolerance, absolute_floor);
  const int m = model.dim;

  auto drift = [&](const Vec& y) { return model.drift(y); };
  auto divergence = [&](const Vec& y) { return Vec::Constant(1, model.drift_divergence(y)); };
  auto sigma = [&](const Vec& y) { return Vec::Constant(1, model.diffusion(y)); };
  auto sigma_grad = [&](const Vec& y) { return model.diffusion_gradient(y); };

  for (const Vec& x : points) {
    if (x.size() != m || !x.allFinite()) {
      throw ModelError("validate_derivatives: points must be finite and match the model dim");
    }
    const Mat analytic_jac = model.drift_jacobian(x);
    const Mat analytic_hess = model.diffusion_hessian(x);
    const Vec analytic_divgrad = model.drift_divergence_gradient(x);
    const Vec analytic_sgrad = model.diffusion_gradient(x);
    double fd_trace_jac = 0.0;
    double fd_trace_hess = 0.0;
    for (int j = 0; j < m; ++j) {
      const Vec dF = central_difference(drift, x, j, step);  // column j of grad F
      for (int i = 0; i < m; ++i) cmp.compare(jac, analytic_jac(i, j), dF[i], x);
      fd_trace_jac += dF[j];

      cmp.compare(divgrad, analytic_divgrad[j], central_difference(divergence, x, j, step)[0], x);
      cmp.compare(sgrad, analytic_sgrad[j], central_difference(sigma, x, j, step)[0], x);

      const Vec dgrad = central_difference(sigma_grad, x, j, step);  // column j of Hess
      for (int i = 0; i < m; ++i) cmp.compare(shess, analytic_hess(i, j), dgrad[i], x);
      fd_trace_hess += dgrad[j];
    }
    cmp.compare(div, model.drift_divergence(x), fd_trace_jac, x);
    cmp.compare(slap, model.diffusion_laplacian(x), fd_trace_hess, x);
  }
  report.checks = {jac, div, divgrad, sgrad, shess, slap};
  return report;
}

}  // namespace divker
