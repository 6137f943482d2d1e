#include "divker/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "divker/discrete_scores.hpp"
#include "divker/errors.hpp"

namespace divker {

namespace {

Vec scalar(double x) { return Vec::Constant(1, x); }

double trapezoid_factor(std::size_t i, std::size_t n) {
  return (i == 0 || i + 1 == n) ? 0.5 : 1.0;
}

/// The propagation hot loop evaluates the Gaussian in closed form; make sure
/// the kernel really is one.
void require_gaussian(const NoiseKernel& kernel) {
  if (kernel.dim != 1) throw OracleError("oracle propagation is one-dimensional");
  const double var = kernel.variance;
  for (double u : {0.0, 0.7, -1.3}) {
    const double u_scaled = u * std::sqrt(var);
    const double expect =
        std::exp(-0.5 * u_scaled * u_scaled / var) / std::sqrt(2.0 * std::numbers::pi * var);
    const double got = kernel.density(scalar(u_scaled));
    if (std::abs(got - expect) > 1e-12 * expect) {
      throw OracleError("oracle propagation needs a Gaussian noise kernel");
    }
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// One Chapman-Kolmogorov step from `weights` (already multiplied by the
/// trapezoid factor and spacing) at the source nodes onto the grid of `out`.
void scatter(const GridDensity& src, const std::vector<double>& weights,
             const DiscreteChain& chain, double kernel_var, const PropagationOptions& opts,
             GridDensity& out, int step_index) {
  const std::size_t n = out.size();
  std::fill(out.values.begin(), out.values.end(), 0.0);
  const double lo = out.lo;
  const double hi = out.hi();
  double leak = 0.0;
  for (std::size_t j = 0; j < src.size(); ++j) {
    const double wj = weights[j];
    if (wj == 0.0) continue;
    const Vec y = scalar(src.node(j));
    const double fy = chain.map(y)[0];
    const double sy = chain.checked_diffusion(y);
    const double sd = sy * std::sqrt(kernel_var);
    const double norm = wj / (sd * std::sqrt(2.0 * std::numbers::pi));
    leak += wj * (normal_cdf((lo - fy) / sd) + normal_cdf((fy - hi) / sd));

    const double reach = opts.window_sigmas * sd;
    const double first = std::ceil((fy - reach - lo) / out.step);
    const double last = std::floor((fy + reach - lo) / out.step);
    if (last < 0.0 || first > static_cast<double>(n - 1)) continue;
    const std::size_t i0 = first < 0.0 ? 0 : static_cast<std::size_t>(first);
    const std::size_t i1 = std::min(n - 1, static_cast<std::size_t>(last));
    const double inv2var = 0.5 / (sd * sd);
    for (std::size_t i = i0; i <= i1; ++i) {
      const double d = out.node(i) - fy;
      out.values[i] += norm * std::exp(-d * d * inv2var);
    }
  }
  if (leak > opts.max_boundary_leak) {
    throw OracleError(fmt::format(
        "step {}: {:.3g} of the mass leaves the grid [{}, {}]; widen the grid", step_index, leak,
        lo, hi));
  }
}

std::vector<double> source_weights(const GridDensity& h) {
  std::vector<double> w(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    double v = h.values[j];
    if (v < 0.0) {
      if (v < -1e-12) fmt::print(stderr, "warning: clamping negative density {} at node {}\n", v, j);
      v = 0.0;
    }
    w[j] = v * trapezoid_factor(j, h.size()) * h.step;
  }
  return w;
}

}  // namespace

double GridDensity::mass() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += values[i] * trapezoid_factor(i, size());
  return s * step;
}

double GridDensity::at(double x) const {
  if (size() < 2 || x < lo || x > hi()) return 0.0;
  const double u = (x - lo) / step;
  const std::size_t i = std::min(size() - 2, static_cast<std::size_t>(u));
  const double t = u - static_cast<double>(i);
  return (1.0 - t) * values[i] + t * values[i + 1];
}

GridDensity GridDensity::from_function(double lo, double hi, double step,
                                       const std::function<double(double)>& h) {
  if (!(step > 0.0) || !(hi > lo)) throw OracleError("grid needs lo < hi and step > 0");
  const double cells = (hi - lo) / step;
  if (std::abs(cells - std::round(cells)) > 1e-9 * std::max(1.0, cells)) {
    throw OracleError(fmt::format("grid width {} is not a multiple of the step {}", hi - lo, step));
  }
  GridDensity g;
  g.lo = lo;
  g.step = step;
  const std::size_t n = static_cast<std::size_t>(std::llround(cells)) + 1;
  g.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.values[i] = h(g.node(i));
  return g;
}

GridDensity GridDensity::gaussian(double lo, double hi, double step, double mean,
                                  double variance) {
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  return from_function(lo, hi, step, [=](double x) {
    return c * std::exp(-0.5 * (x - mean) * (x - mean) / variance);
  });
}

GridDensity propagate_density(const GridDensity& h0, const DiscreteChain& chain,
                              const NoiseKernel& kernel, int n_steps,
                              const PropagationOptions& opts) {
  require_gaussian(kernel);
  if (chain.dim != 1) throw OracleError("oracle propagation is one-dimensional");
  if (n_steps < 0) throw OracleError("negative step count");
  GridDensity cur = h0;
  GridDensity next = h0;
  for (int n = 0; n < n_steps; ++n) {
    scatter(cur, source_weights(cur), chain, kernel.variance, opts, next, n);
    std::swap(cur, next);
  }
  return cur;
}

GridDensity propagate_point_mass(double x0, double lo, double hi, double step,
                                 const DiscreteChain& chain, const NoiseKernel& kernel,
                                 int n_steps, const PropagationOptions& opts) {
  require_gaussian(kernel);
  if (n_steps < 1) throw OracleError("a point mass has no density before the first step");
  const Vec y = scalar(x0);
  GridDensity h1 = GridDensity::from_function(
      lo, hi, step, [&](double x) { return transition_density(chain, kernel, y, scalar(x)); });
  const double fy = chain.map(y)[0];
  const double sd = chain.checked_diffusion(y) * std::sqrt(kernel.variance);
  const double leak = normal_cdf((lo - fy) / sd) + normal_cdf((fy - hi) / sd);
  if (leak > opts.max_boundary_leak) {
    throw OracleError(fmt::format("step 0: {:.3g} of the mass leaves the grid; widen the grid",
                                  leak));
  }
  return propagate_density(h1, chain, kernel, n_steps - 1, opts);
}

double grid_score(const GridDensity& h, double x) {
  const double u = (x - h.lo) / h.step;
  if (!(u >= 2.0) || !(u <= static_cast<double>(h.size()) - 3.0)) {
    throw OracleError(fmt::format("x = {} is not two nodes inside the grid [{}, {}]", x, h.lo,
                                  h.hi()));
  }
  const std::size_t i = std::min(h.size() - 4, static_cast<std::size_t>(u));
  for (std::size_t k = i - 1; k <= i + 2; ++k) {
    if (!(h.values[k] > 1e-300)) {
      throw OracleError(fmt::format("density underflow near x = {}", x));
    }
  }
  auto central = [&](std::size_t k) {
    return (std::log(h.values[k + 1]) - std::log(h.values[k - 1])) / (2.0 * h.step);
  };
  const double t = u - static_cast<double>(i);
  return (1.0 - t) * central(i) + t * central(i + 1);
}

double grid_bin_score(const GridDensity& h, double a, double b) {
  if (!(a < b) || a < h.lo || b > h.hi()) {
    throw OracleError(fmt::format("bin [{}, {}] is not inside the grid", a, b));
  }
  // exact integral of the piecewise-linear interpolant
  double mass = 0.0;
  double x = a;
  while (x < b) {
    const double cell_end =
        h.lo + (std::floor((x - h.lo) / h.step + 1e-12) + 1.0) * h.step;
    const double e = std::min(b, cell_end);
    mass += 0.5 * (h.at(x) + h.at(e)) * (e - x);
    x = e;
  }
  if (!(mass > 0.0)) throw OracleError("bin carries no mass");
  return (h.at(b) - h.at(a)) / mass;
}

double ou_terminal_variance(double a, double sigma, double s0_sq, double T) {
  if (std::abs(a * T) < 1e-8) return s0_sq + sigma * sigma * T;
  const double decay = std::exp(-2.0 * a * T);
  return s0_sq * decay + sigma * sigma * (1.0 - decay) / (2.0 * a);
}

double ou_analytic_score(double a, double sigma, double s0_sq, double T, double x) {
  return -x / ou_terminal_variance(a, sigma, s0_sq, T);
}

Vec quadrature_conditional_expectation(
    const DiscreteChain& chain, const NoiseKernel& kernel, const GridDensity& h0,
    const std::function<Vec(double x0, double x1)>& weight, double x1) {
  if (chain.dim != 1) throw OracleError("quadrature conditional expectation is one-dimensional");
  const Vec y1 = scalar(x1);
  std::vector<double> wts(h0.size());
  double max_w = 0.0;
  for (std::size_t j = 0; j < h0.size(); ++j) {
    const double v = h0.values[j];
    wts[j] = v > 0.0 ? v * trapezoid_factor(j, h0.size()) *
                           transition_density(chain, kernel, scalar(h0.node(j)), y1)
                     : 0.0;
    max_w = std::max(max_w, wts[j]);
  }
  if (!(max_w > 1e-300)) {
    throw OracleError(fmt::format("x1 = {} has negligible density", x1));
  }
  double den = 0.0;
  Vec num;
  for (std::size_t j = 0; j < h0.size(); ++j) {
    if (wts[j] < 1e-30 * max_w) continue;
    const Vec wv = weight(h0.node(j), x1);
    if (num.size() == 0) num = Vec::Zero(wv.size());
    num += wts[j] * wv;
    den += wts[j];
  }
  return num / den;
}

void write_oracle_csv(std::ostream& out, const GridDensity& h) {
  out << "node,density,score\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < h.size(); ++i) {
    double s = nan;
    if (i >= 2 && i + 3 <= h.size() && h.values[i - 1] > 1e-300 && h.values[i + 1] > 1e-300) {
      s = (std::log(h.values[i + 1]) - std::log(h.values[i - 1])) / (2.0 * h.step);
    }
    fmt::print(out, "{:.17g},{:.17g},{:.17g}\n", h.node(i), h.values[i], s);
  }
}

}  // namespace divker
