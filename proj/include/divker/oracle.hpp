#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "divker/paths.hpp"
#include "divker/types.hpp"

namespace divker {

/// Density on the uniform nodes lo, lo + step, ..., lo + (n-1) step.
struct GridDensity {
  double lo = 0.0;
  double step = 1e-3;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double node(std::size_t i) const { return lo + static_cast<double>(i) * step; }
  double hi() const { return node(size() - 1); }
  /// Trapezoid mass.
  double mass() const;
  /// Piecewise-linear interpolant; zero outside the grid.
  double at(double x) const;

  /// Nodes covering [lo, hi]; hi - lo must be a multiple of step to 1e-9.
  static GridDensity from_function(double lo, double hi, double step,
                                   const std::function<double(double)>& h);
  static GridDensity gaussian(double lo, double hi, double step, double mean, double variance);
};

struct PropagationOptions {
  /// Outputs farther than this many kernel standard deviations from f(y)
  /// are skipped.
  double window_sigmas = 12.0;
  /// Largest mass allowed to leave the grid in one step.
  double max_boundary_leak = 1e-8;
};

/// h_{n+1}(x) = int h_n(y) p(y, x) dy by trapezoid quadrature on h0's grid.
/// The leak estimate assumes a Gaussian kernel.
GridDensity propagate_density(const GridDensity& h0, const DiscreteChain& chain,
                              const NoiseKernel& kernel, int n_steps,
                              const PropagationOptions& opts = {});

/// Point mass at x0: the first step evaluates p(x0, .) on the grid exactly,
/// the remaining n_steps - 1 steps propagate by quadrature.
GridDensity propagate_point_mass(double x0, double lo, double hi, double step,
                                 const DiscreteChain& chain, const NoiseKernel& kernel,
                                 int n_steps, const PropagationOptions& opts = {});

/// Central difference of log h at the two nodes bracketing x, linearly
/// interpolated. x must be at least two nodes inside the grid.
double grid_score(const GridDensity& h, double x);

/// Score averaged over [a, b] against h: (h(b) - h(a)) / int_a^b h.
double grid_bin_score(const GridDensity& h, double a, double b);

/// -x / s_T^2 for dx = -a x dt + sigma dB started from N(0, s0_sq).
double ou_terminal_variance(double a, double sigma, double s0_sq, double T);
double ou_analytic_score(double a, double sigma, double s0_sq, double T, double x);

/// E[w(x0, x1) | x1] = int w h0 p dx0 / int h0 p dx0 by trapezoid quadrature
/// over h0's nodes. Nodes whose weight is below 1e-30 of the largest one
/// are skipped, so w is never evaluated where it cannot matter.
Vec quadrature_conditional_expectation(
    const DiscreteChain& chain, const NoiseKernel& kernel, const GridDensity& h0,
    const std::function<Vec(double x0, double x1)>& weight, double x1);

/// Rows "node,density,score"; score is NaN within two nodes of the edges.
void write_oracle_csv(std::ostream& out, const GridDensity& h);

}  // namespace divker
