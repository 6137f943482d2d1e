#include "divker/identities.hpp"

#include <cmath>

#include <fmt/format.h>

#include "divker/discrete_scores.hpp"
#include "divker/model.hpp"
#include "divker/oracle.hpp"
#include "divker/schedules.hpp"
#include "divker/sde_scores.hpp"

namespace divker {

namespace {

Vec scalar(double x) { return Vec::Constant(1, x); }

double bump(double x) { return 0.5 + std::exp(-x * x); }
double bump_d(double x) { return -2.0 * x * std::exp(-x * x); }
double bump_dd(double x) { return (4.0 * x * x - 2.0) * std::exp(-x * x); }

std::vector<double> test_points() {
  std::vector<double> p(11);
  for (int i = 0; i < 11; ++i) p[i] = -1.8 + 0.36 * i;
  return p;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double rel_diff(const Vec& a, const Vec& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

struct ChainFixture {
  SystemModel model = cubic_model(CubicNoise::bump);
  double dt = 0.01;
  int steps = 100;
  DiscreteChain chain = euler_chain(model, dt);
  NoiseKernel kernel = NoiseKernel::gaussian(1, dt);
  InitialDistribution init = InitialDistribution::gaussian(1, 0.0, 1.0);

  PathRecord path(std::uint64_t seed, std::uint64_t id) const {
    return simulate_discrete_path(chain, kernel, init, steps, seed, id);
  }
};

}  // namespace

bool IdentitySuite::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed && !c.informational) return false;
  }
  return true;
}

std::vector<OneStepBenchmark> one_step_benchmarks(double dt) {
  std::vector<OneStepBenchmark> out;
  ScalarChainSpec linear_unit{[](double x) { return 0.9 * x; }, [](double) { return 0.9; },
                              [](double) { return 0.0; },       [](double) { return 1.0; },
                              [](double) { return 0.0; },       [](double) { return 0.0; },
                              true};
  out.push_back({"linear-unit", scalar_chain(linear_unit), NoiseKernel::gaussian(1, 1.0)});
  ScalarChainSpec linear_bump = linear_unit;
  linear_bump.sigma = bump;
  linear_bump.dsigma = bump_d;
  linear_bump.d2sigma = bump_dd;
  linear_bump.is_additive = false;
  out.push_back({"linear-bump", scalar_chain(linear_bump), NoiseKernel::gaussian(1, 0.01)});
  out.push_back({"cubic-unit", euler_chain(cubic_model(CubicNoise::unit), dt),
                 NoiseKernel::gaussian(1, dt)});
  out.push_back({"cubic-bump", euler_chain(cubic_model(CubicNoise::bump), dt),
                 NoiseKernel::gaussian(1, dt)});
  return out;
}

double one_step_residual(const OneStepBenchmark& bench, OneStepEstimator estimator,
                         double alpha, const std::vector<double>& points,
                         const OneStepGrid& grid) {
  const GridDensity h0 = GridDensity::gaussian(grid.lo, grid.hi, grid.spacing, 0.0, 1.0);
  const GridDensity h1 = propagate_density(h0, bench.chain, bench.kernel, 1);
  auto weight = [&](double x0, double x1) -> Vec {
    const Vec y0 = scalar(x0), y1 = scalar(x1), s0 = scalar(-x0);
    switch (estimator) {
      case OneStepEstimator::kernel:
        return one_step_kernel_score_term(bench.chain, bench.kernel, y0, y1);
      case OneStepEstimator::divergence:
        return one_step_divergence_term(bench.chain, y0, y1, s0);
      case OneStepEstimator::divker:
        return one_step_divker_term(bench.chain, bench.kernel, y0, y1, s0, alpha);
    }
    return Vec();
  };
  double worst = 0.0;
  for (double x1 : points) {
    const double est =
        quadrature_conditional_expectation(bench.chain, bench.kernel, h0, weight, x1)[0];
    worst = std::max(worst, std::abs(est - grid_score(h1, x1)));
  }
  return worst;
}

IdentitySuite one_step_identity_suite(double tolerance, const OneStepGrid& grid) {
  IdentitySuite suite;
  const auto points = test_points();
  struct Variant {
    std::string name;
    OneStepEstimator estimator;
    double alpha;
  };
  const std::vector<Variant> variants{{"kernel", OneStepEstimator::kernel, 0.0},
                                      {"divergence", OneStepEstimator::divergence, 0.0},
                                      {"divker(0)", OneStepEstimator::divker, 0.0},
                                      {"divker(0.3)", OneStepEstimator::divker, 0.3},
                                      {"divker(1)", OneStepEstimator::divker, 1.0}};
  for (const auto& bench : one_step_benchmarks()) {
    for (const auto& v : variants) {
      IdentityCheck c;
      c.name = fmt::format("one-step {} {}", bench.name, v.name);
      c.tolerance = tolerance;
      c.value = one_step_residual(bench, v.estimator, v.alpha, points, grid);
      c.passed = c.value <= tolerance;
      c.detail = "max |E[w|x1] - grad log h1| over 11 points";
      suite.checks.push_back(std::move(c));
    }
  }
  return suite;
}

IdentityCheck check_divker_alpha_zero(std::size_t n_paths, std::uint64_t seed) {
  const ChainFixture fx;
  const Schedule zero = Schedule::constant(0.0);
  double worst = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    const PathRecord path = fx.path(seed, p);
    const Vec a = nstep_divker_forward(path, fx.chain, fx.kernel, zero, fx.init.score).nu;
    const Vec b = nstep_divergence_score(path, fx.chain, fx.kernel, fx.init.score).nu;
    worst = std::max(worst, rel_diff(a, b));
  }
  return {"alpha = 0 divergence-kernel equals divergence", worst, 1e-12, worst <= 1e-12,
          fmt::format("{} paths, {} steps", n_paths, fx.steps)};
}

IdentityCheck check_divker_alpha_one(std::size_t n_paths, std::uint64_t seed) {
  const ChainFixture fx;
  const Schedule one = Schedule::constant(1.0);
  double worst = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    const PathRecord path = fx.path(seed, p);
    const Vec a = nstep_divker_forward(path, fx.chain, fx.kernel, one, fx.init.score).nu;
    const std::size_t n = path.steps();
    const Vec b = fx.kernel.log_density_gradient(path.increments[n - 1]) /
                  fx.chain.checked_diffusion(path.states[n - 1]);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return {"alpha = 1 divergence-kernel equals last-step kernel term", worst, 0.0, worst == 0.0,
          fmt::format("{} paths, exact comparison", n_paths)};
}

IdentityCheck check_reciprocal_step_noh0(std::size_t n_paths, std::uint64_t seed) {
  const ChainFixture fx;
  const Schedule recip = Schedule::reciprocal_step();
  const double N = fx.steps;
  double worst = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    const PathRecord path = fx.path(seed, p);
    std::vector<Vec> primed, plain;
    CovectorOptions o1, o2;
    o1.trace = &primed;
    o2.trace = &plain;
    nstep_divker_forward(path, fx.chain, fx.kernel, recip, fx.init.score, o1);
    nstep_divker_noh0(path, fx.chain, fx.kernel, o2);
    for (std::size_t n = 1; n < plain.size(); ++n) {
      worst = std::max(worst, rel_diff((n / N) * primed[n], plain[n]));
    }
  }
  return {"alpha = 1/n scaled by n/N equals the no-h0 recursion", worst, 1e-10, worst <= 1e-10,
          fmt::format("{} paths, every step", n_paths)};
}

IdentityCheck check_reciprocal_time_noh0(const SystemModel& model, std::size_t n_paths,
                                         std::uint64_t seed, double total_time, double dt) {
  const auto init = InitialDistribution::gaussian(model.dim, 0.0, 1.0);
  const SimulationPlan plan = SimulationPlan::from_step(total_time, dt, n_paths, seed);
  const Schedule recip = Schedule::reciprocal_time();
  const double tol = 2.0 * std::sqrt(dt);
  const double N = plan.steps;
  double worst = 0.0;
  std::size_t within = 0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    const PathRecord path = simulate_sde_path(model, init, plan, p);
    std::vector<Vec> primed, plain;
    CovectorOptions o1, o2;
    o1.trace = &primed;
    o2.trace = &plain;
    drive_covector(path, model, SdeStepper::divker, &recip, init.score, o1);
    drive_covector(path, model, SdeStepper::divker_noh0, nullptr, {}, o2);
    double path_worst = 0.0;
    for (std::size_t n = 1; n < plain.size(); ++n) {
      path_worst = std::max(path_worst, ((n / N) * primed[n] - plain[n]).norm());
    }
    worst = std::max(worst, path_worst);
    if (path_worst <= tol) ++within;
  }
  return {fmt::format("alpha = 1/t SDE scaled by t/T equals the no-h0 SDE ({})", model.name),
          worst, tol, worst <= tol,
          fmt::format("{}/{} paths within, T = {}, dt = {}", within, n_paths, total_time, dt)};
}

OrderResult approximation_order(const std::vector<double>& dts, std::size_t n_draws,
                                std::uint64_t seed) {
  const SystemModel model = cubic_model(CubicNoise::bump);
  OrderResult r;
  r.dts = dts;
  for (std::size_t k = 0; k < dts.size(); ++k) {
    const double dt = dts[k];
    const DiscreteChain chain = euler_chain(model, dt);
    double e_div = 0.0, e_pull = 0.0;
    for (std::size_t d = 0; d < n_draws; ++d) {
      GaussianStream g(seed, d, static_cast<std::uint32_t>(k));
      const Vec x = scalar(g.normal());
      const Vec dB = scalar(std::sqrt(dt) * g.normal());
      const StepGeometry exact = step_geometry_exact(chain, x, dB);
      const SdeStepTerms approx = sde_step_terms(model, x, dB, dt);
      e_div += std::abs(exact.div_jacobian[0] - approx.approx_div_jacobian[0]);
      const Vec one = scalar(1.0);
      e_pull += std::abs(pullback_inverse_apply(exact, one)[0] -
                         approx.approx_pullback_inverse_apply(one)[0]);
    }
    r.div_error.push_back(e_div / n_draws);
    r.pullback_error.push_back(e_pull / n_draws);
  }
  r.div_slope = least_squares_slope(r.dts, r.div_error);
  r.pullback_slope = least_squares_slope(r.dts, r.pullback_error);
  return r;
}

IdentitySuite full_identity_suite() {
  IdentitySuite suite = one_step_identity_suite();
  suite.checks.push_back(check_divker_alpha_zero(50, 11));
  suite.checks.push_back(check_divker_alpha_one(50, 12));
  suite.checks.push_back(check_reciprocal_step_noh0(50, 13));
  suite.checks.push_back(check_reciprocal_time_noh0(linear_ou_model(1.0, 1.0), 50, 14));
  IdentityCheck cubic = check_reciprocal_time_noh0(cubic_model(CubicNoise::bump), 50, 14);
  cubic.informational = true;
  suite.checks.push_back(std::move(cubic));
  const OrderResult order = approximation_order({1e-2, 1e-3, 1e-4}, 10000, 15);
  suite.checks.push_back({"order of approximate div g_*", order.div_slope, 0.9,
                          order.div_slope >= 0.9, "log-log slope over dt = 1e-2, 1e-3, 1e-4"});
  suite.checks.push_back({"order of approximate g^{*-1}", order.pullback_slope, 0.9,
                          order.pullback_slope >= 0.9,
                          "log-log slope over dt = 1e-2, 1e-3, 1e-4"});
  return suite;
}

}  // namespace divker
