#include "doctest.h"

#include <cmath>

#include "divker/discrete_scores.hpp"
#include "divker/errors.hpp"
#include "divker/identities.hpp"
#include "divker/model.hpp"
#include "divker/oracle.hpp"

using namespace divker;

namespace {
Vec s(double x) { return Vec::Constant(1, x); }

DiscreteChain linear_chain(double slope, bool bump) {
  ScalarChainSpec spec{[=](double x) { return slope * x; }, [=](double) { return slope; },
                       [](double) { return 0.0; },
                       [](double) { return 1.0; },
                       [](double) { return 0.0; },
                       [](double) { return 0.0; },
                       true};
  if (bump) {
    spec.sigma = [](double x) { return 0.5 + std::exp(-x * x); };
    spec.dsigma = [](double x) { return -2.0 * x * std::exp(-x * x); };
    spec.d2sigma = [](double x) { return (4 * x * x - 2) * std::exp(-x * x); };
    spec.is_additive = false;
  }
  return scalar_chain(spec);
}
}  // namespace

TEST_CASE("transition density") {
  const DiscreteChain c = linear_chain(0.0, false);
  const NoiseKernel k = NoiseKernel::gaussian(1, 1.0);
  CHECK(transition_density(c, k, s(0), s(0)) == doctest::Approx(0.39894228));
  ScalarChainSpec two{[](double) { return 0.0; }, [](double) { return 0.0; },
                      [](double) { return 0.0; }, [](double) { return 2.0; },
                      [](double) { return 0.0; }, [](double) { return 0.0; }, true};
  CHECK(transition_density(scalar_chain(two), k, s(0), s(0)) ==
        doctest::Approx(0.39894228 / 2));
}

TEST_CASE("exact step geometry of the Euler bump step") {
  const DiscreteChain c = euler_chain(cubic_model(CubicNoise::bump), 0.002);
  // x = 1: f' = 1 - 3 dt = 0.994 with b = 0
  const StepGeometry g = step_geometry_exact(c, s(1.0), s(0.0));
  CHECK(g.jacobian(0, 0) == doctest::Approx(0.994));
  CHECK(g.div_jacobian[0] == doctest::Approx(-0.0120724).epsilon(1e-5));
  // x = 0: f'' = 0, sigma'' = -2, sigma' = 0, so div = -2b / 1
  const StepGeometry g0 = step_geometry_exact(c, s(0.0), s(0.1));
  CHECK(g0.div_jacobian[0] == doctest::Approx(-0.2));
}

TEST_CASE("generic geometry agrees with the closed form") {
  const DiscreteChain c = euler_chain(cubic_model(CubicNoise::bump), 0.01);
  for (double x : {-1.3, 0.2, 0.9}) {
    for (double b : {-0.2, 0.05}) {
      const StepGeometry e = step_geometry_exact(c, s(x), s(b));
      const StepGeometry g = step_geometry_generic(c, s(x), s(b), 1e-5);
      CHECK(g.jacobian(0, 0) == doctest::Approx(e.jacobian(0, 0)).epsilon(1e-12));
      CHECK(g.div_jacobian[0] == doctest::Approx(e.div_jacobian[0]).epsilon(1e-6));
    }
  }
}

TEST_CASE("generic geometry in several dimensions") {
  const SystemModel l96 = lorenz96_model(5);
  const DiscreteChain c = euler_chain(l96, 0.01);
  const Vec x = Vec::LinSpaced(5, -1.0, 2.0);
  const Vec b = Vec::Constant(5, 0.05);
  const StepGeometry g = step_geometry_generic(c, x, b, 1e-5);
  const Vec nu = Vec::LinSpaced(5, 1.0, 3.0);
  const Vec w = pullback_inverse_apply(g, nu);
  CHECK((g.jacobian.transpose() * w - nu).norm() <= 1e-12);
  // log|det| gradient by a one-sided check along a random direction
  const Vec d = Vec::LinSpaced(5, 0.3, -0.2);
  auto logdet = [&](const Vec& y) {
    Mat J = c.map_jacobian(y);
    J += b * c.diffusion_gradient(y).transpose();
    return std::log(std::abs(J.determinant()));
  };
  const double h = 1e-6;
  const double fd = (logdet(x + h * d) - logdet(x - h * d)) / (2 * h);
  CHECK(g.div_jacobian.dot(d) == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("singular step is reported") {
  const DiscreteChain c = linear_chain(0.0, false);
  CHECK_THROWS_AS(step_geometry_exact(c, s(0.3), s(0.1)), SingularStep);
}

TEST_CASE("one-step terms") {
  const DiscreteChain c = linear_chain(0.9, false);
  const NoiseKernel k = NoiseKernel::gaussian(1, 1.0);
  // b = (x1 - 0.9 x0) / 1 = 0.25 at x0 = 1, x1 = 1.15: kernel term -0.25
  CHECK(one_step_kernel_score_term(c, k, s(1.0), s(1.15))[0] == doctest::Approx(-0.25));
  // additive linear step: divergence term is score / f'
  CHECK(one_step_divergence_term(c, s(1.0), s(1.15), s(-1.0))[0] ==
        doctest::Approx(-1.0 / 0.9));
  CHECK(one_step_divker_term(c, k, s(1.0), s(1.15), s(-1.0), 0.3)[0] ==
        doctest::Approx(0.3 * -0.25 + 0.7 * (-1.0 / 0.9)));
}

TEST_CASE("one-step conditional expectation against the Gaussian convolution") {
  const DiscreteChain c = linear_chain(0.9, false);
  const NoiseKernel k = NoiseKernel::gaussian(1, 1.0);
  const GridDensity h0 = GridDensity::gaussian(-8, 8, 1e-3, 0.0, 1.0);
  auto kernel = [&](double x0, double x1) { return one_step_kernel_score_term(c, k, s(x0), s(x1)); };
  auto div = [&](double x0, double x1) {
    return one_step_divergence_term(c, s(x0), s(x1), s(-x0));
  };
  const double truth = -1.0 / 1.81;
  CHECK(quadrature_conditional_expectation(c, k, h0, kernel, 1.0)[0] ==
        doctest::Approx(truth).epsilon(1e-9));
  CHECK(quadrature_conditional_expectation(c, k, h0, div, 1.0)[0] ==
        doctest::Approx(truth).epsilon(1e-9));
  CHECK(truth == doctest::Approx(-0.55249).epsilon(1e-5));
}

TEST_CASE("kernel and divergence one-step integrands differ pathwise but agree in mean") {
  const auto benches = one_step_benchmarks();
  const auto& bump = benches[3];
  const double a = one_step_kernel_score_term(bump.chain, bump.kernel, s(0.4), s(0.5))[0];
  const double b = one_step_divergence_term(bump.chain, s(0.4), s(0.5), s(-0.4))[0];
  CHECK(std::abs(a - b) > 1.0);
  const std::vector<double> pts{-1.0, 0.3};
  CHECK(one_step_residual(bump, OneStepEstimator::kernel, 0, pts) < 1e-4);
  CHECK(one_step_residual(bump, OneStepEstimator::divergence, 0, pts) < 1e-4);
}

TEST_CASE("N-step recursions on a point-mass start") {
  // x0 = 1, f = 0.9x, sigma = 1, kernel variance 1, N = 2: h_2 = N(0.81, 1.81)
  const DiscreteChain c = linear_chain(0.9, false);
  const NoiseKernel k = NoiseKernel::gaussian(1, 1.0);
  const GridDensity h2 = propagate_point_mass(1.0, -10, 12, 2e-3, c, k, 2);
  CHECK(grid_score(h2, 1.0) == doctest::Approx(-0.10497).epsilon(1e-4));
  // The no-h0 covector is linear in (b0, b1); with x2 = 0.81 + 0.9 b0 + b1
  // jointly Gaussian, E[nu | x2] = Cov(nu, x2) / Var(x2) * (x2 - 0.81).
  auto nu_for = [&](double b0, double b1) {
    PathRecord p;
    p.states = {s(1.0), s(0.9 + b0), s(0.81 + 0.9 * b0 + b1)};
    p.increments = {s(b0), s(b1)};
    return nstep_divker_noh0(p, c, k).nu[0];
  };
  const double c0 = nu_for(1, 0), c1 = nu_for(0, 1);
  CHECK(nu_for(0.3, -0.7) == doctest::Approx(0.3 * c0 - 0.7 * c1));
  const double cond = (0.9 * c0 + c1) / 1.81 * (1.0 - 0.81);
  CHECK(cond == doctest::Approx(grid_score(h2, 1.0)).epsilon(1e-4));
}

TEST_CASE("kernel N-step formula") {
  const DiscreteChain c = linear_chain(0.9, false);
  const NoiseKernel k = NoiseKernel::gaussian(1, 1.0);
  const InitialDistribution init = InitialDistribution::gaussian(1, 0.0, 1.0);
  const PathRecord p = simulate_discrete_path(c, k, init, 3, 8, 1);
  // beta = (1, 1, 1, 1): the telescoping kernel terms reduce to the last step
  const Vec one = nstep_kernel_score(p, c, k, Schedule::constant(1.0), init.score);
  const double x0 = p.states[0][0];
  const double expect = -x0 + (-p.increments[0][0] + 0.9 * p.increments[0][0]) +
                        (-p.increments[1][0] + 0.9 * p.increments[1][0]) +
                        (-p.increments[2][0] + 0.9 * p.increments[2][0]);
  CHECK(one[0] == doctest::Approx(expect));
  CHECK_THROWS_AS(nstep_kernel_score(p, c, k, Schedule::constant(0.5), init.score), ScheduleError);
  const DiscreteChain mult = linear_chain(0.9, true);
  CHECK_THROWS_AS(nstep_kernel_score(p, mult, k, Schedule::constant(1.0), init.score),
                  UnsupportedEstimator);
}

TEST_CASE("explosion cap") {
  CHECK_NOTHROW(check_covector(s(10.0), 3, 1e12));
  CHECK_THROWS_AS(check_covector(s(2e12), 3, 1e12), CovectorExplosion);
  CHECK_THROWS_AS(check_covector(s(NAN), 3, 1e12), CovectorExplosion);
  try {
    check_covector(s(5.0), 7, 1.0);
  } catch (const CovectorExplosion& e) {
    CHECK(e.step() == 7);
    CHECK(e.norm() == 5.0);
  }
}
