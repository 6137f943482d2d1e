#include "doctest.h"

#include <cmath>
#include <sstream>

#include "divker/errors.hpp"
#include "divker/model.hpp"
#include "divker/oracle.hpp"
#include "divker/paths.hpp"

using namespace divker;

namespace {
DiscreteChain affine(double slope, double sigma) {
  return scalar_chain({[=](double x) { return slope * x; }, [=](double) { return slope; },
                       [](double) { return 0.0; }, [=](double) { return sigma; },
                       [](double) { return 0.0; }, [](double) { return 0.0; }, true});
}
}  // namespace

TEST_CASE("grid density basics") {
  const GridDensity g = GridDensity::gaussian(-8, 8, 1e-3, 0.0, 1.0);
  CHECK(g.size() == 16001);
  CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.at(0.0) == doctest::Approx(0.39894228));
  CHECK(g.at(20.0) == 0.0);
  CHECK_THROWS_AS(GridDensity::from_function(0, 1, 0.3, [](double) { return 1.0; }), OracleError);
}

TEST_CASE("one Gaussian convolution") {
  // f = x, sigma = 1, variance 1: h1 = N(0, 2)
  const GridDensity h0 = GridDensity::gaussian(-10, 10, 1e-3, 0.0, 1.0);
  const GridDensity h1 = propagate_density(h0, affine(1.0, 1.0), NoiseKernel::gaussian(1, 1.0), 1);
  CHECK(grid_score(h1, 1.0) == doctest::Approx(-0.5).epsilon(2e-4));
  CHECK(std::abs(grid_score(h1, 0.0)) < 1e-9);
  CHECK(h1.mass() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(grid_score(h1, 9.999), OracleError);
  CHECK_THROWS_AS(grid_score(h1, -10.0), OracleError);
}

TEST_CASE("point mass through two linear steps") {
  const GridDensity h2 =
      propagate_point_mass(1.0, -10, 12, 1e-3, affine(0.9, 1.0), NoiseKernel::gaussian(1, 1.0), 2);
  CHECK(grid_score(h2, 1.0) == doctest::Approx(-(1 - 0.81) / 1.81).epsilon(1e-4));
  CHECK(grid_score(h2, 1.0) == doctest::Approx(-0.10497).epsilon(1e-4));
}

TEST_CASE("near-deterministic transport preserves mass") {
  const GridDensity h0 = GridDensity::gaussian(-8, 8, 1e-4, 0.0, 1.0);
  const GridDensity h1 =
      propagate_density(h0, affine(1.0, 1e-3), NoiseKernel::gaussian(1, 1.0), 1);
  CHECK(h1.mass() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(h1.at(0.5) == doctest::Approx(h0.at(0.5)).epsilon(1e-5));
}

TEST_CASE("boundary leak is refused") {
  const GridDensity h0 = GridDensity::gaussian(-3, 3, 1e-2, 0.0, 1.0);
  CHECK_THROWS_AS(propagate_density(h0, affine(1.0, 1.0), NoiseKernel::gaussian(1, 1.0), 1),
                  OracleError);
}

TEST_CASE("multi-step propagation of the linear OU matches its variance") {
  // Euler OU x' = (1 - a dt) x + sigma dB: s_{n+1}^2 = (1 - a dt)^2 s_n^2 + dt
  const double dt = 0.01;
  const int N = 100;
  const SystemModel ou = linear_ou_model(1.0, 1.0);
  const GridDensity h0 = GridDensity::gaussian(-6, 6, 0.005, 0.0, 1.0);
  const GridDensity hN = propagate_density(h0, euler_chain(ou, dt), NoiseKernel::gaussian(1, dt), N);
  double v = 1.0;
  for (int n = 0; n < N; ++n) v = (1 - dt) * (1 - dt) * v + dt;
  CHECK(grid_score(hN, 1.0) == doctest::Approx(-1.0 / v).epsilon(1e-4));
  // and the continuous-time variance within the Euler error
  CHECK(ou_terminal_variance(1, 1, 1, 1.0) == doctest::Approx(v).epsilon(1e-2));
}

TEST_CASE("analytic OU score") {
  CHECK(ou_terminal_variance(1, 1, 1, 3) == doctest::Approx(0.501239).epsilon(1e-6));
  CHECK(ou_analytic_score(1, 1, 1, 3, 1.0) == doctest::Approx(-1.99506).epsilon(1e-5));
  CHECK(ou_analytic_score(1, 1, 1, 3, 0.0) == 0.0);
  CHECK(ou_analytic_score(1, 1, 2, 0.0, 1.0) == doctest::Approx(-0.5));
  CHECK(ou_terminal_variance(0, 2, 1, 3) == doctest::Approx(13.0));
  CHECK(ou_terminal_variance(1e-12, 2, 1, 3) == doctest::Approx(13.0));
}

TEST_CASE("bin-averaged grid score") {
  const GridDensity h = GridDensity::gaussian(-6, 6, 1e-3, 0.0, 2.0);
  // -E[x | bin] / s^2, exactly (h(b) - h(a)) / P(bin) for a Gaussian
  const double a = 0.4, b = 0.8;
  const double pdf_a = h.at(a), pdf_b = h.at(b);
  const double mass = 0.5 * (std::erf(b / 2.0) - std::erf(a / 2.0));
  CHECK(grid_bin_score(h, a, b) == doctest::Approx((pdf_b - pdf_a) / mass).epsilon(1e-6));
  CHECK_THROWS_AS(grid_bin_score(h, 5.0, 7.0), OracleError);
}

TEST_CASE("conditional expectation of a constant") {
  const GridDensity h0 = GridDensity::gaussian(-8, 8, 1e-2, 0.0, 1.0);
  const DiscreteChain c = affine(0.9, 1.0);
  const Vec v = quadrature_conditional_expectation(
      c, NoiseKernel::gaussian(1, 1.0), h0, [](double, double) { return Vec::Constant(2, 3.5); },
      0.7);
  CHECK(v[0] == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(3.5).epsilon(1e-14));
}

TEST_CASE("oracle csv") {
  const GridDensity h = GridDensity::gaussian(-1, 1, 0.5, 0.0, 1.0);
  std::ostringstream out;
  write_oracle_csv(out, h);
  const std::string s = out.str();
  CHECK(s.rfind("node,density,score\n-1,", 0) == 0);
  CHECK(s.find("\n0,0.3989422804014327,0\n") != std::string::npos);
}
