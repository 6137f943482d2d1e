#include "doctest.h"

#include <cmath>
#include <sstream>

#include "divker/errors.hpp"
#include "divker/model.hpp"
#include "divker/paths.hpp"

using namespace divker;

TEST_CASE("plan from step") {
  const auto p = SimulationPlan::from_step(3.0, 0.002, 10, 1);
  CHECK(p.steps == 1500);
  CHECK(p.dt() == doctest::Approx(0.002));
  CHECK_THROWS_AS(SimulationPlan::from_step(1.0, 0.3, 10, 1), ModelError);
  CHECK_THROWS_AS(SimulationPlan::from_step(-1.0, 0.1, 10, 1), ModelError);
}

TEST_CASE("euler path reproduces its own increments") {
  const SystemModel m = cubic_model(CubicNoise::bump);
  const auto init = InitialDistribution::gaussian(1, 0.0, 1.0);
  const auto plan = SimulationPlan::from_step(0.5, 0.01, 1000000, 9);
  const PathRecord path = simulate_sde_path(m, init, plan, 4);
  REQUIRE(path.steps() == 50);
  REQUIRE(path.states.size() == 51);
  for (std::size_t n = 0; n < path.steps(); ++n) {
    const Vec& x = path.states[n];
    const Vec expect = x + m.drift(x) * plan.dt() + m.diffusion(x) * path.increments[n];
    CHECK((path.states[n + 1] - expect).norm() <= 1e-15);
  }
  // same address, same path
  const PathRecord again = simulate_sde_path(m, init, plan, 4);
  CHECK(again.terminal() == path.terminal());
  CHECK(simulate_sde_path(m, init, plan, 5).terminal() != path.terminal());
}

TEST_CASE("increments have variance dt") {
  const SystemModel m = linear_ou_model(1.0, 1.0);
  const auto init = InitialDistribution::point_mass(Vec::Zero(1));
  const auto plan = SimulationPlan::from_step(1.0, 0.01, 1000000, 2);
  double ss = 0.0;
  int count = 0;
  for (int p = 0; p < 200; ++p) {
    const PathRecord path = simulate_sde_path(m, init, plan, p);
    for (const Vec& b : path.increments) {
      ss += b.squaredNorm();
      ++count;
    }
  }
  CHECK(ss / count == doctest::Approx(0.01).epsilon(0.03));
}

TEST_CASE("a blow-up is recorded, not propagated") {
  SystemModel m = cubic_model(CubicNoise::unit);
  m.drift = [](const Vec& x) -> Vec { return 1e200 * x.array().cube().matrix(); };
  const auto init = InitialDistribution::point_mass(Vec::Constant(1, 2.0));
  const auto plan = SimulationPlan::from_step(1.0, 0.1, 1000000, 1);
  const PathRecord path = simulate_sde_path(m, init, plan, 0);
  CHECK(path.divergent());
}

TEST_CASE("discrete chain simulation and geometry") {
  const SystemModel m = cubic_model(CubicNoise::bump);
  const DiscreteChain c = euler_chain(m, 0.01);
  CHECK(c.has_exact_geometry());
  const Vec x = Vec::Constant(1, 0.7);
  CHECK(c.map(x)[0] == doctest::Approx(0.7 - 0.01 * 0.343));
  CHECK(c.map_second_derivative(0.7) == doctest::Approx(-0.01 * 6 * 0.7));
  const auto k = NoiseKernel::gaussian(1, 0.01);
  const auto init = InitialDistribution::gaussian(1, 0.0, 1.0);
  const PathRecord p = simulate_discrete_path(c, k, init, 20, 3, 0);
  for (std::size_t n = 0; n < p.steps(); ++n) {
    const Vec expect = c.map(p.states[n]) + c.diffusion(p.states[n]) * p.increments[n];
    CHECK((p.states[n + 1] - expect).norm() <= 1e-15);
  }
}

TEST_CASE("path dump layout") {
  const SystemModel m = linear_ou_model(1.0, 1.0, 2);
  const auto init = InitialDistribution::gaussian(2, 0.0, 1.0);
  const auto plan = SimulationPlan::from_step(0.02, 0.01, 1000000, 1);
  const PathRecord p = simulate_sde_path(m, init, plan, 3);
  std::ostringstream out;
  write_path_dump(out, std::span<const PathRecord>(&p, 1));
  std::istringstream in(out.str());
  std::string line;
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 4);  // header + 3 states
  CHECK(last.substr(0, 4) == "3,2,");
  CHECK(last.substr(last.size() - 2) == ",,");
}
