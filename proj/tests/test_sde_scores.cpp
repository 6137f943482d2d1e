#include "doctest.h"

#include <cmath>

#include "divker/errors.hpp"
#include "divker/model.hpp"
#include "divker/paths.hpp"
#include "divker/sde_scores.hpp"

using namespace divker;

namespace {
Vec s(double x) { return Vec::Constant(1, x); }

/// Dense-matrix form of the covector step, for cross-checking.
Vec dense_step(const SystemModel& m, const Vec& nu, const Vec& x, const Vec& dB, double dt,
               double alpha, double source, double kernel) {
  const Mat JF = m.drift_jacobian(x);
  const Vec gs = m.diffusion_gradient(x);
  const Mat H = m.diffusion_hessian(x);
  const Vec drift = (gs * gs.transpose() - JF.transpose() - alpha * Mat::Identity(m.dim, m.dim)) * nu +
                    source * (-m.drift_divergence_gradient(x) + H * gs + gs * m.diffusion_laplacian(x));
  const Vec noise = gs * nu.dot(dB) + source * H * dB + kernel * dB / m.diffusion(x);
  return nu + drift * dt - noise;
}
}  // namespace

TEST_CASE("one-dimensional divker step matches the scalar form") {
  const SystemModel m = cubic_model(CubicNoise::bump);
  const double x = 0.7, nu = 1.3, dB = 0.04, dt = 0.002, alpha = 10;
  const double e = std::exp(-x * x);
  const double sp = -2 * x * e, spp = (4 * x * x - 2) * e, sig = 0.5 + e;
  const double Fp = -3 * x * x, Fpp = -6 * x;
  const double expect = nu + ((sp * sp - Fp - alpha) * nu - Fpp + 2 * spp * sp) * dt -
                        (sp * nu + spp + alpha / sig) * dB;
  const CovectorState out = sde_divker_step({s(nu), 4}, s(x), s(dB), dt, alpha, m);
  CHECK(out.nu[0] == doctest::Approx(expect).epsilon(1e-13));
  CHECK(out.step_index == 5);
}

TEST_CASE("alpha = 0 divker step is the divergence step") {
  const SystemModel m = lorenz96_model(8);
  const Vec x = Vec::LinSpaced(8, -0.5, 0.9), nu = Vec::LinSpaced(8, 1, 2),
            dB = Vec::Constant(8, 0.03);
  const Vec a = sde_divker_step({nu, 0}, x, dB, 0.002, 0.0, m).nu;
  const Vec b = sde_divergence_step({nu, 0}, x, dB, 0.002, m).nu;
  CHECK(a == b);
}

TEST_CASE("matrix-free steps match the dense formula on Lorenz-96") {
  const SystemModel m = lorenz96_model(6);
  const Vec x = Vec::LinSpaced(6, -0.8, 0.6), nu = Vec::LinSpaced(6, -1, 2),
            dB = Vec::LinSpaced(6, 0.02, -0.05);
  const double dt = 0.002;
  CHECK((sde_divker_step({nu, 0}, x, dB, dt, 3.0, m).nu - dense_step(m, nu, x, dB, dt, 3, 1, 3))
            .norm() < 1e-12);
  CHECK((sde_divker_noh0_step({nu, 0}, x, dB, dt, 0.25, 0.3, m).nu -
         dense_step(m, nu, x, dB, dt, 0, 0.25, 1 / 0.3))
            .norm() < 1e-12);
  CHECK((sde_homogeneous_step({nu, 0}, x, dB, dt, m).nu - dense_step(m, nu, x, dB, dt, 0, 0, 0))
            .norm() < 1e-12);
  CHECK_THROWS_AS(sde_divker_noh0_step({nu, 0}, x, dB, dt, 1.5, 0.3, m), ScheduleError);
}

TEST_CASE("approximate step terms match their dense forms") {
  const SystemModel m = lorenz96_model(5);
  const Vec x = Vec::LinSpaced(5, -0.3, 0.4), dB = Vec::LinSpaced(5, 0.01, -0.02),
            nu = Vec::Ones(5);
  const double dt = 0.001;
  const SdeStepTerms t = sde_step_terms(m, x, dB, dt);
  const Vec gs = m.diffusion_gradient(x);
  const Mat H = m.diffusion_hessian(x);
  CHECK((t.approx_div_jacobian - (m.drift_divergence_gradient(x) * dt + H * dB - H * gs * dt))
            .norm() < 1e-14);
  const Mat P = Mat::Identity(5, 5) - m.drift_jacobian(x).transpose() * dt -
                gs * dB.transpose() + gs * gs.transpose() * dt;
  CHECK((t.approx_pullback_inverse_apply(nu) - P * nu).norm() < 1e-14);
}

TEST_CASE("sde kernel score") {
  const SystemModel ou = linear_ou_model(1.0, 2.0);
  const auto init = InitialDistribution::gaussian(1, 0.0, 1.0);
  const auto plan = SimulationPlan::from_step(0.03, 0.01, 1000000, 3);
  const PathRecord p = simulate_sde_path(ou, init, plan, 0);
  // beta = t/T: (1/(T sigma)) sum (t_n * (-1) - 1) dB_n
  double expect = 0;
  for (int n = 0; n < 3; ++n) expect += (-0.01 * n - 1.0) * p.increments[n][0];
  expect /= 0.03 * 2.0;
  CHECK(sde_kernel_score(p, ou, beta_linear(0.03), init.score)[0] ==
        doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(sde_kernel_score(p, cubic_model(CubicNoise::bump), beta_linear(0.03), {}),
                  UnsupportedEstimator);
}

TEST_CASE("drive_covector contracts") {
  const SystemModel m = cubic_model(CubicNoise::bump);
  const auto point = InitialDistribution::point_mass(s(0.2));
  const auto plan = SimulationPlan::from_step(0.1, 0.01, 1000000, 3);
  const PathRecord p = simulate_sde_path(m, point, plan, 0);
  CHECK_THROWS_AS(drive_covector(p, m, SdeStepper::divergence, nullptr, point.score), ModelError);
  const auto normal = InitialDistribution::gaussian(1, 0.0, 1.0);
  CHECK_THROWS_AS(drive_covector(p, m, SdeStepper::divker, nullptr, normal.score), ScheduleError);
  CHECK_NOTHROW(drive_covector(p, m, SdeStepper::divker_noh0, nullptr, {}));
  CHECK_THROWS_AS(drive_covector(p, m, SdeStepper::homogeneous, nullptr, {}), ModelError);

  std::vector<Vec> trace;
  CovectorOptions opts;
  opts.trace = &trace;
  const auto r = drive_covector(p, m, SdeStepper::divker_noh0, nullptr, {}, opts);
  CHECK(trace.size() == 11);
  CHECK(trace.front()[0] == 0.0);
  CHECK(r.nu == trace.back());

  CovectorOptions tight;
  tight.explosion_cap = 1e-9;
  const Schedule a = Schedule::constant(10);
  try {
    drive_covector(p, m, SdeStepper::divker, &a, normal.score, tight);
    FAIL("expected an explosion");
  } catch (const CovectorExplosion& e) {
    CHECK(e.step() <= 1);
  }
}

TEST_CASE("euler chain and SDE divergence recursions converge together") {
  // the exact N-step divergence recursion on the Euler chain and the
  // approximate SDE step agree to O(dt) over a short horizon
  const SystemModel m = cubic_model(CubicNoise::bump);
  const auto init = InitialDistribution::gaussian(1, 0.0, 1.0);
  double prev = INFINITY;
  for (double dt : {1e-2, 1e-3}) {
    const auto plan = SimulationPlan::from_step(0.1, dt, 1000000, 4);
    const DiscreteChain chain = euler_chain(m, dt);
    const NoiseKernel kernel = NoiseKernel::gaussian(1, dt);
    double err = 0;
    for (int id = 0; id < 200; ++id) {
      const PathRecord p = simulate_sde_path(m, init, plan, id);
      const double a = drive_covector(p, m, SdeStepper::divergence, nullptr, init.score).nu[0];
      const double b = nstep_divergence_score(p, chain, kernel, init.score).nu[0];
      err += std::abs(a - b) / 200;
    }
    CHECK(err < prev / 3);
    prev = err;
  }
}
