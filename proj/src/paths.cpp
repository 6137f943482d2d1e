#include "divker/paths.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "divker/errors.hpp"

namespace divker {

InitialDistribution InitialDistribution::gaussian(int dim, double mean, double std_dev) {
  if (!(std_dev > 0.0)) throw ModelError("gaussian initial law needs std > 0");
  InitialDistribution d;
  d.sampler = [=](GaussianStream& rng) -> Vec {
    return Vec::Constant(dim, mean) + std_dev * rng.normals(dim);
  };
  const double inv_var = 1.0 / (std_dev * std_dev);
  d.score = [=](const Vec& x) -> Vec { return -(x.array() - mean).matrix() * inv_var; };
  return d;
}

InitialDistribution InitialDistribution::point_mass(Vec location) {
  InitialDistribution d;
  d.sampler = [loc = std::move(location)](GaussianStream&) -> Vec { return loc; };
  return d;
}

NoiseKernel NoiseKernel::gaussian(int dim, double variance) {
  if (dim < 1) throw ModelError("noise kernel needs dim >= 1");
  if (!(variance > 0.0)) throw ModelError("gaussian kernel needs variance > 0");
  NoiseKernel k;
  k.dim = dim;
  k.variance = variance;
  const double log_norm = -0.5 * dim * std::log(2.0 * std::numbers::pi * variance);
  k.density = [=](const Vec& b) { return std::exp(log_norm - 0.5 * b.squaredNorm() / variance); };
  k.log_density_gradient = [variance](const Vec& b) -> Vec { return -b / variance; };
  const double sd = std::sqrt(variance);
  k.sampler = [dim, sd](GaussianStream& rng) -> Vec { return sd * rng.normals(dim); };
  return k;
}

SimulationPlan SimulationPlan::from_step(double total_time, double dt, std::size_t n_paths,
                                         std::uint64_t seed) {
  if (!(total_time > 0.0) || !(dt > 0.0)) {
    throw ModelError("simulation plan needs positive T and dt");
  }
  const double ratio = total_time / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(rounded * dt - total_time) > 1e-12 * total_time) {
    throw ModelError(fmt::format("dt = {} does not divide T = {} into whole steps", dt,
                                 total_time));
  }
  SimulationPlan plan{total_time, static_cast<int>(rounded), n_paths, seed};
  plan.validate();
  return plan;
}

void SimulationPlan::validate() const {
  if (!(total_time > 0.0)) throw ModelError("simulation plan needs T > 0");
  if (steps < 1) throw ModelError("simulation plan needs at least one step");
  if (n_paths < 1) throw ModelError("simulation plan needs at least one path");
}

double DiscreteChain::checked_diffusion(const Vec& x) const {
  const double s = diffusion(x);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw ModelError(fmt::format("chain diffusion must be positive, got {}", s));
  }
  return s;
}

DiscreteChain euler_chain(const SystemModel& model, double dt) {
  if (!(dt > 0.0)) throw ModelError("euler_chain needs dt > 0");
  auto m = std::make_shared<const SystemModel>(model);
  DiscreteChain c;
  c.dim = model.dim;
  c.map = [m, dt](const Vec& x) -> Vec { return x + dt * m->drift(x); };
  c.map_jacobian = [m, dt](const Vec& x) -> Mat {
    return Mat::Identity(m->dim, m->dim) + dt * m->drift_jacobian(x);
  };
  c.map_jacobian_transpose_apply = [m, dt](const Vec& x, const Vec& nu) -> Vec {
    return nu + dt * m->drift_jacobian_transpose_apply(x, nu);
  };
  c.diffusion = [m](const Vec& x) { return m->diffusion(x); };
  c.diffusion_gradient = [m](const Vec& x) { return m->diffusion_gradient(x); };
  if (model.dim == 1) {
    // In one dimension div F = F' and the Laplacian is sigma''.
    c.map_second_derivative = [m, dt](double x) {
      return dt * m->drift_divergence_gradient(Vec::Constant(1, x))[0];
    };
    c.diffusion_second_derivative = [m](double x) {
      return m->diffusion_laplacian(Vec::Constant(1, x));
    };
  }
  c.is_additive = model.is_additive;
  return c;
}

DiscreteChain scalar_chain(ScalarChainSpec spec) {
  DiscreteChain c;
  c.dim = 1;
  c.map = [f = spec.f](const Vec& x) -> Vec { return Vec::Constant(1, f(x[0])); };
  c.map_jacobian = [df = spec.df](const Vec& x) -> Mat { return Mat::Constant(1, 1, df(x[0])); };
  c.map_jacobian_transpose_apply = [df = spec.df](const Vec& x, const Vec& nu) -> Vec {
    return Vec::Constant(1, df(x[0]) * nu[0]);
  };
  c.diffusion = [s = spec.sigma](const Vec& x) { return s(x[0]); };
  c.diffusion_gradient = [ds = spec.dsigma](const Vec& x) -> Vec {
    return Vec::Constant(1, ds(x[0]));
  };
  c.map_second_derivative = spec.d2f;
  c.diffusion_second_derivative = spec.d2sigma;
  c.is_additive = spec.is_additive;
  return c;
}

PathRecord simulate_sde_path(const SystemModel& model, const InitialDistribution& init,
                             const SimulationPlan& plan, std::uint64_t path_id) {
  if (path_id >= plan.n_paths) {
    throw ModelError(fmt::format("path id {} outside plan of {} paths", path_id, plan.n_paths));
  }
  const double dt = plan.dt();
  const double sqrt_dt = std::sqrt(dt);
  PathRecord rec;
  rec.dt = dt;
  rec.path_id = path_id;
  rec.states.reserve(plan.steps + 1);
  rec.increments.reserve(plan.steps);

  GaussianStream init_rng(plan.seed, path_id, GaussianStream::kInitialStep);
  rec.states.push_back(init.sampler(init_rng));
  if (rec.states.front().size() != model.dim) {
    throw ModelError("initial state dimension does not match the model");
  }
  for (int n = 0; n < plan.steps; ++n) {
    const Vec& x = rec.states.back();
    GaussianStream rng(plan.seed, path_id, static_cast<std::uint32_t>(n));
    Vec db = sqrt_dt * rng.normals(model.dim);
    const double s = model.checked_diffusion(x, n);
    Vec next = x + dt * model.drift(x) + s * db;
    rec.increments.push_back(std::move(db));
    if (!next.allFinite()) {
      rec.divergent_step = static_cast<std::size_t>(n + 1);
      rec.states.push_back(std::move(next));
      break;
    }
    rec.states.push_back(std::move(next));
  }
  return rec;
}

PathRecord simulate_discrete_path(const DiscreteChain& chain, const NoiseKernel& kernel,
                                  const InitialDistribution& init, int steps, std::uint64_t seed,
                                  std::uint64_t path_id) {
  if (steps < 1) throw ModelError("discrete path needs at least one step");
  if (kernel.dim != chain.dim) throw ModelError("kernel and chain dimensions differ");
  PathRecord rec;
  rec.dt = 1.0;
  rec.path_id = path_id;
  GaussianStream init_rng(seed, path_id, GaussianStream::kInitialStep);
  rec.states.push_back(init.sampler(init_rng));
  for (int n = 0; n < steps; ++n) {
    const Vec& x = rec.states.back();
    GaussianStream rng(seed, path_id, static_cast<std::uint32_t>(n));
    Vec b = kernel.sampler(rng);
    Vec next = chain.map(x) + chain.checked_diffusion(x) * b;
    rec.increments.push_back(std::move(b));
    const bool finite = next.allFinite();
    rec.states.push_back(std::move(next));
    if (!finite) {
      rec.divergent_step = static_cast<std::size_t>(n + 1);
      break;
    }
  }
  return rec;
}

void write_path_dump(std::ostream& out, std::span<const PathRecord> paths) {
  const Eigen::Index dim = paths.empty() ? 0 : paths.front().states.front().size();
  out << "path_id,n";
  for (Eigen::Index i = 1; i <= dim; ++i) out << ",x_" << i;
  for (Eigen::Index i = 1; i <= dim; ++i) out << ",b_" << i;
  out << '\n';
  for (const auto& p : paths) {
    for (std::size_t n = 0; n < p.states.size(); ++n) {
      fmt::print(out, "{},{}", p.path_id, n);
      for (double v : p.states[n]) fmt::print(out, ",{:.17g}", v);
      if (n < p.increments.size()) {
        for (double v : p.increments[n]) fmt::print(out, ",{:.17g}", v);
      } else {
        for (Eigen::Index i = 0; i < p.states[n].size(); ++i) out << ',';
      }
      out << '\n';
    }
  }
}

}  // namespace divker
