#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "divker/model.hpp"
#include "divker/rng.hpp"
#include "divker/types.hpp"

namespace divker {

/// Law of x_0. `score` is empty for singular laws such as a point mass.
struct InitialDistribution {
  std::function<Vec(GaussianStream&)> sampler;
  std::function<Vec(const Vec&)> score;

  bool has_score() const { return static_cast<bool>(score); }

  /// Isotropic N(mean * 1, std^2 I).
  static InitialDistribution gaussian(int dim, double mean, double std_dev);
  static InitialDistribution point_mass(Vec location);
};

/// Noise density k on R^M. Only the isotropic Gaussian is built in.
struct NoiseKernel {
  int dim = 0;
  double variance = 1.0;
  std::function<double(const Vec&)> density;
  std::function<Vec(const Vec&)> log_density_gradient;
  std::function<Vec(GaussianStream&)> sampler;

  static NoiseKernel gaussian(int dim, double variance);
};

struct SimulationPlan {
  double total_time = 1.0;
  int steps = 1;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;

  double dt() const { return total_time / steps; }
  /// Builds a plan whose step count is round(T / dt); rejects dt that does
  /// not divide T to 1e-12 relative.
  static SimulationPlan from_step(double total_time, double dt, std::size_t n_paths,
                                  std::uint64_t seed);
  void validate() const;
};

struct PathRecord {
  double dt = 1.0;
  std::vector<Vec> states;      ///< x_0 .. x_N
  std::vector<Vec> increments;  ///< b_0 .. b_{N-1}
  std::uint64_t path_id = 0;
  /// Step index of the first non-finite state, when the path diverged.
  std::optional<std::size_t> divergent_step;

  std::size_t steps() const { return increments.size(); }
  bool divergent() const { return divergent_step.has_value(); }
  const Vec& terminal() const { return states.back(); }
};

/// Discrete random map  x_{n+1} = f(x_n) + sigma(x_n) b_n.
struct DiscreteChain {
  int dim = 0;
  std::function<Vec(const Vec&)> map;
  std::function<Mat(const Vec&)> map_jacobian;
  std::function<Vec(const Vec&, const Vec&)> map_jacobian_transpose_apply;
  std::function<double(const Vec&)> diffusion;
  std::function<Vec(const Vec&)> diffusion_gradient;
  /// f'' and sigma'' for one-dimensional chains; empty when unknown.
  std::function<double(double)> map_second_derivative;
  std::function<double(double)> diffusion_second_derivative;
  bool is_additive = false;

  bool has_exact_geometry() const {
    return dim == 1 && map_second_derivative && diffusion_second_derivative;
  }
  double checked_diffusion(const Vec& x) const;
};

/// The Euler map f(x) = x + F(x) dt of an SDE model.
DiscreteChain euler_chain(const SystemModel& model, double dt);

/// One-dimensional chain from scalar closed forms.
struct ScalarChainSpec {
  std::function<double(double)> f, df, d2f;
  std::function<double(double)> sigma, dsigma, d2sigma;
  bool is_additive = false;
};
DiscreteChain scalar_chain(ScalarChainSpec spec);

/// Euler-Maruyama path; increments are N(0, dt I) draws addressed by
/// (plan.seed, path_id, n), the initial state by (plan.seed, path_id, initial).
PathRecord simulate_sde_path(const SystemModel& model, const InitialDistribution& init,
                             const SimulationPlan& plan, std::uint64_t path_id);

PathRecord simulate_discrete_path(const DiscreteChain& chain, const NoiseKernel& kernel,
                                  const InitialDistribution& init, int steps, std::uint64_t seed,
                                  std::uint64_t path_id);

/// Header "path_id,n,x_1..x_M,b_1..b_M", then one row per state with 17
/// significant digits; the b fields of the terminal row are empty.
void write_path_dump(std::ostream& out, std::span<const PathRecord> paths);

}  // namespace divker
