#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace divker {

/// One experiment. Serialized as flat "key = value" lines; see README for
/// the key list.
struct RunConfig {
  std::string experiment = "custom";

  std::string model = "cubic";  ///< ou | cubic | lorenz96
  double model_a = 1.0;         ///< ou: drift rate
  double model_sigma = 1.0;     ///< ou: diffusion
  int model_dim = 1;            ///< ou and lorenz96
  std::string model_noise = "bump";  ///< cubic: unit | bump
  double model_damping = 0.01;
  double model_base_diffusion = 2.0;
  double model_forcing = 8.0;

  std::string init = "normal";  ///< normal | point
  double init_mean = 0.0;
  double init_std = 1.0;
  double init_value = 0.0;  ///< point: every coordinate

  double total_time = 3.0;
  double dt = 0.002;
  std::size_t paths = 20000;
  std::uint64_t seed = 1;

  /// sde-kernel | sde-div | sde-divker | sde-divker-noh0 |
  /// nstep-kernel | nstep-div | nstep-divker | nstep-divker-noh0
  std::string estimator = "sde-divker";
  std::string alpha = "const:10";  ///< const:A | auto:P | reciprocal
  std::string beta = "linear";     ///< linear | const:1

  std::string analysis = "bins";  ///< bins | linear-response
  double bins_lo = -1.8;
  double bins_hi = 1.8;
  int bins_n = 9;
  int bins_coordinate = 0;
  std::size_t bins_min_count = 5;
  std::size_t bins_paths_per_bin = 0;
  double hist_lo = -50.0;
  double hist_hi = 50.0;
  int hist_n = 50;

  double cap = 1e12;
  std::size_t dump_paths = 0;  ///< write the first this many paths to paths.csv

  bool operator==(const RunConfig&) const = default;
};

/// Applies one key; problems are appended rather than thrown.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   std::vector<std::string>& problems);

/// Parses "key = value" lines ('#' starts a comment) on top of `base`.
/// Throws ConfigError listing every bad line.
RunConfig parse_config(const std::string& text, RunConfig base = {});

/// Cross-field checks; throws ConfigError listing every problem.
void validate_config(const RunConfig& cfg);

/// Lossless: parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& cfg);

/// Defaults of the named experiments (the CLI subcommands).
RunConfig preset(const std::string& experiment);
std::vector<std::string> preset_names();

}  // namespace divker
