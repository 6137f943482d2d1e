#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "divker/config.hpp"
#include "divker/estimate.hpp"

namespace divker {

struct RunOptions {
  int threads = 1;
  std::string out_dir;  ///< empty: nothing is written
};

struct RunReport {
  RunConfig config;
  double alpha = 0.0;  ///< resolved constant alpha, when one applies
  std::size_t n_paths = 0;
  std::size_t n_capped = 0;    ///< covector over the cap or non-finite
  std::size_t n_singular = 0;  ///< singular step Jacobian
  std::size_t n_divergent = 0;
  double wall_seconds = 0.0;
  std::vector<PathSample> samples;  ///< usable paths, ordered by path_id
  std::optional<BinnedScores> scores;
  std::optional<LinearResponseSummary> response;
};

/// simulate -> per-path covector -> bins or linear-response summary. Paths
/// are independent and merged by path_id, so the result does not depend on
/// the thread count.
RunReport run(const RunConfig& config, const RunOptions& options = {});

/// Machine-readable report, pretty-printed JSON.
std::string report_json(const RunReport& report);
std::string report_summary(const RunReport& report);

}  // namespace divker
