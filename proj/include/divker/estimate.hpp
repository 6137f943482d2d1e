#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "divker/types.hpp"

namespace divker {

/// Equal-width half-open bins [lo + i w, lo + (i+1) w) on one coordinate.
struct BinGrid {
  double lo = -1.8;
  double hi = 1.8;
  int n_bins = 9;
  int coordinate = 0;

  double width() const { return (hi - lo) / n_bins; }
  double center(int i) const { return lo + (i + 0.5) * width(); }
  double edge(int i) const { return lo + i * width(); }
  /// Bin index of v, or -1 outside [lo, hi).
  int locate(double v) const;
  void validate() const;
};

/// Terminal state and final covector of one path.
struct PathSample {
  std::uint64_t path_id = 0;
  Vec terminal;
  Vec nu;
};

struct ScoreEstimate {
  int bin_index = 0;
  double bin_center = 0.0;
  std::size_t count = 0;  ///< paths landing in the bin
  std::size_t used = 0;   ///< paths averaged (differs only with paths_per_bin)
  Vec mean_nu;
  Vec se_nu;  ///< sample std / sqrt(used); NaN when used < 2
  double log_density = 0.0;
  bool flagged = false;  ///< count below min_count
};

struct BinnedScores {
  BinGrid grid;
  std::vector<ScoreEstimate> bins;
  std::size_t n_total = 0;
  std::size_t overflow = 0;
};

/// Conditional means of nu given the terminal bin, with the empirical
/// log-density log(count / (n_total w)). paths_per_bin > 0 averages only the
/// first that many paths of each bin, in input order.
BinnedScores bin_and_average(std::span<const PathSample> samples, const BinGrid& grid,
                             std::size_t min_count = 5, std::size_t paths_per_bin = 0);

/// (log_density[i+1] - log_density[i-1]) / 2w at interior bins, with the
/// Poisson standard error sqrt(1/c_{i+1} + 1/c_{i-1}) / 2w. NaN elsewhere.
struct DensitySlope {
  std::vector<double> slope;
  std::vector<double> se;
};
DensitySlope log_density_slopes(const BinnedScores& binned);

/// Score of the empirical terminal law averaged over each bin,
/// (h(b) - h(a)) / P(bin), with the edge densities h(a), h(b) counted in
/// windows of half-width `window` and a delta-method standard error.
struct EmpiricalBinScore {
  std::vector<double> score;
  std::vector<double> se;
};
EmpiricalBinScore empirical_bin_score(std::span<const PathSample> samples, const BinGrid& grid,
                                      double window);

struct HistogramSpec {
  double lo = -50.0;
  double hi = 50.0;
  int n_bins = 50;
};

struct DeviationRow {
  std::uint64_t path_id = 0;
  double phi = 0.0;
  double nu_dot_v = 0.0;
  double deviation = 0.0;
};

struct LinearResponseSummary {
  double mean = 0.0;
  double se = 0.0;
  std::vector<DeviationRow> rows;
  HistogramSpec histogram;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;
};

/// Per path Phi(x_T) <nu_T, v> + 1, whose expectation is zero when nu_T is
/// the score and grad Phi . v integrates to 1.
LinearResponseSummary linear_response_deviation(std::span<const PathSample> samples,
                                                const std::function<double(const Vec&)>& observable,
                                                const Vec& v, const HistogramSpec& histogram = {});

void write_scores_csv(std::ostream& out, const BinnedScores& binned);
void write_deviations_csv(std::ostream& out, const LinearResponseSummary& summary);

}  // namespace divker
