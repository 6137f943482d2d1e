#include "divker/estimate.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "divker/errors.hpp"

namespace divker {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

int BinGrid::locate(double v) const {
  if (!(v >= lo) || !(v < hi)) return -1;
  const int i = static_cast<int>(std::floor((v - lo) / width()));
  // floor can land on n_bins for v just below hi
  return std::min(i, n_bins - 1);
}

void BinGrid::validate() const {
  if (!(lo < hi)) throw Error(fmt::format("bin grid needs lo < hi, got [{}, {})", lo, hi));
  if (n_bins < 1) throw Error("bin grid needs at least one bin");
  if (coordinate < 0) throw Error("bin coordinate must be nonnegative");
}

BinnedScores bin_and_average(std::span<const PathSample> samples, const BinGrid& grid,
                             std::size_t min_count, std::size_t paths_per_bin) {
  grid.validate();
  if (samples.empty()) throw Error("bin_and_average: no paths");
  const int dim = static_cast<int>(samples.front().nu.size());

  BinnedScores out;
  out.grid = grid;
  out.n_total = samples.size();
  std::vector<std::vector<std::size_t>> members(grid.n_bins);
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const auto& s = samples[j];
    if (grid.coordinate >= s.terminal.size()) {
      throw Error(fmt::format("bin coordinate {} out of range for dimension {}", grid.coordinate,
                              s.terminal.size()));
    }
    if (s.nu.size() != dim) throw Error("covectors of differing dimension");
    const int b = grid.locate(s.terminal[grid.coordinate]);
    if (b < 0) {
      ++out.overflow;
    } else {
      members[b].push_back(j);
    }
  }

  const double w = grid.width();
  for (int b = 0; b < grid.n_bins; ++b) {
    ScoreEstimate e;
    e.bin_index = b;
    e.bin_center = grid.center(b);
    e.count = members[b].size();
    e.flagged = e.count < min_count;
    e.log_density = std::log(static_cast<double>(e.count) / (out.n_total * w));
    e.used = paths_per_bin > 0 ? std::min(e.count, paths_per_bin) : e.count;

    e.mean_nu = Vec::Constant(dim, kNaN);
    e.se_nu = Vec::Constant(dim, kNaN);
    if (e.used > 0) {
      Vec sum = Vec::Zero(dim);
      for (std::size_t k = 0; k < e.used; ++k) sum += samples[members[b][k]].nu;
      e.mean_nu = sum / static_cast<double>(e.used);
      if (e.used >= 2) {
        Vec ss = Vec::Zero(dim);
        for (std::size_t k = 0; k < e.used; ++k) {
          ss += (samples[members[b][k]].nu - e.mean_nu).cwiseAbs2();
        }
        e.se_nu = (ss / static_cast<double>(e.used - 1) / static_cast<double>(e.used)).cwiseSqrt();
      }
    }
    out.bins.push_back(std::move(e));
  }
  return out;
}

DensitySlope log_density_slopes(const BinnedScores& binned) {
  const std::size_t n = binned.bins.size();
  const double w = binned.grid.width();
  DensitySlope d{std::vector<double>(n, kNaN), std::vector<double>(n, kNaN)};
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const auto& lo = binned.bins[i - 1];
    const auto& hi = binned.bins[i + 1];
    if (lo.count == 0 || hi.count == 0) continue;
    d.slope[i] = (hi.log_density - lo.log_density) / (2.0 * w);
    d.se[i] = std::sqrt(1.0 / hi.count + 1.0 / lo.count) / (2.0 * w);
  }
  return d;
}

EmpiricalBinScore empirical_bin_score(std::span<const PathSample> samples, const BinGrid& grid,
                                      double window) {
  grid.validate();
  if (samples.empty()) throw Error("empirical_bin_score: no paths");
  if (!(window > 0.0) || window > 0.5 * grid.width()) {
    throw Error("edge window must lie in (0, w/2]");
  }
  const std::size_t n_bins = grid.n_bins;
  const double n = static_cast<double>(samples.size());
  EmpiricalBinScore out{std::vector<double>(n_bins, kNaN), std::vector<double>(n_bins, kNaN)};

  for (std::size_t b = 0; b < n_bins; ++b) {
    const double a = grid.edge(static_cast<int>(b));
    const double c = grid.edge(static_cast<int>(b) + 1);
    auto z_of = [&](double x) {
      return ((std::abs(x - c) < window ? 1.0 : 0.0) - (std::abs(x - a) < window ? 1.0 : 0.0)) /
             (2.0 * window);
    };
    auto y_of = [&](double x) { return (x >= a && x < c) ? 1.0 : 0.0; };
    double sz = 0.0, sy = 0.0;
    for (const auto& s : samples) {
      const double x = s.terminal[grid.coordinate];
      sz += z_of(x);
      sy += y_of(x);
    }
    if (sy == 0.0) continue;
    const double r = sz / sy;
    double ss = 0.0;
    for (const auto& s : samples) {
      const double x = s.terminal[grid.coordinate];
      const double d = z_of(x) - r * y_of(x);
      ss += d * d;
    }
    const double mean_y = sy / n;
    out.score[b] = r;
    out.se[b] = std::sqrt(ss / (n - 1.0) / n) / mean_y;
  }
  return out;
}

LinearResponseSummary linear_response_deviation(std::span<const PathSample> samples,
                                                const std::function<double(const Vec&)>& observable,
                                                const Vec& v, const HistogramSpec& histogram) {
  if (samples.empty()) throw Error("linear_response_deviation: no paths");
  if (!(histogram.lo < histogram.hi) || histogram.n_bins < 1) {
    throw Error("deviation histogram needs lo < hi and at least one bin");
  }
  LinearResponseSummary out;
  out.histogram = histogram;
  out.counts.assign(histogram.n_bins, 0);
  out.rows.reserve(samples.size());
  double sum = 0.0;
  for (const auto& s : samples) {
    if (s.nu.size() != v.size()) throw Error("v and nu differ in dimension");
    DeviationRow r;
    r.path_id = s.path_id;
    r.phi = observable(s.terminal);
    r.nu_dot_v = s.nu.dot(v);
    r.deviation = r.phi * r.nu_dot_v + 1.0;
    sum += r.deviation;
    out.rows.push_back(r);
  }
  const double n = static_cast<double>(samples.size());
  out.mean = sum / n;
  double ss = 0.0;
  for (const auto& r : out.rows) ss += (r.deviation - out.mean) * (r.deviation - out.mean);
  out.se = samples.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : kNaN;

  const double w = (histogram.hi - histogram.lo) / histogram.n_bins;
  for (const auto& r : out.rows) {
    if (r.deviation < histogram.lo) {
      ++out.underflow;
    } else if (!(r.deviation < histogram.hi)) {
      ++out.overflow;
    } else {
      const int i = static_cast<int>((r.deviation - histogram.lo) / w);
      ++out.counts[std::min(i, histogram.n_bins - 1)];
    }
  }
  return out;
}

void write_scores_csv(std::ostream& out, const BinnedScores& binned) {
  const long dim = binned.bins.empty() ? 0 : binned.bins.front().mean_nu.size();
  out << "bin_index,bin_center,count,log_density";
  for (long i = 1; i <= dim; ++i) out << ",mean_nu_" << i;
  for (long i = 1; i <= dim; ++i) out << ",se_nu_" << i;
  out << '\n';
  for (const auto& b : binned.bins) {
    fmt::print(out, "{},{:.17g},{},{:.17g}", b.bin_index, b.bin_center, b.count, b.log_density);
    for (long i = 0; i < dim; ++i) fmt::print(out, ",{:.17g}", b.mean_nu[i]);
    for (long i = 0; i < dim; ++i) fmt::print(out, ",{:.17g}", b.se_nu[i]);
    out << '\n';
  }
}

void write_deviations_csv(std::ostream& out, const LinearResponseSummary& summary) {
  out << "path_id,phi,nu_dot_v,deviation\n";
  for (const auto& r : summary.rows) {
    fmt::print(out, "{},{:.17g},{:.17g},{:.17g}\n", r.path_id, r.phi, r.nu_dot_v, r.deviation);
  }
}

}  // namespace divker
