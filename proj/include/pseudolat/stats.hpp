#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pseudolat {

struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double rmse = 0.0;
  double p95 = 0.0;
  double variance = 0.0;  // population variance
};

// Values are consumed in the given order, so identical inputs give bit-identical results.
SummaryStats summarize(std::span<const double> values);

// Linear interpolation between order statistics, q in [0, 1].
double percentile(std::span<const double> values, double q);

struct HistogramSpec {
  double bin_width = 0.5;
  double max = 100.0;
};

// Fixed bins [k*w, (k+1)*w) over [0, max); values >= max land in `overflow`.
struct Histogram {
  HistogramSpec spec;
  std::vector<std::uint64_t> counts;
  std::uint64_t overflow = 0;
  std::uint64_t total = 0;

  // count / (total * bin_width); integrates to the in-range fraction.
  std::vector<double> density() const;
};

Histogram make_histogram(std::span<const double> values, const HistogramSpec& spec);

}  // namespace pseudolat
