#include "pseudolat/stats.hpp"

#include <algorithm>
#include <cmath>

#include "pseudolat/errors.hpp"

namespace pseudolat {

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("percentile: q must be in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

SummaryStats summarize(std::span<const double> values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  double sq = 0.0;
  for (double v : values) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(values.size());
  s.mean = sum / n;
  s.rmse = std::sqrt(sq / n);
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.variance = var / n;
  s.median = percentile(values, 0.5);
  s.p95 = percentile(values, 0.95);
  return s;
}

std::vector<double> Histogram::density() const {
  std::vector<double> d(counts.size(), 0.0);
  if (total == 0) return d;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    d[i] = static_cast<double>(counts[i]) / (static_cast<double>(total) * spec.bin_width);
  }
  return d;
}

Histogram make_histogram(std::span<const double> values, const HistogramSpec& spec) {
  if (!(spec.bin_width > 0.0) || !(spec.max > 0.0)) throw InvalidArgument("histogram: bin width and range must be > 0");
  Histogram h;
  h.spec = spec;
  h.counts.assign(static_cast<std::size_t>(std::ceil(spec.max / spec.bin_width - 1e-9)), 0);
  for (double v : values) {
    if (std::isnan(v)) continue;
    ++h.total;
    if (v >= spec.max) {
      ++h.overflow;
      continue;
    }
    const auto bin = static_cast<std::size_t>(std::max(0.0, std::floor(v / spec.bin_width)));
    ++h.counts[std::min(bin, h.counts.size() - 1)];
  }
  return h;
}

}  // namespace pseudolat
