#include <algorithm>
#include <cmath>
#include <limits>

#include "heat/episode.hpp"
#include "heat/error.hpp"

namespace heat {

std::size_t Histogram::bin_of(double timestamp) const {
  const double offset = std::floor((timestamp - origin) / bin_width);
  if (offset <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(offset), counts.size() - 1);
}

Histogram build_histogram(std::span<const Alert* const> alerts, double bin_width) {
  if (alerts.empty()) fail(ErrorKind::validation, "no alerts for key/stage");
  if (!(bin_width > 0.0)) fail(ErrorKind::validation, "bin_width must be > 0", "bin_width");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Alert* a : alerts) {
    lo = std::min(lo, a->timestamp);
    hi = std::max(hi, a->timestamp);
  }
  Histogram h;
  h.origin = std::floor(lo);
  h.bin_width = bin_width;
  h.counts.assign(static_cast<std::size_t>(std::floor((hi - h.origin) / bin_width)) + 1, 0.0);
  for (const Alert* a : alerts) h.counts[h.bin_of(a->timestamp)] += 1.0;
  return h;
}

std::vector<double> gaussian_kernel(double sigma_bins, double truncation) {
  if (!(sigma_bins > 0.0) || !std::isfinite(sigma_bins)) {
    fail(ErrorKind::validation, "sigma must be positive", "sigma");
  }
  if (!(truncation >= 1.0)) fail(ErrorKind::validation, "kernel truncation must be >= 1", "truncation");
  const auto radius = static_cast<std::ptrdiff_t>(std::floor(truncation * sigma_bins));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double x = static_cast<double>(k) / sigma_bins;
    w[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * x * x);
    total += w[static_cast<std::size_t>(k + radius)];
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> gaussian_smooth(std::span<const double> series, double sigma_bins, double truncation) {
  const auto kernel = gaussian_kernel(sigma_bins, truncation);
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  std::vector<double> out(series.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t k_lo = std::max(-radius, -i);
    const std::ptrdiff_t k_hi = std::min(radius, n - 1 - i);
    double acc = 0.0;
    for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) {
      acc += kernel[static_cast<std::size_t>(k + radius)] * series[static_cast<std::size_t>(i + k)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

std::vector<std::size_t> find_peaks(std::span<const double> s) {
  constexpr double kFloor = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> peaks;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? s[i - 1] : kFloor;
    const double right = i + 1 < n ? s[i + 1] : kFloor;
    if (s[i] > left && s[i] >= right) peaks.push_back(i);
  }
  return peaks;
}

}  // namespace heat
