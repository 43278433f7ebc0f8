#include "gtclean/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace gtclean {
namespace {

void check_window(std::size_t n, int window) {
  if (window < 1 || window % 2 == 0) throw ConfigError("smoothing window must be odd and >= 1");
  if (static_cast<std::size_t>(window) > n) throw ConfigError("smoothing window exceeds series length");
}

double interpolate(const std::vector<BandSample>& samples, int day) {
  if (day <= samples.front().day) return samples.front().reflectance;
  if (day >= samples.back().day) return samples.back().reflectance;
  auto hi = std::lower_bound(samples.begin(), samples.end(), day,
                             [](const BandSample& s, int d) { return s.day < d; });
  if (hi->day == day) return hi->reflectance;
  auto lo = hi - 1;
  const double t = static_cast<double>(day - lo->day) / static_cast<double>(hi->day - lo->day);
  return lo->reflectance + t * (hi->reflectance - lo->reflectance);
}

}  // namespace

CloudDropResult drop_cloudy(const PixelProfile& profile) {
  CloudDropResult result;
  result.profile.pixel_id = profile.pixel_id;
  result.profile.plot_id = profile.plot_id;
  result.profile.position = profile.position;
  const std::size_t n = profile.sample_count();
  for (std::size_t i = 0; i < n; ++i) {
    // A sample is cloudy if any band carries the flag.
    bool cloudy = false;
    for (const auto& band : profile.bands) cloudy = cloudy || band[i].cloudy;
    if (cloudy) {
      ++result.removed;
      continue;
    }
    for (std::size_t b = 0; b < kBandCount; ++b) result.profile.bands[b].push_back(profile.bands[b][i]);
  }
  return result;
}

std::optional<BandMatrix> resample_linear(const PixelProfile& profile, const TimeGrid& grid) {
  BandMatrix out;
  for (std::size_t b = 0; b < kBandCount; ++b) {
    const auto& samples = profile.bands[b];
    if (samples.size() < 2) return std::nullopt;
    out[b].resize(static_cast<std::size_t>(grid.n_steps));
    for (int t = 0; t < grid.n_steps; ++t) out[b][static_cast<std::size_t>(t)] = interpolate(samples, grid.day(t));
  }
  return out;
}

std::vector<double> smooth(std::span<const double> series, int window) {
  check_window(series.size(), window);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> out(series.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + half);
    double sum = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) sum += series[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::vector<double> smooth_savgol(std::span<const double> series, int window) {
  check_window(series.size(), window);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> out(series.size());
  if (window < 3) {
    out.assign(series.begin(), series.end());
    return out;
  }
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t start = std::clamp<std::ptrdiff_t>(i - half, 0, n - window);
    // Quadratic fit in local coordinate u = j - i via 3x3 normal equations.
    double s[5] = {0, 0, 0, 0, 0};
    double r[3] = {0, 0, 0};
    for (std::ptrdiff_t j = start; j < start + window; ++j) {
      const double u = static_cast<double>(j - i);
      const double y = series[static_cast<std::size_t>(j)];
      double p = 1.0;
      for (int k = 0; k < 5; ++k) {
        s[k] += p;
        if (k < 3) r[k] += p * y;
        p *= u;
      }
    }
    // Solve [[s0 s1 s2][s1 s2 s3][s2 s3 s4]] c = r with Cramer's rule; only c0 is needed.
    const double a00 = s[0], a01 = s[1], a02 = s[2], a11 = s[2], a12 = s[3], a22 = s[4];
    const double det = a00 * (a11 * a22 - a12 * a12) - a01 * (a01 * a22 - a12 * a02) + a02 * (a01 * a12 - a11 * a02);
    const double det0 = r[0] * (a11 * a22 - a12 * a12) - a01 * (r[1] * a22 - a12 * r[2]) + a02 * (r[1] * a12 - a11 * r[2]);
    out[static_cast<std::size_t>(i)] = det0 / det;
  }
  return out;
}

NdviResult compute_ndvi(std::span<const double> nir, std::span<const double> red) {
  if (nir.size() != red.size()) throw DataError("compute_ndvi: nir and red lengths differ");
  NdviResult result;
  result.values.resize(nir.size());
  for (std::size_t i = 0; i < nir.size(); ++i) {
    const double sum = nir[i] + red[i];
    if (!(sum > 0.0)) {
      result.values[i] = 0.0;
      ++result.degenerate;
      continue;
    }
    result.values[i] = std::clamp((nir[i] - red[i]) / sum, -1.0, 1.0);
  }
  return result;
}

std::size_t min_required_samples(std::size_t n_observable, double fraction) {
  const auto needed = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_observable) - 1e-12));
  return std::max<std::size_t>(2, needed);
}

PreprocessOutcome preprocess_pixel(const PixelProfile& profile, const TimeGrid& grid,
                                   const PreprocessConfig& config, std::size_t n_observable) {
  PreprocessOutcome outcome;
  CloudDropResult dropped = drop_cloudy(profile);
  outcome.clouds_removed = dropped.removed;

  const std::size_t needed = min_required_samples(n_observable, config.min_sample_fraction);
  const std::size_t have = dropped.profile.sample_count();
  std::optional<BandMatrix> resampled;
  if (have >= needed) resampled = resample_linear(dropped.profile, grid);
  if (!resampled) {
    outcome.elimination = EliminationRecord{profile.pixel_id, SubjectKind::Pixel, Level::Pre, Reason::TooSparse,
                                            std::to_string(have) + " clear samples, need " + std::to_string(needed)};
    return outcome;
  }

  CleanProfile clean;
  clean.pixel_id = profile.pixel_id;
  clean.plot_id = profile.plot_id;
  clean.position = profile.position;
  for (std::size_t b = 0; b < kBandCount; ++b) {
    clean.bands[b] = config.smoother == Smoother::SavitzkyGolay ? smooth_savgol((*resampled)[b], config.smooth_window)
                                                                 : smooth((*resampled)[b], config.smooth_window);
  }
  NdviResult ndvi = compute_ndvi(clean.band(Band::Nir), clean.band(Band::Red));
  clean.ndvi = std::move(ndvi.values);
  outcome.ndvi_degenerate = ndvi.degenerate;
  outcome.clean = std::move(clean);
  return outcome;
}

}  // namespace gtclean
