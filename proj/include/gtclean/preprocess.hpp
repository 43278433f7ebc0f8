#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "gtclean/core.hpp"

namespace gtclean {

/// One row per band (kBands order), one column per grid step.
using BandMatrix = std::array<std::vector<double>, kBandCount>;

/// A pixel conditioned onto the run's time grid.
struct CleanProfile {
  std::string pixel_id;
  std::string plot_id;
  BandMatrix bands;
  std::vector<double> ndvi;
  std::optional<PixelPosition> position;

  const std::vector<double>& band(Band b) const { return bands[band_index(b)]; }

  friend bool operator==(const CleanProfile&, const CleanProfile&) = default;
};

enum class Smoother { MovingAverage, SavitzkyGolay };

struct PreprocessConfig {
  Smoother smoother = Smoother::MovingAverage;
  int smooth_window = 3;
  /// Minimum fraction of the run-wide acquisition count that must survive
  /// cloud removal.
  double min_sample_fraction = 0.5;
};

struct CloudDropResult {
  PixelProfile profile;
  std::size_t removed = 0;
};

CloudDropResult drop_cloudy(const PixelProfile& profile);

/// Linear interpolation onto the grid with constant extrapolation past the
/// first/last sample. Returns nullopt when a band has fewer than 2 samples.
std::optional<BandMatrix> resample_linear(const PixelProfile& profile, const TimeGrid& grid);

/// Centred moving average; windows truncate at the edges. Throws ConfigError
/// for even, non-positive or oversized windows.
std::vector<double> smooth(std::span<const double> series, int window);

/// Local quadratic least-squares (Savitzky-Golay) smoothing. Edge points are
/// evaluated from the fit over the first/last full window.
std::vector<double> smooth_savgol(std::span<const double> series, int window);

struct NdviResult {
  std::vector<double> values;
  /// Elements whose nir + red was not positive; those map to 0.
  std::size_t degenerate = 0;
};

/// Elementwise (nir - red) / (nir + red). Throws DataError on length mismatch.
NdviResult compute_ndvi(std::span<const double> nir, std::span<const double> red);

struct PreprocessOutcome {
  std::optional<CleanProfile> clean;
  std::optional<EliminationRecord> elimination;
  std::size_t clouds_removed = 0;
  std::size_t ndvi_degenerate = 0;
};

/// drop_cloudy -> resample_linear -> smooth each band -> compute_ndvi.
/// `n_observable` is the run-wide acquisition count used by the sparsity gate.
PreprocessOutcome preprocess_pixel(const PixelProfile& profile, const TimeGrid& grid,
                                   const PreprocessConfig& config, std::size_t n_observable);

/// Minimum surviving samples for a pixel: max(2, ceil(fraction * n_observable)).
std::size_t min_required_samples(std::size_t n_observable, double fraction);

}  // namespace gtclean
