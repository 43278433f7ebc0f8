#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gtclean/core.hpp"
#include "gtclean/preprocess.hpp"

namespace gtclean {

/// Per-band mean-over-pixels profiles of one plot, concatenated in kBands
/// order. Length is 5 * n_steps.
struct SpectralEmbedding {
  std::string plot_id;
  std::vector<double> vector;
};

struct MedianProfile {
  CropLabel crop;
  std::vector<double> vector;
  std::size_t support = 0;
};

using MedianSet = std::map<std::string, MedianProfile>;

enum class Metric { Cosine = 0, Pearson = 1, Manhattan = 2 };
inline constexpr std::array<Metric, 3> kMetrics{Metric::Cosine, Metric::Pearson, Metric::Manhattan};
std::string_view to_string(Metric metric);

enum class Decision { Confirmed, Flagged };
std::string_view to_string(Decision decision);

struct Verdict {
  std::string plot_id;
  std::string district;
  CropLabel claimed;
  /// Nearest crop per metric; nullopt when the metric abstained.
  std::array<std::optional<CropLabel>, 3> votes;
  Decision decision = Decision::Flagged;
};

/// Throws DataError when `pixels` is empty or lengths disagree.
SpectralEmbedding embed_plot(const std::string& plot_id, std::span<const CleanProfile* const> pixels);

/// Coordinatewise median per crop; an even count averages the two middle
/// values. Throws DataError naming any crop with fewer than `min_support`
/// seeds, or on ragged vectors.
MedianSet build_median_profiles(const std::vector<std::pair<SpectralEmbedding, CropLabel>>& seeds,
                                std::size_t min_support);

/// Median of a sample; even sizes average the two middle order statistics.
double median_of(std::vector<double> values);

/// <a,b> / (|a| |b|). Throws DataError on a zero-norm vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Cosine of the mean-centred vectors. Throws DataError on a constant vector.
double pearson_correlation(std::span<const double> a, std::span<const double> b);

double manhattan_distance(std::span<const double> a, std::span<const double> b);

/// The three scores; cosine and pearson are empty where their error cases
/// apply. Throws DataError on unequal lengths or length < 2.
struct DistanceScores {
  std::optional<double> cosine_sim;
  std::optional<double> pearson_r;
  double manhattan = 0.0;
};
DistanceScores distance_scores(std::span<const double> a, std::span<const double> b);

/// One vote per metric for the nearest median (max cosine, max pearson, min
/// manhattan). A metric abstains on its error cases or when the best two
/// scores tie within 1e-12. CONFIRMED iff at least two votes equal `claimed`.
/// Throws DataError when fewer than two crops have medians.
Verdict verify_plot(const SpectralEmbedding& embedding, const MedianSet& medians, const CropLabel& claimed);

}  // namespace gtclean
