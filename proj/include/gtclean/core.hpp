#pragma once

#include <array>
#include <compare>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gtclean/geometry.hpp"

namespace gtclean {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base error. `code()` is a short machine-readable tag printed by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error("PARSE", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("CONFIG", message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("DATA", message) {}
};

// ---------------------------------------------------------------------------
// Bands
// ---------------------------------------------------------------------------

enum class Band { Red = 0, Green = 1, Blue = 2, Nir = 3, Swir2 = 4 };

inline constexpr std::size_t kBandCount = 5;
inline constexpr std::array<Band, kBandCount> kBands{Band::Red, Band::Green, Band::Blue,
                                                     Band::Nir, Band::Swir2};

constexpr std::size_t band_index(Band b) { return static_cast<std::size_t>(b); }
std::string_view band_name(Band b);

/// Fixed four-decimal rendering used in audit details and reports.
std::string format_fraction(double value);

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

/// A claimed or verified crop label. Sentinels NON_AG and UNKNOWN are never
/// classifier targets.
class CropLabel {
 public:
  enum class Kind { Crop, NonAg, Unknown };

  CropLabel() : kind_(Kind::Unknown) {}
  static CropLabel crop(std::string name) { return CropLabel(Kind::Crop, std::move(name)); }
  static CropLabel non_ag() { return CropLabel(Kind::NonAg, {}); }
  static CropLabel unknown() { return CropLabel(Kind::Unknown, {}); }

  Kind kind() const noexcept { return kind_; }
  bool is_crop() const noexcept { return kind_ == Kind::Crop; }

  /// Crop name, or "NON_AG" / "UNKNOWN" for the sentinels.
  std::string name() const;

  friend bool operator==(const CropLabel&, const CropLabel&) = default;
  friend auto operator<=>(const CropLabel&, const CropLabel&) = default;

 private:
  CropLabel(Kind k, std::string name) : kind_(k), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
};

/// The run's configured crop vocabulary. Names are kept sorted so class
/// indices follow lexicographic order.
class CropSet {
 public:
  CropSet() = default;
  explicit CropSet(std::vector<std::string> names);

  /// Maps a raw label string. Matching is case-insensitive and ignores
  /// surrounding whitespace; "NON_AG" maps to the sentinel and anything else
  /// outside the set maps to UNKNOWN.
  CropLabel parse(std::string_view raw) const;

  bool contains(const CropLabel& label) const;
  std::size_t index_of(const CropLabel& label) const;
  CropLabel at(std::size_t index) const { return CropLabel::crop(names_.at(index)); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// Time series
// ---------------------------------------------------------------------------

struct TimeGrid {
  int start_day = 0;
  int step_days = 10;
  int n_steps = 19;

  int day(int step) const { return start_day + step * step_days; }
  int end_day() const { return day(n_steps - 1); }

  /// Throws ConfigError unless step_days > 0 and n_steps >= 2.
  void validate() const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

struct BandSample {
  int day = 0;
  double reflectance = 0.0;
  bool cloudy = false;

  friend bool operator==(const BandSample&, const BandSample&) = default;
};

struct PixelPosition {
  int row = 0;
  int col = 0;

  friend bool operator==(const PixelPosition&, const PixelPosition&) = default;
};

struct PixelProfile {
  std::string pixel_id;
  std::string plot_id;
  std::array<std::vector<BandSample>, kBandCount> bands;
  std::optional<PixelPosition> position;

  const std::vector<BandSample>& band(Band b) const { return bands[band_index(b)]; }
  std::vector<BandSample>& band(Band b) { return bands[band_index(b)]; }

  /// Samples per band (bands share one day sequence).
  std::size_t sample_count() const { return bands[0].size(); }

  /// Invariant problems: unequal band lengths, non-increasing days, day
  /// sequences that differ between bands, negative reflectance.
  std::vector<std::string> violations() const;

  friend bool operator==(const PixelProfile&, const PixelProfile&) = default;
};

// ---------------------------------------------------------------------------
// Plots and masks
// ---------------------------------------------------------------------------

struct PlotRecord {
  std::string plot_id;
  Ring polygon;
  CropLabel claimed_label;
  std::string district;
  int season_year = 0;
  std::vector<std::string> pixel_ids;

  friend bool operator==(const PlotRecord&, const PlotRecord&) = default;
};

/// Every invariant violation of the plot; empty means valid. Never throws.
std::vector<std::string> validate_plot(const PlotRecord& plot);

enum class MaskKind { Road, Built, NonAg };

std::string_view to_string(MaskKind kind);
MaskKind parse_mask_kind(std::string_view text);

struct MaskLayer {
  MaskKind kind = MaskKind::Road;
  std::vector<Ring> polygons;
};

// ---------------------------------------------------------------------------
// Elimination audit trail
// ---------------------------------------------------------------------------

/// PRE covers ingest/preprocess hygiene that runs before L1.
enum class Level { Pre, L1, L2, L3, Verify };

enum class Reason {
  NoPixels,
  TooSparse,
  UnknownLabel,
  MaskOverlap,
  PlotOverlap,
  L2LowNdvi,
  L2PlotDecimated,
  L3Flat,
  L3Noisy,
  L3PlotDecimated,
  VerifyFlagged,
};

enum class SubjectKind { Plot, Pixel };

std::string_view to_string(Level level);
std::string_view to_string(Reason reason);
std::string_view to_string(SubjectKind kind);
Level parse_level(std::string_view text);
Reason parse_reason(std::string_view text);

/// The level a reason code belongs to; each level has a closed set.
Level level_of(Reason reason);

struct EliminationRecord {
  std::string subject_id;
  SubjectKind subject = SubjectKind::Plot;
  Level level = Level::Pre;
  Reason reason = Reason::NoPixels;
  std::string detail;

  friend bool operator==(const EliminationRecord&, const EliminationRecord&) = default;
};

}  // namespace gtclean
