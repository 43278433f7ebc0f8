#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gtclean/core.hpp"
#include "gtclean/ingest.hpp"

namespace gtclean {

/// reflectance = gain * v(t) + offset for one band.
struct BandMap {
  double gain = 0.0;
  double offset = 0.0;
};

/// Double-logistic NDVI phenology and its per-band reflectance maps.
struct PhenologyParams {
  double base = 0.15;           // v_b
  double amplitude = 0.55;      // v_a
  double green_up_day = 40.0;   // S
  double green_up_rate = 0.15;  // m_S
  double senescence_day = 120.0;  // A
  double senescence_rate = 0.12;  // m_A
  std::array<BandMap, kBandCount> bands{};

  /// Throws ConfigError when a documented range is violated.
  void validate(int season_end_day) const;
};

/// Band maps whose NIR/RED pair reproduces NDVI = v exactly:
/// NIR = s(1 + v), RED = s(1 - v).
std::array<BandMap, kBandCount> ndvi_preserving_bands(double scale, BandMap green, BandMap blue, BandMap swir2);

struct CropSpec {
  std::string name;
  PhenologyParams params;
};

/// Built-in mustard, paddy and wheat signatures.
std::vector<CropSpec> default_crop_specs();

/// Constant-NDVI signatures used for injected corruption.
PhenologyParams non_ag_signature();
PhenologyParams perennial_signature();

struct NoiseSpec {
  double mislabel_rate = 0.0;
  double non_ag_rate = 0.0;
  double perennial_rate = 0.0;
  double boundary_pixel_rate = 0.0;
  double cloud_rate = 0.0;
  double multi_crop_polygon_rate = 0.0;
  double reflectance_noise_sd = 0.0;

  void validate() const;
};

struct SynthSpec {
  std::vector<CropSpec> crops = default_crop_specs();
  int plots_per_crop = 200;
  int pixels_per_plot = 20;
  NoiseSpec noise;
  int season_start_day = 0;
  int season_end_day = 180;
  int acquisition_step_days = 5;
  /// Expert-verified seed plots emitted per crop.
  int seed_plots_per_crop = 10;
  std::vector<std::string> districts = {"D1", "D2", "D3", "D4"};
  int season_year = 2024;
  std::uint64_t seed = 0;
};

enum class TrueCondition { Crop, NonAg, Perennial, MultiCrop };

struct TruthEntry {
  TrueCondition condition = TrueCondition::Crop;
  /// Set when condition is Crop.
  std::string crop;

  /// Crop name, or NON_AG / PERENNIAL / MULTI_CROP.
  std::string to_string() const;
};

struct SynthDataset {
  std::vector<PlotRecord> plots;
  std::vector<PixelProfile> pixels;
  std::vector<MaskLayer> masks;
  std::map<std::string, TruthEntry> truth;
  std::vector<std::pair<std::string, std::string>> seeds;  // plot_id, verified crop
  /// Pixels mixed with the non-agricultural signature.
  std::vector<std::string> boundary_pixels;
};

/// v(t) = v_b + v_a (1/(1+exp(-m_S(t-S))) - 1/(1+exp(-m_A(t-A)))).
double phenology_value(const PhenologyParams& p, double day);
std::vector<double> phenology_curve(const PhenologyParams& p, const TimeGrid& grid);

/// Deterministic dataset with corruption applied, in order, to disjoint
/// plot subsets: non-agricultural, perennial, multi-crop, then mislabelled.
/// Subset sizes are round(rate * total plots) picked by one seeded shuffle.
SynthDataset generate_dataset(const SynthSpec& spec);

/// Writes plots.geojson, pixels.csv, masks.geojson, truth.csv, seeds.csv.
void write_synth_files(const SynthDataset& data, const std::filesystem::path& dir);

std::map<std::string, TruthEntry> parse_truth_file(std::istream& in);

}  // namespace gtclean
