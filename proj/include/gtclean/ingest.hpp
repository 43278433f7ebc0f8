#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gtclean/core.hpp"

namespace gtclean {

/// Referentially consistent input set. Every plot pixel id resolves to a
/// profile whose plot_id points back at the plot.
struct Dataset {
  std::map<std::string, PlotRecord> plots;
  std::map<std::string, PixelProfile> pixels;
  std::vector<MaskLayer> masks;
  TimeGrid grid;
};

struct JoinResult {
  Dataset dataset;
  /// NO_PIXELS hygiene eliminations, kept apart from the L1 funnel.
  std::vector<EliminationRecord> eliminations;
};

struct SeedEntry {
  std::string plot_id;
  CropLabel verified;
};

/// GeoJSON FeatureCollection of Polygon features with properties
/// plot_id, crop, district, season_year and optionally pixel_ids.
std::vector<PlotRecord> parse_plots(std::istream& in, const CropSet& crops);

/// GeoJSON FeatureCollection of Polygon or MultiPolygon features with a
/// "kind" property. Features are grouped into one layer per kind.
std::vector<MaskLayer> parse_masks(std::istream& in);

/// CSV `pixel_id,plot_id,day,red,green,blue,nir,swir2,cloudy[,row,col]`.
std::vector<PixelProfile> parse_pixel_series(std::istream& in);

/// CSV `plot_id,verified_crop`.
std::vector<SeedEntry> parse_seed_file(std::istream& in, const CropSet& crops);

/// Enforces referential integrity. Plots whose pixel set is empty after
/// resolution are dropped with a NO_PIXELS record. Throws DataError on any
/// dangling pixel reference or duplicate id.
JoinResult join_and_check(std::vector<PlotRecord> plots, std::vector<PixelProfile> pixels,
                          std::vector<MaskLayer> masks, const TimeGrid& grid);

void write_plots(std::ostream& out, const std::vector<PlotRecord>& plots);
void write_masks(std::ostream& out, const std::vector<MaskLayer>& masks);
void write_pixel_series(std::ostream& out, const std::vector<PixelProfile>& pixels);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Splits one CSV line on commas and trims whitespace and a trailing CR.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace gtclean
