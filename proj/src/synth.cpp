#include "gtclean/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gtclean/rng.hpp"

namespace gtclean {
namespace {

constexpr double kPlotSide = 0.002;   // degrees, roughly 200 m
constexpr double kPlotPitch = 0.0025;
constexpr double kOriginLon = 77.0;
constexpr double kOriginLat = 25.0;

std::size_t rounded_count(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 0.5));
}

std::string padded_id(const char* prefix, std::size_t value, std::size_t width) {
  std::string digits = std::to_string(value);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

void check_rate(double r, const char* name) {
  if (!(r >= 0.0 && r <= 1.0)) throw ConfigError(std::string("noise rate ") + name + " must be in [0, 1]");
}

double band_value(const PhenologyParams& p, Band b, double v) {
  const BandMap& m = p.bands[band_index(b)];
  return m.gain * v + m.offset;
}

}  // namespace

void PhenologyParams::validate(int season_end_day) const {
  if (!(base >= 0.0 && base <= 0.3)) throw ConfigError("phenology base NDVI must be in [0, 0.3]");
  if (!(amplitude >= 0.2 && amplitude <= 0.7)) throw ConfigError("phenology amplitude must be in [0.2, 0.7]");
  if (!(green_up_day < senescence_day)) throw ConfigError("green-up day must precede senescence day");
  if (green_up_day < 0.0 || senescence_day > season_end_day) throw ConfigError("phenology days fall outside the season");
  for (Band b : kBands) {
    for (double v : {base, base + amplitude}) {
      const double r = band_value(*this, b, v);
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("band map produces reflectance outside [0, 1]");
    }
  }
}

std::array<BandMap, kBandCount> ndvi_preserving_bands(double scale, BandMap green, BandMap blue, BandMap swir2) {
  std::array<BandMap, kBandCount> maps{};
  maps[band_index(Band::Red)] = {-scale, scale};
  maps[band_index(Band::Green)] = green;
  maps[band_index(Band::Blue)] = blue;
  maps[band_index(Band::Nir)] = {scale, scale};
  maps[band_index(Band::Swir2)] = swir2;
  return maps;
}

std::vector<CropSpec> default_crop_specs() {
  PhenologyParams mustard;
  mustard.base = 0.15;
  mustard.amplitude = 0.55;
  mustard.green_up_day = 40;
  mustard.green_up_rate = 0.15;
  mustard.senescence_day = 120;
  mustard.senescence_rate = 0.12;
  mustard.bands = ndvi_preserving_bands(0.24, {0.02, 0.06}, {-0.02, 0.05}, {-0.12, 0.22});

  PhenologyParams paddy;
  paddy.base = 0.20;
  paddy.amplitude = 0.55;
  paddy.green_up_day = 70;
  paddy.green_up_rate = 0.12;
  paddy.senescence_day = 155;
  paddy.senescence_rate = 0.10;
  paddy.bands = ndvi_preserving_bands(0.20, {0.03, 0.07}, {-0.01, 0.04}, {-0.10, 0.18});

  PhenologyParams wheat;
  wheat.base = 0.12;
  wheat.amplitude = 0.62;
  wheat.green_up_day = 55;
  wheat.green_up_rate = 0.10;
  wheat.senescence_day = 140;
  wheat.senescence_rate = 0.14;
  wheat.bands = ndvi_preserving_bands(0.22, {0.01, 0.08}, {-0.02, 0.06}, {-0.14, 0.25});

  return {{"mustard", mustard}, {"paddy", paddy}, {"wheat", wheat}};
}

PhenologyParams non_ag_signature() {
  PhenologyParams p;
  p.base = 0.1;
  p.amplitude = 0.0;
  p.bands = ndvi_preserving_bands(0.25, {0.0, 0.12}, {0.0, 0.10}, {0.0, 0.30});
  return p;
}

PhenologyParams perennial_signature() {
  PhenologyParams p;
  p.base = 0.6;
  p.amplitude = 0.0;
  p.bands = ndvi_preserving_bands(0.18, {0.0, 0.07}, {0.0, 0.04}, {0.0, 0.10});
  return p;
}

void NoiseSpec::validate() const {
  check_rate(mislabel_rate, "mislabel_rate");
  check_rate(non_ag_rate, "non_ag_rate");
  check_rate(perennial_rate, "perennial_rate");
  check_rate(boundary_pixel_rate, "boundary_pixel_rate");
  check_rate(cloud_rate, "cloud_rate");
  check_rate(multi_crop_polygon_rate, "multi_crop_polygon_rate");
  if (!(reflectance_noise_sd >= 0.0)) throw ConfigError("reflectance_noise_sd must be non-negative");
}

std::string TruthEntry::to_string() const {
  switch (condition) {
    case TrueCondition::Crop: return crop;
    case TrueCondition::NonAg: return "NON_AG";
    case TrueCondition::Perennial: return "PERENNIAL";
    case TrueCondition::MultiCrop: return "MULTI_CROP";
  }
  return "?";
}

double phenology_value(const PhenologyParams& p, double day) {
  const double rise = 1.0 / (1.0 + std::exp(-p.green_up_rate * (day - p.green_up_day)));
  const double fall = 1.0 / (1.0 + std::exp(-p.senescence_rate * (day - p.senescence_day)));
  return p.base + p.amplitude * (rise - fall);
}

std::vector<double> phenology_curve(const PhenologyParams& p, const TimeGrid& grid) {
  std::vector<double> out(static_cast<std::size_t>(grid.n_steps));
  for (int t = 0; t < grid.n_steps; ++t) out[static_cast<std::size_t>(t)] = phenology_value(p, grid.day(t));
  return out;
}

SynthDataset generate_dataset(const SynthSpec& spec) {
  if (spec.crops.empty() || spec.plots_per_crop <= 0 || spec.pixels_per_plot <= 0) {
    throw ConfigError("synthetic spec needs at least one crop, plot and pixel");
  }
  if (spec.acquisition_step_days <= 0 || spec.season_end_day <= spec.season_start_day) {
    throw ConfigError("synthetic season and acquisition step must be positive");
  }
  if (spec.districts.empty()) throw ConfigError("synthetic spec needs at least one district");
  spec.noise.validate();
  for (const CropSpec& c : spec.crops) c.params.validate(spec.season_end_day);

  const std::size_t n_crops = spec.crops.size();
  const std::size_t n_plots = n_crops * static_cast<std::size_t>(spec.plots_per_crop);
  const auto ppp = static_cast<std::size_t>(spec.pixels_per_plot);
  const NoiseSpec& noise = spec.noise;

  const std::size_t n_non_ag = rounded_count(noise.non_ag_rate, n_plots);
  const std::size_t n_perennial = rounded_count(noise.perennial_rate, n_plots);
  const std::size_t n_multi = rounded_count(noise.multi_crop_polygon_rate, n_plots);
  const std::size_t n_mislabel = rounded_count(noise.mislabel_rate, n_plots);
  if (n_non_ag + n_perennial + n_multi + n_mislabel > n_plots) {
    throw ConfigError("corruption rates select more plots than exist");
  }
  if (n_mislabel > 0 && n_crops < 2) throw ConfigError("mislabelling needs at least two crops");

  // Corruption subsets come from one shuffle, taken in a fixed order.
  std::vector<std::size_t> order(n_plots);
  std::iota(order.begin(), order.end(), 0);
  Rng corrupt_rng(derive_seed(spec.seed, "synth.corruption"));
  corrupt_rng.shuffle(std::span<std::size_t>(order));
  std::vector<TrueCondition> condition(n_plots, TrueCondition::Crop);
  std::vector<bool> mislabelled(n_plots, false);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < n_non_ag; ++i) condition[order[cursor++]] = TrueCondition::NonAg;
  for (std::size_t i = 0; i < n_perennial; ++i) condition[order[cursor++]] = TrueCondition::Perennial;
  for (std::size_t i = 0; i < n_multi; ++i) condition[order[cursor++]] = TrueCondition::MultiCrop;
  for (std::size_t i = 0; i < n_mislabel; ++i) mislabelled[order[cursor++]] = true;

  const PhenologyParams soil = non_ag_signature();
  const PhenologyParams perennial = perennial_signature();

  std::vector<int> days;
  for (int d = spec.season_start_day; d <= spec.season_end_day; d += spec.acquisition_step_days) days.push_back(d);

  const auto grid_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_plots))));
  const std::size_t grid_rows = (n_plots + grid_cols - 1) / grid_cols;
  std::size_t pix_rows = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(ppp))));
  while (ppp % pix_rows != 0) --pix_rows;
  const std::size_t pix_cols = ppp / pix_rows;
  const std::size_t id_width = std::max<std::size_t>(4, std::to_string(n_plots).size());

  SynthDataset out;
  Rng label_rng(derive_seed(spec.seed, "synth.labels"));
  const std::uint64_t pixel_seed = derive_seed(spec.seed, "synth.pixels");
  const std::uint64_t boundary_seed = derive_seed(spec.seed, "synth.boundary");

  for (std::size_t i = 0; i < n_plots; ++i) {
    const std::size_t crop_idx = i / static_cast<std::size_t>(spec.plots_per_crop);
    const CropSpec& crop = spec.crops[crop_idx];
    const std::size_t other_idx = (crop_idx + 1) % n_crops;

    PlotRecord plot;
    plot.plot_id = padded_id("p", i + 1, id_width);
    const double x0 = kOriginLon + static_cast<double>(i % grid_cols) * kPlotPitch;
    const double y0 = kOriginLat + static_cast<double>(i / grid_cols) * kPlotPitch;
    plot.polygon = {{x0, y0}, {x0 + kPlotSide, y0}, {x0 + kPlotSide, y0 + kPlotSide}, {x0, y0 + kPlotSide}};
    plot.district = spec.districts[i % spec.districts.size()];
    plot.season_year = spec.season_year;
    plot.claimed_label = CropLabel::crop(crop.name);
    if (mislabelled[i]) {
      std::size_t wrong = label_rng.below(n_crops - 1);
      if (wrong >= crop_idx) ++wrong;
      plot.claimed_label = CropLabel::crop(spec.crops[wrong].name);
    }

    TruthEntry truth;
    truth.condition = condition[i];
    if (truth.condition == TrueCondition::Crop) truth.crop = crop.name;
    out.truth.emplace(plot.plot_id, truth);

    // Pixel roles inside the plot.
    std::vector<const PhenologyParams*> signature(ppp, &crop.params);
    std::vector<bool> boundary(ppp, false);
    if (condition[i] == TrueCondition::NonAg) std::fill(signature.begin(), signature.end(), &soil);
    if (condition[i] == TrueCondition::Perennial) std::fill(signature.begin(), signature.end(), &perennial);
    if (condition[i] == TrueCondition::Crop || condition[i] == TrueCondition::MultiCrop) {
      Rng rng(derive_seed(boundary_seed, static_cast<std::uint64_t>(i)));
      std::vector<std::size_t> slots(ppp);
      std::iota(slots.begin(), slots.end(), 0);
      if (condition[i] == TrueCondition::MultiCrop) {
        rng.shuffle(std::span<std::size_t>(slots));
        for (std::size_t k = 0; k < rounded_count(0.5, ppp); ++k) signature[slots[k]] = &spec.crops[other_idx].params;
      }
      rng.shuffle(std::span<std::size_t>(slots));
      for (std::size_t k = 0; k < rounded_count(noise.boundary_pixel_rate, ppp); ++k) boundary[slots[k]] = true;
    }

    for (std::size_t k = 0; k < ppp; ++k) {
      PixelProfile px;
      px.pixel_id = plot.plot_id + "_" + padded_id("", k, 2);
      px.plot_id = plot.plot_id;
      px.position = PixelPosition{static_cast<int>(k / pix_cols), static_cast<int>(k % pix_cols)};
      Rng rng(derive_seed(pixel_seed, static_cast<std::uint64_t>(i * ppp + k)));
      for (int day : days) {
        const bool cloudy = rng.uniform() < noise.cloud_rate;
        const double v = phenology_value(*signature[k], day);
        const double v_soil = phenology_value(soil, day);
        for (Band b : kBands) {
          double r = band_value(*signature[k], b, v);
          if (boundary[k]) r = 0.5 * r + 0.5 * band_value(soil, b, v_soil);
          r += noise.reflectance_noise_sd * rng.normal();
          const double haze = 0.4 + 0.3 * rng.uniform();
          if (cloudy) r = haze;
          px.band(b).push_back({day, std::clamp(r, 0.0, 1.0), cloudy});
        }
      }
      if (boundary[k]) out.boundary_pixels.push_back(px.pixel_id);
      plot.pixel_ids.push_back(px.pixel_id);
      out.pixels.push_back(std::move(px));
    }
    out.plots.push_back(std::move(plot));
  }

  // Road strips run through the gaps between plot columns.
  MaskLayer roads;
  roads.kind = MaskKind::Road;
  const double margin = (kPlotPitch - kPlotSide) / 5.0;
  const double y_lo = kOriginLat;
  const double y_hi = kOriginLat + static_cast<double>(grid_rows - 1) * kPlotPitch + kPlotSide;
  for (std::size_t c = 0; c + 1 < grid_cols; ++c) {
    const double xa = kOriginLon + static_cast<double>(c) * kPlotPitch + kPlotSide + margin;
    const double xb = kOriginLon + static_cast<double>(c + 1) * kPlotPitch - margin;
    roads.polygons.push_back({{xa, y_lo}, {xb, y_lo}, {xb, y_hi}, {xa, y_hi}});
  }
  if (!roads.polygons.empty()) out.masks.push_back(std::move(roads));

  // Expert seeds: correctly labelled, uncorrupted plots.
  Rng seed_rng(derive_seed(spec.seed, "synth.seeds"));
  for (std::size_t c = 0; c < n_crops; ++c) {
    std::vector<std::string> candidates;
    for (std::size_t i = c * static_cast<std::size_t>(spec.plots_per_crop);
         i < (c + 1) * static_cast<std::size_t>(spec.plots_per_crop); ++i) {
      if (condition[i] == TrueCondition::Crop && !mislabelled[i]) candidates.push_back(out.plots[i].plot_id);
    }
    seed_rng.shuffle(std::span<std::string>(candidates));
    const std::size_t take = std::min(candidates.size(), static_cast<std::size_t>(std::max(0, spec.seed_plots_per_crop)));
    std::vector<std::string> chosen(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(chosen.begin(), chosen.end());
    for (const std::string& id : chosen) out.seeds.emplace_back(id, spec.crops[c].name);
  }
  return out;
}

void write_synth_files(const SynthDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw DataError("cannot write '" + (dir / name).string() + "'");
    return f;
  };
  {
    auto f = open("plots.geojson");
    std::vector<PlotRecord> bare = data.plots;
    for (PlotRecord& p : bare) p.pixel_ids.clear();
    write_plots(f, bare);
  }
  {
    auto f = open("pixels.csv");
    write_pixel_series(f, data.pixels);
  }
  {
    auto f = open("masks.geojson");
    write_masks(f, data.masks);
  }
  {
    auto f = open("truth.csv");
    f << "plot_id,true_condition\n";
    for (const auto& [id, t] : data.truth) f << id << ',' << t.to_string() << '\n';
  }
  {
    auto f = open("seeds.csv");
    f << "plot_id,verified_crop\n";
    for (const auto& [id, crop] : data.seeds) f << id << ',' << crop << '\n';
  }
}

std::map<std::string, TruthEntry> parse_truth_file(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"plot_id", "true_condition"}) {
    throw ParseError("truth file: header must be plot_id,true_condition");
  }
  std::map<std::string, TruthEntry> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2 || cells[0].empty() || cells[1].empty()) {
      throw ParseError("truth file: malformed row " + std::to_string(line_no));
    }
    TruthEntry t;
    if (cells[1] == "NON_AG") {
      t.condition = TrueCondition::NonAg;
    } else if (cells[1] == "PERENNIAL") {
      t.condition = TrueCondition::Perennial;
    } else if (cells[1] == "MULTI_CROP") {
      t.condition = TrueCondition::MultiCrop;
    } else {
      t.condition = TrueCondition::Crop;
      t.crop = cells[1];
    }
    if (!out.emplace(cells[0], t).second) throw ParseError("truth file: duplicate plot_id, row " + std::to_string(line_no));
  }
  return out;
}

}  // namespace gtclean
