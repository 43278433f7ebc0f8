#include "gtclean/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gtclean/fcc.hpp"
#include "gtclean/rng.hpp"

namespace gtclean {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string> kCleanLevels{"L1", "L2", "L3"};

// --------------------------------------------------------------------------
// config plumbing

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void take(const json& obj, const char* key, T& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + (where.empty() ? std::string(key) : where + "." + key) + "' has the wrong type");
  }
}

void take_path(const json& obj, const char* key, fs::path& dst, const fs::path& base) {
  std::string text;
  take(obj, key, text, "");
  if (text.empty()) return;
  fs::path p(text);
  dst = p.is_absolute() ? p : base / p;
}

Smoother parse_smoother(const std::string& s) {
  if (s == "moving_average") return Smoother::MovingAverage;
  if (s == "savitzky_golay") return Smoother::SavitzkyGolay;
  throw ConfigError("preprocess.smoother must be moving_average or savitzky_golay");
}

std::string smoother_name(Smoother s) {
  return s == Smoother::MovingAverage ? "moving_average" : "savitzky_golay";
}

void check_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1]");
}

ordered_json forest_json(const ForestConfig& f) {
  return {{"n_trees", f.n_trees},
          {"max_depth", f.max_depth},
          {"min_samples_leaf", f.min_samples_leaf},
          {"features_per_split", f.features_per_split},
          {"bootstrap", f.bootstrap},
          {"threads", f.threads}};
}

ordered_json config_to_json(const RunConfig& c) {
  auto path = [](const fs::path& p) { return p.generic_string(); };
  const NoiseSpec& n = c.synth.noise;
  return {
      {"plots", path(c.plots)},
      {"pixels", path(c.pixels)},
      {"masks", path(c.masks)},
      {"seeds", path(c.seeds)},
      {"truth", path(c.truth)},
      {"output_dir", path(c.output_dir)},
      {"crops", c.crops},
      {"grid", {{"start_day", c.grid.start_day}, {"step_days", c.grid.step_days}, {"n_steps", c.grid.n_steps}}},
      {"preprocess",
       {{"smoother", smoother_name(c.preprocess.smoother)},
        {"smooth_window", c.preprocess.smooth_window},
        {"min_sample_fraction", c.preprocess.min_sample_fraction}}},
      {"l1",
       {{"mask_overlap_max", c.l1.mask_overlap_max},
        {"plot_overlap_max", c.l1.plot_overlap_max},
        {"grid_resolution", c.l1.grid_resolution}}},
      {"ndvi_max_min", c.ndvi_max_min},
      {"plot_survival_min", c.plot_survival_min},
      {"flat_var_max", c.flat_var_max},
      {"rough_min", c.rough_min},
      {"kmeans", {{"k", c.kmeans.k}, {"max_iter", c.kmeans.max_iter}, {"n_init", c.kmeans.n_init}}},
      {"min_seed_support", c.min_seed_support},
      {"forest", forest_json(c.forest)},
      {"test_fraction", c.test_fraction},
      {"seed", c.seed},
      {"levels", c.levels},
      {"fcc", {{"size", c.fcc_size}}},
      {"synth",
       {{"plots_per_crop", c.synth.plots_per_crop},
        {"pixels_per_plot", c.synth.pixels_per_plot},
        {"season_start_day", c.synth.season_start_day},
        {"season_end_day", c.synth.season_end_day},
        {"acquisition_step_days", c.synth.acquisition_step_days},
        {"seed_plots_per_crop", c.synth.seed_plots_per_crop},
        {"districts", c.synth.districts},
        {"season_year", c.synth.season_year},
        {"noise",
         {{"mislabel_rate", n.mislabel_rate},
          {"non_ag_rate", n.non_ag_rate},
          {"perennial_rate", n.perennial_rate},
          {"boundary_pixel_rate", n.boundary_pixel_rate},
          {"cloud_rate", n.cloud_rate},
          {"multi_crop_polygon_rate", n.multi_crop_polygon_rate},
          {"reflectance_noise_sd", n.reflectance_noise_sd}}}}},
  };
}

// --------------------------------------------------------------------------
// small I/O helpers

std::ifstream open_input(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(what + " file '" + path.string() + "' cannot be opened");
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::vector<std::string>& header,
                                               const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(what + " '" + path.string() + "' not found");
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != header) {
    throw ParseError(what + " '" + path.string() + "' has an unexpected header");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw ParseError(what + " '" + path.string() + "' has a malformed row");
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string vote_text(const std::optional<CropLabel>& v) { return v ? v->name() : "ABSTAIN"; }

std::size_t level_rank(const std::string& level) {
  const auto it = std::find(kCleanLevels.begin(), kCleanLevels.end(), level);
  return it == kCleanLevels.end() ? 0 : static_cast<std::size_t>(it - kCleanLevels.begin()) + 1;
}

std::vector<std::string> cascade_pixels(const std::vector<CleanProfile>& profiles,
                                        const std::vector<EliminationRecord>& plot_records,
                                        std::vector<EliminationRecord>& out, std::vector<CleanProfile>* kept) {
  std::map<std::string, const EliminationRecord*> dead;
  for (const auto& r : plot_records) dead.emplace(r.subject_id, &r);
  std::vector<std::string> removed;
  for (const CleanProfile& p : profiles) {
    const auto it = dead.find(p.plot_id);
    if (it == dead.end()) {
      if (kept) kept->push_back(p);
      continue;
    }
    out.push_back({p.pixel_id, SubjectKind::Pixel, it->second->level, it->second->reason, "plot " + p.plot_id + " eliminated"});
    removed.push_back(p.pixel_id);
  }
  return removed;
}

std::set<std::string> plot_ids_of(const std::vector<CleanProfile>& profiles) {
  std::set<std::string> ids;
  for (const auto& p : profiles) ids.insert(p.plot_id);
  return ids;
}

LevelCounts count_level(const std::string& level, Level tag, std::size_t in_plots, std::size_t in_pixels,
                        std::size_t kept_plots, std::size_t kept_pixels,
                        const std::vector<EliminationRecord>& records) {
  LevelCounts c;
  c.level = level;
  c.input_plots = in_plots;
  c.input_pixels = in_pixels;
  c.retained_plots = kept_plots;
  c.retained_pixels = kept_pixels;
  std::size_t plots = 0, pixels = 0;
  for (const auto& r : records) {
    if (r.level != tag) continue;
    auto& slot = c.by_reason[std::string(to_string(r.reason))];
    if (r.subject == SubjectKind::Plot) {
      ++slot.first;
      ++plots;
    } else {
      ++slot.second;
      ++pixels;
    }
  }
  if (kept_plots + plots != in_plots || kept_pixels + pixels != in_pixels) {
    throw std::logic_error("elimination records do not reconcile at level " + level);
  }
  return c;
}

std::vector<std::vector<double>> ndvi_rows(const std::vector<CleanProfile>& profiles) {
  std::vector<std::vector<double>> rows;
  rows.reserve(profiles.size());
  for (const auto& p : profiles) rows.push_back(p.ndvi);
  return rows;
}

std::size_t distinct_rows(std::vector<std::vector<double>> rows) {
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

std::map<std::string, std::vector<const CleanProfile*>> group_by_plot(const std::vector<CleanProfile>& profiles) {
  std::map<std::string, std::vector<const CleanProfile*>> out;
  for (const auto& p : profiles) out[p.plot_id].push_back(&p);
  return out;
}

std::string fixed_text(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string year_text(const std::set<int>& years) {
  return years.size() == 1 ? std::to_string(*years.begin()) : "ALL";
}

}  // namespace

// --------------------------------------------------------------------------
// config

void RunConfig::validate() const {
  grid.validate();
  CropSet check(crops);
  if (check.size() < 2) throw ConfigError("at least two crops are required");
  if (preprocess.smooth_window < 1 || preprocess.smooth_window % 2 == 0) {
    throw ConfigError("preprocess.smooth_window must be a positive odd integer");
  }
  if (preprocess.smooth_window > grid.n_steps) throw ConfigError("preprocess.smooth_window exceeds grid.n_steps");
  check_fraction(preprocess.min_sample_fraction, "preprocess.min_sample_fraction");
  l1.validate();
  if (!(ndvi_max_min >= -1.0 && ndvi_max_min <= 1.0)) throw ConfigError("ndvi_max_min must be in [-1, 1]");
  check_fraction(plot_survival_min, "plot_survival_min");
  if (!(flat_var_max >= 0.0)) throw ConfigError("flat_var_max must be non-negative");
  if (!(rough_min >= 0.0)) throw ConfigError("rough_min must be non-negative");
  if (kmeans.k < 1) throw ConfigError("kmeans.k must be at least 1");
  if (kmeans.max_iter < 1) throw ConfigError("kmeans.max_iter must be at least 1");
  if (kmeans.n_init < 1) throw ConfigError("kmeans.n_init must be at least 1");
  if (min_seed_support < 1) throw ConfigError("min_seed_support must be at least 1");
  forest.validate(0);
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
  if (levels.empty()) throw ConfigError("levels must not be empty");
  for (const auto& l : levels) {
    if (std::find(kAllLevels.begin(), kAllLevels.end(), l) == kAllLevels.end()) {
      throw ConfigError("unknown level '" + l + "'");
    }
  }
  if (fcc_size < 1) throw ConfigError("fcc.size must be positive");
}

bool RunConfig::wants(const std::string& level) const {
  return std::find(levels.begin(), levels.end(), level) != levels.end();
}

std::vector<std::string> parse_levels(const std::string& csv) {
  std::vector<std::string> out;
  for (std::string item : split_csv_line(csv)) {
    std::transform(item.begin(), item.end(), item.begin(), [](unsigned char ch) { return std::toupper(ch); });
    if (item.empty()) continue;
    if (std::find(kAllLevels.begin(), kAllLevels.end(), item) == kAllLevels.end()) {
      throw ConfigError("unknown level '" + item + "' (expected UNCLEAN, L1, L2, L3)");
    }
    if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("--levels needs at least one level");
  std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
    return std::find(kAllLevels.begin(), kAllLevels.end(), a) < std::find(kAllLevels.begin(), kAllLevels.end(), b);
  });
  return out;
}

std::string config_json(const RunConfig& config) { return config_to_json(config).dump(2); }

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config file '" + path.string() + "' cannot be opened");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  RunConfig c;
  check_keys(j,
             {"plots", "pixels", "masks", "seeds", "truth", "output_dir", "crops", "grid", "preprocess", "l1",
              "ndvi_max_min", "plot_survival_min", "flat_var_max", "rough_min", "kmeans", "min_seed_support", "forest",
              "test_fraction", "seed", "levels", "fcc", "synth"},
             "");
  take_path(j, "plots", c.plots, base);
  take_path(j, "pixels", c.pixels, base);
  take_path(j, "masks", c.masks, base);
  take_path(j, "seeds", c.seeds, base);
  take_path(j, "truth", c.truth, base);
  take_path(j, "output_dir", c.output_dir, base);
  take(j, "crops", c.crops, "");
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, {"start_day", "step_days", "n_steps"}, "grid");
    take(g, "start_day", c.grid.start_day, "grid");
    take(g, "step_days", c.grid.step_days, "grid");
    take(g, "n_steps", c.grid.n_steps, "grid");
  }
  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    check_keys(p, {"smoother", "smooth_window", "min_sample_fraction"}, "preprocess");
    std::string smoother = smoother_name(c.preprocess.smoother);
    take(p, "smoother", smoother, "preprocess");
    c.preprocess.smoother = parse_smoother(smoother);
    take(p, "smooth_window", c.preprocess.smooth_window, "preprocess");
    take(p, "min_sample_fraction", c.preprocess.min_sample_fraction, "preprocess");
  }
  if (j.contains("l1")) {
    const json& l = j["l1"];
    check_keys(l, {"mask_overlap_max", "plot_overlap_max", "grid_resolution"}, "l1");
    take(l, "mask_overlap_max", c.l1.mask_overlap_max, "l1");
    take(l, "plot_overlap_max", c.l1.plot_overlap_max, "l1");
    take(l, "grid_resolution", c.l1.grid_resolution, "l1");
  }
  take(j, "ndvi_max_min", c.ndvi_max_min, "");
  take(j, "plot_survival_min", c.plot_survival_min, "");
  take(j, "flat_var_max", c.flat_var_max, "");
  take(j, "rough_min", c.rough_min, "");
  if (j.contains("kmeans")) {
    const json& k = j["kmeans"];
    check_keys(k, {"k", "max_iter", "n_init"}, "kmeans");
    take(k, "k", c.kmeans.k, "kmeans");
    take(k, "max_iter", c.kmeans.max_iter, "kmeans");
    take(k, "n_init", c.kmeans.n_init, "kmeans");
  }
  take(j, "min_seed_support", c.min_seed_support, "");
  if (j.contains("forest")) {
    const json& f = j["forest"];
    check_keys(f, {"n_trees", "max_depth", "min_samples_leaf", "features_per_split", "bootstrap", "threads"}, "forest");
    take(f, "n_trees", c.forest.n_trees, "forest");
    take(f, "max_depth", c.forest.max_depth, "forest");
    take(f, "min_samples_leaf", c.forest.min_samples_leaf, "forest");
    take(f, "features_per_split", c.forest.features_per_split, "forest");
    take(f, "bootstrap", c.forest.bootstrap, "forest");
    take(f, "threads", c.forest.threads, "forest");
  }
  take(j, "test_fraction", c.test_fraction, "");
  take(j, "seed", c.seed, "");
  if (j.contains("levels")) {
    std::vector<std::string> levels;
    take(j, "levels", levels, "");
    std::string joined;
    for (const auto& l : levels) joined += (joined.empty() ? "" : ",") + l;
    c.levels = parse_levels(joined);
  }
  if (j.contains("fcc")) {
    check_keys(j["fcc"], {"size"}, "fcc");
    take(j["fcc"], "size", c.fcc_size, "fcc");
  }
  if (j.contains("synth")) {
    const json& s = j["synth"];
    check_keys(s,
               {"plots_per_crop", "pixels_per_plot", "season_start_day", "season_end_day", "acquisition_step_days",
                "seed_plots_per_crop", "districts", "season_year", "noise"},
               "synth");
    take(s, "plots_per_crop", c.synth.plots_per_crop, "synth");
    take(s, "pixels_per_plot", c.synth.pixels_per_plot, "synth");
    take(s, "season_start_day", c.synth.season_start_day, "synth");
    take(s, "season_end_day", c.synth.season_end_day, "synth");
    take(s, "acquisition_step_days", c.synth.acquisition_step_days, "synth");
    take(s, "seed_plots_per_crop", c.synth.seed_plots_per_crop, "synth");
    take(s, "districts", c.synth.districts, "synth");
    take(s, "season_year", c.synth.season_year, "synth");
    if (s.contains("noise")) {
      const json& n = s["noise"];
      check_keys(n,
                 {"mislabel_rate", "non_ag_rate", "perennial_rate", "boundary_pixel_rate", "cloud_rate",
                  "multi_crop_polygon_rate", "reflectance_noise_sd"},
                 "synth.noise");
      NoiseSpec& ns = c.synth.noise;
      take(n, "mislabel_rate", ns.mislabel_rate, "synth.noise");
      take(n, "non_ag_rate", ns.non_ag_rate, "synth.noise");
      take(n, "perennial_rate", ns.perennial_rate, "synth.noise");
      take(n, "boundary_pixel_rate", ns.boundary_pixel_rate, "synth.noise");
      take(n, "cloud_rate", ns.cloud_rate, "synth.noise");
      take(n, "multi_crop_polygon_rate", ns.multi_crop_polygon_rate, "synth.noise");
      take(n, "reflectance_noise_sd", ns.reflectance_noise_sd, "synth.noise");
    }
  }
  return c;
}

// --------------------------------------------------------------------------
// prepare / clean

PreparedData prepare(const RunConfig& config) {
  config.validate();
  if (config.plots.empty() || config.pixels.empty()) throw ConfigError("config needs both 'plots' and 'pixels' paths");
  PreparedData out;
  out.crops = CropSet(config.crops);

  auto plots_in = open_input(config.plots, "plots");
  auto pixels_in = open_input(config.pixels, "pixels");
  std::vector<PlotRecord> plots = parse_plots(plots_in, out.crops);
  std::vector<PixelProfile> pixels = parse_pixel_series(pixels_in);
  std::vector<MaskLayer> masks;
  if (!config.masks.empty()) {
    auto masks_in = open_input(config.masks, "masks");
    masks = parse_masks(masks_in);
  }
  JoinResult joined = join_and_check(std::move(plots), std::move(pixels), std::move(masks), config.grid);
  out.dataset = std::move(joined.dataset);
  out.eliminations = std::move(joined.eliminations);

  std::set<int> days;
  for (const auto& [id, px] : out.dataset.pixels) {
    for (const BandSample& s : px.bands[0]) days.insert(s.day);
  }
  out.n_observable = days.size();

  std::map<std::string, std::size_t> survivors;
  for (const auto& [id, px] : out.dataset.pixels) {
    PreprocessOutcome r = preprocess_pixel(px, config.grid, config.preprocess, out.n_observable);
    out.clouds_removed += r.clouds_removed;
    out.ndvi_degenerate += r.ndvi_degenerate;
    if (r.elimination) out.eliminations.push_back(*r.elimination);
    if (r.clean) {
      ++survivors[r.clean->plot_id];
      out.profiles.push_back(std::move(*r.clean));
    }
  }
  for (const auto& [id, plot] : out.dataset.plots) {
    if (survivors.count(id)) {
      out.plots.push_back(plot);
    } else {
      out.eliminations.push_back({id, SubjectKind::Plot, Level::Pre, Reason::NoPixels, "no pixel survived preprocessing"});
    }
  }
  return out;
}

CleanResult run_clean(const RunConfig& config) {
  std::size_t top = 0;
  for (const auto& l : config.levels) top = std::max(top, level_rank(l));
  if (top == 0) throw ConfigError("clean needs at least one of L1, L2, L3 in --levels");

  CleanResult res;
  res.data = prepare(config);
  PreparedData& data = res.data;
  res.eliminations = data.eliminations;

  const std::size_t raw_plots = std::count_if(data.eliminations.begin(), data.eliminations.end(),
                                              [](const EliminationRecord& r) {
                                                return r.subject == SubjectKind::Plot && r.level == Level::Pre;
                                              }) +
                                data.plots.size();
  res.funnel.push_back(count_level("PRE", Level::Pre, raw_plots, data.dataset.pixels.size(), data.plots.size(),
                                   data.profiles.size(), res.eliminations));

  // L1
  PlotFilterResult l1 = l1_filter(data.plots, data.dataset.masks, config.l1);
  std::vector<CleanProfile> kept1;
  res.eliminations.insert(res.eliminations.end(), l1.eliminations.begin(), l1.eliminations.end());
  cascade_pixels(data.profiles, l1.eliminations, res.eliminations, &kept1);
  res.funnel.push_back(count_level("L1", Level::L1, data.plots.size(), data.profiles.size(), l1.retained.size(),
                                   kept1.size(), res.eliminations));
  res.retained["L1"] = std::move(kept1);
  if (top < 2) return res;

  // L2
  const std::vector<CleanProfile>& in2 = res.retained["L1"];
  PixelFilterResult l2 = l2_filter(in2, config.ndvi_max_min, config.plot_survival_min);
  res.eliminations.insert(res.eliminations.end(), l2.eliminations.begin(), l2.eliminations.end());
  res.funnel.push_back(count_level("L2", Level::L2, plot_ids_of(in2).size(), in2.size(),
                                   plot_ids_of(l2.retained).size(), l2.retained.size(), res.eliminations));
  res.retained["L2"] = std::move(l2.retained);
  if (top < 3) return res;

  // L3
  const std::vector<CleanProfile>& in3 = res.retained["L2"];
  const auto points = ndvi_rows(in3);
  std::vector<CleanProfile> kept3;
  if (!points.empty()) {
    const std::size_t distinct = distinct_rows(points);
    KMeansConfig kc = config.kmeans;
    kc.seed = derive_seed(config.seed, "kmeans");
    kc.k = std::min(kc.k, distinct);
    res.k_used = kc.k;
    for (std::size_t k = 4; k <= 12 && k <= distinct; ++k) {
      KMeansConfig dc = kc;
      dc.k = k;
      const ClusterModel m = kmeans(points, dc);
      res.diagnostics.push_back({k, m.inertia, m.iterations, m.converged});
    }
    ClusterModel model = flag_clusters(kmeans(points, kc), points, config.flat_var_max, config.rough_min);
    PixelFilterResult l3 = l3_filter(in3, model, config.plot_survival_min);
    res.eliminations.insert(res.eliminations.end(), l3.eliminations.begin(), l3.eliminations.end());
    kept3 = std::move(l3.retained);
    res.clusters = std::move(model);
  }
  res.funnel.push_back(count_level("L3", Level::L3, plot_ids_of(in3).size(), in3.size(), plot_ids_of(kept3).size(),
                                   kept3.size(), res.eliminations));
  res.retained["L3"] = std::move(kept3);

  // Verification against seed medians.
  if (config.seeds.empty()) return res;
  auto seeds_in = open_input(config.seeds, "seeds");
  const std::vector<SeedEntry> seeds = parse_seed_file(seeds_in, data.crops);
  const std::vector<CleanProfile>& l3_kept = res.retained["L3"];
  const auto l3_plots = group_by_plot(l3_kept);
  const auto all_plots = group_by_plot(data.profiles);
  std::vector<std::pair<SpectralEmbedding, CropLabel>> seed_embeddings;
  std::set<std::string> seed_ids;
  for (const SeedEntry& s : seeds) {
    seed_ids.insert(s.plot_id);
    auto it = l3_plots.find(s.plot_id);
    if (it == l3_plots.end()) it = all_plots.find(s.plot_id);
    if (it == all_plots.end()) throw DataError("seed plot '" + s.plot_id + "' has no usable pixels");
    seed_embeddings.emplace_back(embed_plot(s.plot_id, it->second), s.verified);
  }
  const MedianSet medians = build_median_profiles(seed_embeddings, config.min_seed_support);
  std::vector<EliminationRecord> flagged;
  for (const auto& [plot_id, pixels] : l3_plots) {
    if (seed_ids.count(plot_id)) continue;
    const PlotRecord& plot = data.dataset.plots.at(plot_id);
    Verdict v = verify_plot(embed_plot(plot_id, pixels), medians, plot.claimed_label);
    v.district = plot.district;
    if (v.decision == Decision::Flagged) {
      flagged.push_back({plot_id, SubjectKind::Plot, Level::Verify, Reason::VerifyFlagged,
                         "votes " + vote_text(v.votes[0]) + "/" + vote_text(v.votes[1]) + "/" + vote_text(v.votes[2]) +
                             " vs claimed " + v.claimed.name()});
    }
    res.verdicts.push_back(std::move(v));
  }
  std::vector<CleanProfile> kept_v;
  res.eliminations.insert(res.eliminations.end(), flagged.begin(), flagged.end());
  cascade_pixels(l3_kept, flagged, res.eliminations, &kept_v);
  res.funnel.push_back(count_level("VERIFY", Level::Verify, l3_plots.size(), l3_kept.size(), plot_ids_of(kept_v).size(),
                                   kept_v.size(), res.eliminations));
  res.retained["VERIFY"] = std::move(kept_v);
  return res;
}

std::string csv_cell(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

void write_clean_outputs(const CleanResult& res, const RunConfig& config) {
  fs::create_directories(config.output_dir);
  const fs::path& dir = config.output_dir;
  for (const std::string& level : kCleanLevels) {
    const fs::path path = dir / ("retained_" + level + ".csv");
    const auto it = res.retained.find(level);
    if (!config.wants(level) || it == res.retained.end()) {
      // Drop stale snapshots so train-eval cannot pick up an older run.
      fs::remove(path);
      continue;
    }
    auto out = open_output(path);
    out << "plot_id,pixel_id,claimed\n";
    std::vector<const CleanProfile*> rows;
    for (const auto& p : it->second) rows.push_back(&p);
    std::sort(rows.begin(), rows.end(), [](const CleanProfile* a, const CleanProfile* b) {
      return std::tie(a->plot_id, a->pixel_id) < std::tie(b->plot_id, b->pixel_id);
    });
    for (const CleanProfile* p : rows) {
      out << p->plot_id << ',' << p->pixel_id << ',' << res.data.dataset.plots.at(p->plot_id).claimed_label.name()
          << '\n';
    }
  }
  {
    auto out = open_output(dir / "eliminations.csv");
    out << "subject_id,subject,level,reason,detail\n";
    for (const auto& r : res.eliminations) {
      out << csv_cell(r.subject_id) << ',' << to_string(r.subject) << ',' << to_string(r.level) << ','
          << to_string(r.reason) << ',' << csv_cell(r.detail) << '\n';
    }
  }
  if (res.retained.count("VERIFY")) {
    auto out = open_output(dir / "verdicts.csv");
    out << "plot_id,claimed,vote_cosine,vote_pearson,vote_manhattan,decision\n";
    for (const Verdict& v : res.verdicts) {
      out << v.plot_id << ',' << v.claimed.name() << ',' << vote_text(v.votes[0]) << ',' << vote_text(v.votes[1])
          << ',' << vote_text(v.votes[2]) << ',' << to_string(v.decision) << '\n';
    }
  } else {
    fs::remove(dir / "verdicts.csv");
  }
  if (res.clusters) {
    auto out = open_output(dir / "kmeans_diagnostics.csv");
    out << "k,inertia,iterations,converged\n";
    for (const auto& d : res.diagnostics) {
      out << d.k << ',' << format_number(d.inertia) << ',' << d.iterations << ',' << (d.converged ? 1 : 0) << '\n';
    }
  }

  ordered_json manifest;
  manifest["tool"] = "gtclean";
  manifest["version"] = kToolVersion;
  manifest["config"] = config_to_json(config);
  manifest["preprocess"] = {{"observable_acquisitions", res.data.n_observable},
                            {"min_required_samples",
                             min_required_samples(res.data.n_observable, config.preprocess.min_sample_fraction)},
                            {"cloudy_samples_removed", res.data.clouds_removed},
                            {"ndvi_degenerate", res.data.ndvi_degenerate}};
  ordered_json funnel = ordered_json::array();
  for (const LevelCounts& c : res.funnel) {
    ordered_json reasons = ordered_json::object();
    for (const auto& [reason, n] : c.by_reason) reasons[reason] = {{"plots", n.first}, {"pixels", n.second}};
    funnel.push_back({{"level", c.level},
                      {"input_plots", c.input_plots},
                      {"input_pixels", c.input_pixels},
                      {"retained_plots", c.retained_plots},
                      {"retained_pixels", c.retained_pixels},
                      {"eliminated", reasons}});
  }
  manifest["funnel"] = funnel;
  if (res.clusters) {
    const ClusterModel& m = *res.clusters;
    ordered_json clusters = ordered_json::array();
    for (std::size_t c = 0; c < m.k; ++c) {
      clusters.push_back({{"cluster", c},
                          {"members", m.stats[c].members},
                          {"mean_variance", m.stats[c].mean_variance},
                          {"mean_roughness", m.stats[c].mean_roughness},
                          {"flag", std::string(to_string(m.flags[c]))}});
    }
    manifest["kmeans"] = {{"k_requested", config.kmeans.k},
                          {"k_used", res.k_used},
                          {"inertia", m.inertia},
                          {"iterations", m.iterations},
                          {"converged", m.converged},
                          {"clusters", clusters}};
  }
  if (res.retained.count("VERIFY")) {
    const auto confirmed = std::count_if(res.verdicts.begin(), res.verdicts.end(),
                                         [](const Verdict& v) { return v.decision == Decision::Confirmed; });
    manifest["verify"] = {{"verified_plots", res.verdicts.size()},
                          {"confirmed", confirmed},
                          {"flagged", res.verdicts.size() - static_cast<std::size_t>(confirmed)}};
  }
  auto out = open_output(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

// --------------------------------------------------------------------------
// train-eval

TrainEvalResult run_train_eval(const RunConfig& config) {
  const fs::path& dir = config.output_dir;
  std::vector<std::string> levels;
  for (const auto& l : kAllLevels) {
    if (config.wants(l)) levels.push_back(l);
  }

  // Snapshots first so a missing one fails before any heavy work.
  std::map<std::string, std::set<std::string>> snapshot;
  for (const auto& level : levels) {
    if (level == "UNCLEAN") continue;
    const fs::path path = dir / ("retained_" + level + ".csv");
    if (!fs::exists(path)) throw DataError("missing snapshot for level " + level + " ('" + path.string() + "'); run clean first");
    auto& ids = snapshot[level];
    for (const auto& row : read_csv(path, {"plot_id", "pixel_id", "claimed"}, "snapshot " + level)) ids.insert(row[1]);
  }
  std::set<std::string> flagged;
  if (fs::exists(dir / "verdicts.csv")) {
    for (const auto& row : read_csv(dir / "verdicts.csv",
                                    {"plot_id", "claimed", "vote_cosine", "vote_pearson", "vote_manhattan", "decision"},
                                    "verdicts")) {
      if (row[5] == "FLAGGED") flagged.insert(row[0]);
    }
  }

  const PreparedData data = prepare(config);
  std::optional<std::map<std::string, TruthEntry>> truth;
  if (!config.truth.empty()) {
    auto in = open_input(config.truth, "truth");
    truth = parse_truth_file(in);
  }

  std::vector<std::pair<std::string, CropLabel>> candidates;
  for (const PlotRecord& p : data.plots) {
    if (p.claimed_label.is_crop()) candidates.emplace_back(p.plot_id, p.claimed_label);
  }
  const std::set<std::string> test_plots = split_plots(candidates, config.test_fraction, derive_seed(config.seed, "split"));

  TrainEvalResult result;
  result.truth_labels = truth.has_value();

  // Cleanest available snapshot, used for test rows when truth is absent.
  std::string cleanest = "UNCLEAN";
  for (const auto& l : kCleanLevels) {
    if (snapshot.count(l)) cleanest = l;
  }
  result.test_source = truth ? "truth" : cleanest;

  std::vector<FeatureRow> test;
  std::set<std::string> test_plot_set;
  for (const CleanProfile& p : data.profiles) {
    if (!test_plots.count(p.plot_id)) continue;
    const PlotRecord& plot = data.dataset.plots.at(p.plot_id);
    CropLabel label;
    if (truth) {
      const auto it = truth->find(p.plot_id);
      if (it == truth->end()) throw DataError("truth table has no entry for plot '" + p.plot_id + "'");
      if (it->second.condition != TrueCondition::Crop) continue;
      label = data.crops.parse(it->second.crop);
      if (!label.is_crop()) throw DataError("truth crop '" + it->second.crop + "' is not configured");
    } else {
      if (cleanest != "UNCLEAN" && !snapshot[cleanest].count(p.pixel_id)) continue;
      if (cleanest == "L3" && flagged.count(p.plot_id)) continue;
      label = plot.claimed_label;
    }
    test.push_back({p.pixel_id, p.plot_id, plot.district, plot.season_year, pixel_features(p), label});
    test_plot_set.insert(p.plot_id);
  }
  if (test.empty()) throw DataError("test split is empty");
  result.test_rows = test.size();
  result.test_plots = test_plot_set.size();
  std::vector<CropLabel> test_truth;
  for (const auto& r : test) test_truth.push_back(r.label);

  for (const auto& level : levels) {
    std::vector<FeatureRow> train;
    std::set<std::string> train_plot_set;
    for (const CleanProfile& p : data.profiles) {
      if (test_plots.count(p.plot_id)) continue;
      const PlotRecord& plot = data.dataset.plots.at(p.plot_id);
      if (!plot.claimed_label.is_crop()) continue;
      if (level != "UNCLEAN") {
        if (!snapshot[level].count(p.pixel_id)) continue;
        // Verification outcomes apply on top of the L3 snapshot.
        if (level == "L3" && flagged.count(p.plot_id)) continue;
      }
      train.push_back({p.pixel_id, p.plot_id, plot.district, plot.season_year, pixel_features(p), plot.claimed_label});
      train_plot_set.insert(p.plot_id);
    }
    if (train.empty()) throw DataError("level " + level + " leaves no training rows");
    ForestConfig fc = config.forest;
    fc.seed = derive_seed(config.seed, "forest");
    LevelEvaluation ev;
    ev.level = level;
    ev.train_rows = train.size();
    ev.train_plots = train_plot_set.size();
    ev.model = train_forest(train, fc);
    ev.oob_accuracy = ev.model.oob_accuracy;
    const std::vector<CropLabel> pred = ev.model.predict(test);
    ev.overall = evaluate(pred, test_truth, data.crops, level);
    std::map<std::pair<std::string, int>, std::pair<std::vector<CropLabel>, std::vector<CropLabel>>> groups;
    for (std::size_t i = 0; i < test.size(); ++i) {
      auto& g = groups[{test[i].district, test[i].season_year}];
      g.first.push_back(pred[i]);
      g.second.push_back(test_truth[i]);
    }
    for (const auto& [key, g] : groups) ev.by_district[key] = evaluate(g.first, g.second, data.crops, level);
    result.levels.push_back(std::move(ev));
  }
  return result;
}

void write_train_eval_outputs(const TrainEvalResult& result, const RunConfig& config) {
  const fs::path& dir = config.output_dir;
  fs::create_directories(dir);
  struct Row {
    std::string district, crop, year, level;
    int precision, tpr, f1;
  };
  std::vector<Row> table;
  for (const LevelEvaluation& ev : result.levels) {
    auto out = open_output(dir / ("report_" + ev.level + ".csv"));
    out << "district,crop,year,level,precision,tpr,f1\n";
    auto emit = [&](const std::string& district, const std::string& year, const EvalReport& r) {
      for (const ClassScores& s : r.per_class) {
        const Row row{district,
                      s.crop,
                      year,
                      ev.level,
                      round_half_up_percent(s.precision),
                      round_half_up_percent(s.recall),
                      round_half_up_percent(s.f1)};
        out << row.district << ',' << row.crop << ',' << row.year << ',' << row.level << ',' << row.precision << ','
            << row.tpr << ',' << row.f1 << '\n';
        table.push_back(row);
      }
    };
    std::set<int> years;
    for (const auto& [key, r] : ev.by_district) {
      emit(key.first, std::to_string(key.second), r);
      years.insert(key.second);
    }
    emit("ALL", year_text(years), ev.overall);
    auto model_out = open_output(dir / ("model_" + ev.level + ".json"));
    save_forest_json(model_out, ev.model);
  }

  // Combined Markdown table, one row per district, crop, year and level.
  std::stable_sort(table.begin(), table.end(), [](const Row& a, const Row& b) {
    const bool a_all = a.district == "ALL", b_all = b.district == "ALL";
    return std::tie(a_all, a.district, a.crop) < std::tie(b_all, b.district, b.crop);
  });
  std::ostringstream md;
  md << "# Classification results by cleaning level\n\n";
  md << "- Test labels: "
     << (result.truth_labels ? "synthetic truth table" : "held-out claimed labels from snapshot " + result.test_source)
     << "\n";
  md << "- Test set: " << result.test_plots << " plots, " << result.test_rows << " pixels\n";
  const ForestConfig& f = config.forest;
  md << "- Random forest: " << f.n_trees << " trees, max_depth "
     << (f.max_depth == 0 ? std::string("unlimited") : std::to_string(f.max_depth)) << ", min_samples_leaf "
     << f.min_samples_leaf << ", features_per_split "
     << (f.features_per_split == 0 ? std::string("floor(sqrt(d))") : std::to_string(f.features_per_split))
     << ", bootstrap " << (f.bootstrap ? "on" : "off") << ", pixel granularity, plot-grouped split (test fraction "
     << format_fraction(config.test_fraction) << ")\n\n";
  md << "| District | Crop | Year | Level | Precision | TPR | F1 |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const Row& r : table) {
    md << "| " << r.district << " | " << r.crop << " | " << r.year << " | " << r.level << " | " << r.precision << " | "
       << r.tpr << " | " << r.f1 << " |\n";
  }
  md << "\n| Level | Training plots | Training pixels | Macro F1 |\n|---|---|---|---|\n";
  for (const LevelEvaluation& ev : result.levels) {
    md << "| " << ev.level << " | " << ev.train_plots << " | " << ev.train_rows << " | "
       << fixed_text(100.0 * ev.overall.macro_f1(), 2) << " |\n";
  }
  auto out = open_output(dir / "report.md");
  out << md.str();

  // Fold metrics into the manifest written by clean.
  const fs::path manifest_path = dir / "manifest.json";
  ordered_json manifest = ordered_json::object();
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path, std::ios::binary);
    try {
      manifest = ordered_json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError("manifest '" + manifest_path.string() + "': " + e.what());
    }
  }
  ordered_json metrics = ordered_json::object();
  for (const LevelEvaluation& ev : result.levels) {
    ordered_json per_class = ordered_json::array();
    for (const ClassScores& s : ev.overall.per_class) {
      per_class.push_back({{"crop", s.crop},
                           {"support", s.support},
                           {"precision", s.precision},
                           {"recall", s.recall},
                           {"f1", s.f1}});
    }
    ordered_json entry = {{"train_plots", ev.train_plots},
                          {"train_rows", ev.train_rows},
                          {"macro_f1", ev.overall.macro_f1()},
                          {"per_class", per_class},
                          {"confusion", ev.overall.confusion}};
    if (ev.oob_accuracy) entry["oob_accuracy"] = *ev.oob_accuracy;
    metrics[ev.level] = entry;
  }
  manifest["evaluation"] = {{"test_labels", result.truth_labels ? "truth" : "claimed:" + result.test_source},
                            {"test_plots", result.test_plots},
                            {"test_rows", result.test_rows},
                            {"forest", forest_json(config.forest)}};
  manifest["metrics"] = metrics;
  auto mout = open_output(manifest_path);
  mout << manifest.dump(2) << '\n';
}

// --------------------------------------------------------------------------
// report

std::string render_report(const fs::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw DataError("manifest '" + manifest_path.string() + "' not found");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("manifest '" + manifest_path.string() + "': " + e.what());
  }
  std::ostringstream md;
  md << "# Cleaning summary\n\n";
  auto pct = [](std::size_t kept, std::size_t in) {
    if (in == 0) return std::string("100.0%");
    return fixed_text(100.0 * static_cast<double>(kept) / static_cast<double>(in), 1) + "%";
  };
  if (m.contains("funnel")) {
    md << "| Level | Plots in | Plots retained | Pixels in | Pixels retained | Pixel retention |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const json& l : m["funnel"]) {
      md << "| " << l["level"].get<std::string>() << " | " << l["input_plots"].get<std::size_t>() << " | "
         << l["retained_plots"].get<std::size_t>() << " | " << l["input_pixels"].get<std::size_t>() << " | "
         << l["retained_pixels"].get<std::size_t>() << " | "
         << pct(l["retained_pixels"].get<std::size_t>(), l["input_pixels"].get<std::size_t>()) << " |\n";
    }
    md << "\n| Level | Reason | Plots | Pixels |\n|---|---|---|---|\n";
    bool any = false;
    for (const json& l : m["funnel"]) {
      for (const auto& [reason, n] : l["eliminated"].items()) {
        md << "| " << l["level"].get<std::string>() << " | " << reason << " | " << n["plots"].get<std::size_t>()
           << " | " << n["pixels"].get<std::size_t>() << " |\n";
        any = true;
      }
    }
    if (!any) md << "| - | none | 0 | 0 |\n";
  }
  if (m.contains("metrics")) {
    md << "\n| Level | Macro F1 | Change from previous level |\n|---|---|---|\n";
    std::vector<std::pair<std::string, double>> f1;
    for (const auto& level : kAllLevels) {
      if (m["metrics"].contains(level)) f1.emplace_back(level, 100.0 * m["metrics"][level]["macro_f1"].get<double>());
    }
    std::size_t largest = 0;
    double best_delta = -1e300;
    for (std::size_t i = 1; i < f1.size(); ++i) {
      const double d = f1[i].second - f1[i - 1].second;
      if (d > best_delta) {
        best_delta = d;
        largest = i;
      }
    }
    auto fixed1 = [](double v) { return fixed_text(v, 1); };
    for (std::size_t i = 0; i < f1.size(); ++i) {
      md << "| " << f1[i].first << " | " << fixed1(f1[i].second) << " | ";
      if (i == 0) {
        md << "- |\n";
        continue;
      }
      const double d = f1[i].second - f1[i - 1].second;
      md << (d >= 0 ? "+" : "") << fixed1(d);
      if (i == largest && best_delta > 0) md << " (largest gain)";
      md << " |\n";
    }
  }
  return md.str();
}

// --------------------------------------------------------------------------
// synth

void run_synth(const RunConfig& config) {
  SynthSpec spec = config.synth;
  spec.seed = config.seed;
  std::vector<CropSpec> crops;
  const auto defaults = default_crop_specs();
  const CropSet crop_set(config.crops);
  for (const auto& name : crop_set.names()) {
    const auto it = std::find_if(defaults.begin(), defaults.end(), [&](const CropSpec& c) { return c.name == name; });
    if (it == defaults.end()) throw ConfigError("no built-in phenology for crop '" + name + "'");
    crops.push_back(*it);
  }
  spec.crops = crops;
  const SynthDataset data = generate_dataset(spec);
  write_synth_files(data, config.output_dir);

  RunConfig next = config;
  next.plots = "plots.geojson";
  next.pixels = "pixels.csv";
  next.masks = "masks.geojson";
  next.seeds = "seeds.csv";
  next.truth = "truth.csv";
  next.output_dir = "run";
  auto out = open_output(config.output_dir / "config.json");
  out << config_json(next) << '\n';
}

// --------------------------------------------------------------------------
// fcc

std::vector<fs::path> run_fcc(const RunConfig& config, const FccRequest& request) {
  const fs::path& dir = config.output_dir;
  std::string source;
  for (const auto& l : kCleanLevels) {
    if (fs::exists(dir / ("retained_" + l + ".csv"))) source = l;
  }
  if (source.empty()) throw DataError("no retained snapshot in '" + dir.string() + "'; run clean first");
  std::set<std::string> kept;
  for (const auto& row : read_csv(dir / ("retained_" + source + ".csv"), {"plot_id", "pixel_id", "claimed"}, "snapshot")) {
    kept.insert(row[1]);
  }
  std::vector<std::string> targets = request.plot_ids;
  if (targets.empty() && fs::exists(dir / "verdicts.csv")) {
    for (const auto& row : read_csv(dir / "verdicts.csv",
                                    {"plot_id", "claimed", "vote_cosine", "vote_pearson", "vote_manhattan", "decision"},
                                    "verdicts")) {
      if (row[5] == "FLAGGED") targets.push_back(row[0]);
    }
  }

  const PreparedData data = prepare(config);
  std::map<std::string, std::vector<const CleanProfile*>> snap, all;
  for (const CleanProfile& p : data.profiles) {
    all[p.plot_id].push_back(&p);
    if (kept.count(p.pixel_id)) snap[p.plot_id].push_back(&p);
  }
  if (targets.empty()) {
    for (const auto& [id, px] : snap) targets.push_back(id);
  }

  std::optional<std::size_t> fixed_step;
  if (request.day) {
    const int offset = *request.day - config.grid.start_day;
    if (offset < 0 || offset % config.grid.step_days != 0 || offset / config.grid.step_days >= config.grid.n_steps) {
      throw ConfigError("--day " + std::to_string(*request.day) + " is not a grid day");
    }
    fixed_step = static_cast<std::size_t>(offset / config.grid.step_days);
  }

  fs::create_directories(dir / "fcc");
  std::vector<fs::path> written;
  for (const std::string& id : targets) {
    auto it = snap.find(id);
    if (it == snap.end()) it = all.find(id);
    if (it == all.end()) throw DataError("plot '" + id + "' has no pixels to render");
    const auto& pixels = it->second;
    std::size_t step = 0;
    if (fixed_step) {
      step = *fixed_step;
    } else {
      double best = -1e300;
      for (std::size_t t = 0; t < pixels.front()->ndvi.size(); ++t) {
        double mean = 0.0;
        for (const CleanProfile* p : pixels) mean += p->ndvi[t];
        mean /= static_cast<double>(pixels.size());
        if (mean > best) {
          best = mean;
          step = t;
        }
      }
    }
    const RgbImage img = render_fcc_chip(pixels, step, config.fcc_size);
    const fs::path path = dir / "fcc" / (id + "_" + std::to_string(config.grid.day(static_cast<int>(step))) + ".png");
    write_png(path, img);
    written.push_back(path);
  }
  return written;
}

}  // namespace gtclean
