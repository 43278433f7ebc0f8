#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gtclean/cleaning.hpp"
#include "gtclean/forest.hpp"
#include "gtclean/ingest.hpp"
#include "gtclean/kmeans.hpp"
#include "gtclean/metrics.hpp"
#include "gtclean/preprocess.hpp"
#include "gtclean/synth.hpp"
#include "gtclean/verify.hpp"

namespace gtclean {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

/// Levels accepted by --levels. UNCLEAN only matters to train-eval.
inline const std::vector<std::string> kAllLevels{"UNCLEAN", "L1", "L2", "L3"};

struct RunConfig {
  fs::path plots;
  fs::path pixels;
  fs::path masks;   // optional
  fs::path seeds;   // optional; enables verification
  fs::path truth;   // optional; synth truth table for evaluation
  fs::path output_dir = "out";

  std::vector<std::string> crops{"mustard", "paddy", "wheat"};
  TimeGrid grid;
  PreprocessConfig preprocess;
  L1Config l1;
  double ndvi_max_min = 0.40;
  double plot_survival_min = 0.3;
  double flat_var_max = 0.005;
  double rough_min = 0.01;
  KMeansConfig kmeans{8, 0, 300, 10};
  std::size_t min_seed_support = 5;
  ForestConfig forest;
  double test_fraction = 0.3;
  std::uint64_t seed = 0;
  std::vector<std::string> levels = kAllLevels;
  int fcc_size = 256;
  SynthSpec synth;

  /// Throws ConfigError for out-of-range thresholds or unknown levels.
  void validate() const;
  bool wants(const std::string& level) const;
};

/// Reads a JSON config. Unknown keys are errors; relative paths resolve
/// against the config file's directory.
RunConfig load_run_config(const fs::path& path);

/// Parses "L1,L2" style lists; throws ConfigError on unknown names.
std::vector<std::string> parse_levels(const std::string& csv);

/// Config snapshot as pretty JSON text (also embedded in manifests).
std::string config_json(const RunConfig& config);

/// Input after ingest, join and per-pixel preprocessing.
struct PreparedData {
  CropSet crops;
  Dataset dataset;
  /// Post-PRE pixels in pixel_id order.
  std::vector<CleanProfile> profiles;
  /// Plots with at least one post-PRE pixel.
  std::vector<PlotRecord> plots;
  std::vector<EliminationRecord> eliminations;
  std::size_t n_observable = 0;
  std::size_t clouds_removed = 0;
  std::size_t ndvi_degenerate = 0;
};

PreparedData prepare(const RunConfig& config);

struct LevelCounts {
  std::string level;
  std::size_t input_plots = 0, input_pixels = 0;
  std::size_t retained_plots = 0, retained_pixels = 0;
  /// reason -> (plots, pixels)
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_reason;
};

struct KmeansDiagnostic {
  std::size_t k = 0;
  double inertia = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct CleanResult {
  PreparedData data;
  /// Retained pixels per level, keyed "L1", "L2", "L3", "VERIFY".
  std::map<std::string, std::vector<CleanProfile>> retained;
  std::vector<EliminationRecord> eliminations;
  std::vector<LevelCounts> funnel;
  std::optional<ClusterModel> clusters;
  std::size_t k_used = 0;
  std::vector<KmeansDiagnostic> diagnostics;
  std::vector<Verdict> verdicts;
};

/// ingest -> preprocess -> L1 -> L2 -> kmeans/flag/L3 -> verify, stopping
/// after the highest requested level. Verification needs L3 and seeds.
CleanResult run_clean(const RunConfig& config);

/// Writes retained_L*.csv (requested levels), eliminations.csv,
/// verdicts.csv, kmeans_diagnostics.csv and manifest.json.
void write_clean_outputs(const CleanResult& result, const RunConfig& config);

struct LevelEvaluation {
  std::string level;
  std::size_t train_rows = 0;
  std::size_t train_plots = 0;
  std::optional<double> oob_accuracy;
  ForestModel model;
  EvalReport overall;
  /// (district, season_year) breakdown.
  std::map<std::pair<std::string, int>, EvalReport> by_district;
};

struct TrainEvalResult {
  bool truth_labels = false;
  /// Snapshot whose claimed labels serve as test labels without truth.
  std::string test_source;
  std::size_t test_rows = 0;
  std::size_t test_plots = 0;
  std::vector<LevelEvaluation> levels;
};

/// Trains one forest per requested level on the cleaned snapshots found in
/// output_dir and evaluates each on the same held-out plots.
TrainEvalResult run_train_eval(const RunConfig& config);

void write_train_eval_outputs(const TrainEvalResult& result, const RunConfig& config);

/// Markdown funnel and F1-delta summary of a manifest.
std::string render_report(const fs::path& manifest_path);

/// Synthesises a dataset into output_dir along with a config.json that
/// points `clean` and `train-eval` at it.
void run_synth(const RunConfig& config);

struct FccRequest {
  std::optional<int> day;
  std::vector<std::string> plot_ids;
};

/// Renders chips into output_dir/fcc. Returns the written paths.
std::vector<fs::path> run_fcc(const RunConfig& config, const FccRequest& request);

/// Quotes a CSV cell when it holds a comma, quote or newline.
std::string csv_cell(const std::string& text);

}  // namespace gtclean
