#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gtclean/core.hpp"
#include "gtclean/preprocess.hpp"

namespace gtclean {

/// One training or evaluation example: a pixel's band profiles followed by
/// its NDVI profile, each n_steps long.
struct FeatureRow {
  std::string pixel_id;
  std::string plot_id;
  std::string district;
  int season_year = 0;
  std::vector<double> features;
  CropLabel label;
};

/// Layout: RED, GREEN, BLUE, NIR, SWIR2, NDVI; 6 * n_steps values.
std::vector<double> pixel_features(const CleanProfile& profile);

struct ForestConfig {
  int n_trees = 100;
  /// 0 means grow until pure.
  int max_depth = 0;
  int min_samples_leaf = 1;
  /// 0 means floor(sqrt(d)).
  int features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  /// Worker threads for training and prediction; 0 picks the hardware count.
  int threads = 0;

  /// Throws ConfigError for out-of-range values given feature dimension d.
  void validate(std::size_t d) const;
  int resolved_features_per_split(std::size_t d) const;
};

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Class counts of the training rows that reached a leaf.
  std::vector<std::uint32_t> counts;

  bool is_leaf() const noexcept { return feature < 0; }
};

/// Flat node array; node 0 is the root. Rows with x[feature] <= threshold go left.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  /// Class index with the highest leaf count; ties go to the lower index.
  std::size_t predict_index(const std::vector<double>& x) const;
  std::size_t depth() const;
};

struct ForestModel {
  /// Sorted crop names; class indices refer to this list.
  std::vector<std::string> classes;
  std::size_t n_features = 0;
  ForestConfig config;
  std::vector<DecisionTree> trees;
  std::optional<double> oob_accuracy;

  CropLabel predict_one(const std::vector<double>& x) const;
  std::vector<CropLabel> predict(const std::vector<FeatureRow>& rows) const;
};

/// Builds n_trees CART trees with Gini splits. Each tree draws its own
/// bootstrap sample and feature subsets from a seed derived from
/// config.seed and the tree index. Throws DataError with fewer than two
/// classes or ragged rows.
ForestModel train_forest(const std::vector<FeatureRow>& rows, const ForestConfig& config);

/// Weighted Gini impurity of a class-count vector.
double gini(const std::vector<std::uint32_t>& counts);

void save_forest_json(std::ostream& out, const ForestModel& model);
ForestModel load_forest_json(std::istream& in);

/// Stratified whole-plot split. Every plot goes to exactly one side and
/// each crop contributes round(test_fraction * n) test plots, clamped to
/// [1, n - 1]. Throws ConfigError for a fraction outside (0, 1) and
/// DataError when a crop has fewer than two plots or a plot mixes labels.
std::set<std::string> split_plots(const std::vector<std::pair<std::string, CropLabel>>& plots, double test_fraction,
                                  std::uint64_t seed);

struct RowSplit {
  std::vector<FeatureRow> train;
  std::vector<FeatureRow> test;
};

RowSplit split_by_plot(const std::vector<FeatureRow>& rows, double test_fraction, std::uint64_t seed);

}  // namespace gtclean
