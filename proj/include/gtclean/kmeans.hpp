#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace gtclean {

enum class ClusterFlag { Ok, Flat, Noisy };

std::string_view to_string(ClusterFlag flag);

struct KMeansConfig {
  std::size_t k = 8;
  std::uint64_t seed = 0;
  int max_iter = 300;
  /// Independent seeded restarts; the lowest final inertia wins.
  int n_init = 10;
};

struct ClusterStats {
  std::size_t members = 0;
  double mean_variance = 0.0;
  double mean_roughness = 0.0;
};

/// Result of Lloyd's algorithm on equal-length vectors. `assignment[i]` is
/// the cluster of input row i.
struct ClusterModel {
  std::size_t k = 0;
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
  /// Inertia after seeding and after every centroid update of the kept run.
  std::vector<double> inertia_history;
  int iterations = 0;
  bool converged = false;
  std::vector<ClusterFlag> flags;
  std::vector<ClusterStats> stats;
};

/// k-means++ seeding (D^2-weighted sampling from a seeded generator) followed
/// by Lloyd iterations. Empty clusters take the point farthest from its
/// centroid. Throws DataError when k is zero, exceeds the number of distinct
/// rows, or rows differ in length.
ClusterModel kmeans(const std::vector<std::vector<double>>& points, const KMeansConfig& config);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Total squared distance of every row to the mean of its cluster.
double partition_inertia(const std::vector<std::vector<double>>& points, std::span<const std::size_t> assignment,
                         std::size_t k);

/// Population variance over time of one series.
double temporal_variance(std::span<const double> series);

/// Mean squared second difference; 0 for series shorter than 3.
double roughness(std::span<const double> series);

/// Flags each cluster FLAT when mean member variance < flat_var_max, else
/// NOISY when mean member roughness > rough_min, else OK.
ClusterModel flag_clusters(ClusterModel model, const std::vector<std::vector<double>>& points, double flat_var_max,
                           double rough_min);

}  // namespace gtclean
