#include "gtclean/kmeans.hpp"

#include <algorithm>
#include <limits>

#include "gtclean/core.hpp"
#include "gtclean/rng.hpp"

namespace gtclean {
namespace {

using Points = std::vector<std::vector<double>>;

std::size_t nearest(const Points& centroids, std::span<const double> p, double* best_d = nullptr) {
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c], p);
    if (d < best_dist) {
      best_dist = d;
      best = c;
    }
  }
  if (best_d) *best_d = best_dist;
  return best;
}

Points seed_centroids(const Points& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.size();
  Points centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.below(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);
  while (centroids.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    const double target = rng.uniform() * total;
    std::size_t pick = n;
    double cum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      cum += d2[i];
      pick = i;
      if (cum > target) break;
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
  }
  return centroids;
}

void update_centroids(const Points& points, const std::vector<std::size_t>& assignment, Points& centroids) {
  const std::size_t dim = points.front().size();
  std::vector<std::size_t> counts(centroids.size(), 0);
  for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& c = centroids[assignment[i]];
    for (std::size_t d = 0; d < dim; ++d) c[d] += points[i][d];
    ++counts[assignment[i]];
  }
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    for (double& v : centroids[c]) v /= static_cast<double>(counts[c]);
  }
}

// Moves the point farthest from its centroid into each empty cluster.
void repair_empty(const Points& points, std::vector<std::size_t>& assignment, Points& centroids) {
  for (;;) {
    std::vector<std::size_t> counts(centroids.size(), 0);
    for (std::size_t a : assignment) ++counts[a];
    auto empty = std::find(counts.begin(), counts.end(), 0);
    if (empty == counts.end()) return;
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (counts[assignment[i]] < 2) continue;
      const double d = squared_distance(points[i], centroids[assignment[i]]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    const auto target = static_cast<std::size_t>(empty - counts.begin());
    assignment[far] = target;
    centroids[target] = points[far];
  }
}

double current_inertia(const Points& points, const std::vector<std::size_t>& assignment, const Points& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) total += squared_distance(points[i], centroids[assignment[i]]);
  return total;
}

ClusterModel lloyd(const Points& points, std::size_t k, int max_iter, Rng& rng) {
  ClusterModel model;
  model.k = k;
  model.centroids = seed_centroids(points, k, rng);
  model.assignment.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) model.assignment[i] = nearest(model.centroids, points[i]);
  model.inertia_history.push_back(current_inertia(points, model.assignment, model.centroids));

  for (int iter = 0; iter < max_iter; ++iter) {
    repair_empty(points, model.assignment, model.centroids);
    update_centroids(points, model.assignment, model.centroids);
    model.inertia_history.push_back(current_inertia(points, model.assignment, model.centroids));
    ++model.iterations;
    std::vector<std::size_t> next(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) next[i] = nearest(model.centroids, points[i]);
    if (next == model.assignment) {
      model.converged = true;
      break;
    }
    model.assignment = std::move(next);
  }
  model.inertia = model.inertia_history.back();
  model.flags.assign(k, ClusterFlag::Ok);
  return model;
}

}  // namespace

std::string_view to_string(ClusterFlag flag) {
  switch (flag) {
    case ClusterFlag::Ok: return "OK";
    case ClusterFlag::Flat: return "FLAT";
    case ClusterFlag::Noisy: return "NOISY";
  }
  return "?";
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double partition_inertia(const Points& points, std::span<const std::size_t> assignment, std::size_t k) {
  if (points.empty()) return 0.0;
  Points centroids(k, std::vector<double>(points.front().size(), 0.0));
  update_centroids(points, std::vector<std::size_t>(assignment.begin(), assignment.end()), centroids);
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) total += squared_distance(points[i], centroids[assignment[i]]);
  return total;
}

ClusterModel kmeans(const Points& points, const KMeansConfig& config) {
  if (config.k == 0) throw DataError("kmeans: k must be positive");
  if (points.empty()) throw DataError("kmeans: no profiles");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw DataError("kmeans: profiles differ in length");
  }
  Points distinct = points;
  std::sort(distinct.begin(), distinct.end());
  const auto n_distinct = static_cast<std::size_t>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
  if (config.k > n_distinct) {
    throw DataError("kmeans: k=" + std::to_string(config.k) + " exceeds the " + std::to_string(n_distinct) +
                    " distinct profiles");
  }

  ClusterModel best;
  for (int run = 0; run < std::max(1, config.n_init); ++run) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(run)));
    ClusterModel model = lloyd(points, config.k, config.max_iter, rng);
    if (run == 0 || model.inertia < best.inertia) best = std::move(model);
  }
  return best;
}

double temporal_variance(std::span<const double> series) {
  if (series.empty()) return 0.0;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  double acc = 0.0;
  for (double v : series) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(series.size());
}

double roughness(std::span<const double> series) {
  if (series.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 1; t + 1 < series.size(); ++t) {
    const double d2 = series[t + 1] - 2.0 * series[t] + series[t - 1];
    acc += d2 * d2;
  }
  return acc / static_cast<double>(series.size() - 2);
}

ClusterModel flag_clusters(ClusterModel model, const Points& points, double flat_var_max, double rough_min) {
  model.stats.assign(model.k, ClusterStats{});
  for (std::size_t i = 0; i < points.size(); ++i) {
    ClusterStats& s = model.stats[model.assignment[i]];
    ++s.members;
    s.mean_variance += temporal_variance(points[i]);
    s.mean_roughness += roughness(points[i]);
  }
  model.flags.assign(model.k, ClusterFlag::Ok);
  for (std::size_t c = 0; c < model.k; ++c) {
    ClusterStats& s = model.stats[c];
    if (s.members == 0) continue;
    s.mean_variance /= static_cast<double>(s.members);
    s.mean_roughness /= static_cast<double>(s.members);
    if (s.mean_variance < flat_var_max) {
      model.flags[c] = ClusterFlag::Flat;
    } else if (s.mean_roughness > rough_min) {
      model.flags[c] = ClusterFlag::Noisy;
    }
  }
  return model;
}

}  // namespace gtclean
