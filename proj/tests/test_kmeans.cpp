#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "gtclean/kmeans.hpp"
#include "gtclean/synth.hpp"
#include "oracles.hpp"

using namespace gtclean;

namespace {

std::vector<std::vector<double>> random_points(std::mt19937_64& gen, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  for (auto& p : pts) {
    for (auto& v : p) v = u(gen);
  }
  return pts;
}

}  // namespace

TEST_SUITE("kmeans") {
  TEST_CASE("two well separated pairs") {
    const std::vector<std::vector<double>> pts{{0.0}, {0.1}, {10.0}, {10.1}};
    auto m = kmeans(pts, KMeansConfig{2, 5, 100, 1});
    CHECK(m.assignment[0] == m.assignment[1]);
    CHECK(m.assignment[2] == m.assignment[3]);
    CHECK(m.assignment[0] != m.assignment[2]);
    CHECK(m.centroids[m.assignment[0]][0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(m.centroids[m.assignment[2]][0] == doctest::Approx(10.05).epsilon(1e-12));
    CHECK(m.inertia == doctest::Approx(oracle::best_inertia(pts, 2)).epsilon(1e-12));
  }

  TEST_CASE("k equal to the number of points") {
    const std::vector<std::vector<double>> pts{{0.1, 0.2}, {0.5, 0.1}, {0.9, 0.9}};
    auto m = kmeans(pts, KMeansConfig{3, 1, 100, 1});
    CHECK(m.inertia == 0.0);
    CHECK(std::set<std::size_t>(m.assignment.begin(), m.assignment.end()).size() == 3);
  }

  TEST_CASE("identical points with k = 1") {
    const std::vector<std::vector<double>> pts(5, {0.3, 0.7});
    auto m = kmeans(pts, KMeansConfig{1, 1, 100, 1});
    CHECK(m.inertia == 0.0);
    CHECK(m.centroids[0] == std::vector<double>{0.3, 0.7});
  }

  TEST_CASE("errors") {
    const std::vector<std::vector<double>> dup(4, {0.5});
    CHECK_THROWS_AS(kmeans(dup, KMeansConfig{2, 0, 10, 1}), DataError);
    CHECK_THROWS_AS(kmeans(dup, KMeansConfig{0, 0, 10, 1}), DataError);
    const std::vector<std::vector<double>> ragged{{0.1}, {0.2, 0.3}};
    CHECK_THROWS_AS(kmeans(ragged, KMeansConfig{1, 0, 10, 1}), DataError);
  }

  TEST_CASE("inertia history never increases and the result is a fixpoint") {
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 40; ++trial) {
      auto pts = random_points(gen, 60, 4);
      auto m = kmeans(pts, KMeansConfig{5, static_cast<std::uint64_t>(trial), 300, 1});
      for (std::size_t i = 1; i < m.inertia_history.size(); ++i) {
        CHECK(m.inertia_history[i] <= m.inertia_history[i - 1] + 1e-12);
      }
      CHECK(m.inertia == doctest::Approx(partition_inertia(pts, m.assignment, m.k)).epsilon(1e-12));
      if (m.converged) {
        // Reassigning to the nearest centroid changes nothing.
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double own = squared_distance(pts[i], m.centroids[m.assignment[i]]);
          for (const auto& c : m.centroids) CHECK(own <= squared_distance(pts[i], c) + 1e-12);
        }
      }
    }
  }

  TEST_CASE("same seed gives the same model") {
    std::mt19937_64 gen(5);
    auto pts = random_points(gen, 100, 6);
    auto a = kmeans(pts, KMeansConfig{8, 77, 300, 3});
    auto b = kmeans(pts, KMeansConfig{8, 77, 300, 3});
    CHECK(a.assignment == b.assignment);
    CHECK(a.centroids == b.centroids);
    CHECK(a.inertia == b.inertia);
  }

  TEST_CASE("small instances reach the brute-force optimum") {
    std::mt19937_64 gen(99);
    int hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 5 + trial % 4;
      const int k = 2 + trial % 2;
      const std::size_t d = 1 + trial % 3;
      auto pts = random_points(gen, n, d);
      KMeansConfig cfg;
      cfg.k = static_cast<std::size_t>(k);
      cfg.seed = static_cast<std::uint64_t>(trial);
      auto m = kmeans(pts, cfg);
      if (std::abs(m.inertia - oracle::best_inertia(pts, k)) <= 1e-9) ++hits;
    }
    CHECK(hits >= 95);
  }

  TEST_CASE("variance and roughness") {
    const std::vector<double> alt{0.2, 0.8, 0.2, 0.8, 0.2, 0.8, 0.2};
    // Second differences are +-1.2 at every interior index.
    double sum = 0.0;
    for (std::size_t t = 1; t + 1 < alt.size(); ++t) {
      const double d2 = alt[t + 1] - 2 * alt[t] + alt[t - 1];
      CHECK(std::abs(d2) == doctest::Approx(1.2).epsilon(1e-12));
      sum += d2 * d2;
    }
    CHECK(roughness(alt) == doctest::Approx(sum / 5).epsilon(1e-12));
    CHECK(roughness(alt) == doctest::Approx(1.44).epsilon(1e-12));
    CHECK(temporal_variance(std::vector<double>{1, 3}) == doctest::Approx(1.0));
    CHECK(roughness(std::vector<double>{1, 2}) == 0.0);
  }

  TEST_CASE("flag_clusters") {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(std::vector<double>(19, 0.6 + 0.01 * i));
    for (int i = 0; i < 4; ++i) {
      std::vector<double> p(19);
      for (std::size_t t = 0; t < p.size(); ++t) p[t] = (t % 2 ? 0.8 : 0.2) + 0.001 * i;
      pts.push_back(p);
    }
    const TimeGrid grid;
    for (const auto& crop : default_crop_specs()) pts.push_back(phenology_curve(crop.params, grid));

    ClusterModel m;
    m.k = 3;
    m.assignment = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
    m.centroids.assign(3, std::vector<double>(19, 0.0));
    auto flagged = flag_clusters(m, pts, 0.005, 0.01);
    CHECK(flagged.flags[0] == ClusterFlag::Flat);
    CHECK(flagged.flags[1] == ClusterFlag::Noisy);
    CHECK(flagged.flags[2] == ClusterFlag::Ok);
    CHECK(flagged.stats[1].mean_roughness == doctest::Approx(1.44).epsilon(1e-9));
    CHECK(flagged.stats[2].mean_variance >= 0.005);
    CHECK(flagged.stats[2].mean_roughness <= 0.01);

    // A flat and noisy cluster counts as FLAT.
    auto both = flag_clusters(m, pts, 10.0, 0.01);
    CHECK(both.flags[1] == ClusterFlag::Flat);
  }
}
