#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gtclean/geometry.hpp"
#include "helpers.hpp"

using namespace gtclean;
using testutil::rect;
using testutil::square;

namespace {

// Independent segment test via orientation signs and collinear bounding
// checks, written out longhand.
int orient(Point a, Point b, Point c) {
  const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return (v > 0) - (v < 0);
}
bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}
bool oracle_intersect(Point p1, Point p2, Point q1, Point q2) {
  const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2), o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

Ring random_star(std::mt19937_64& gen, int n) {
  std::uniform_real_distribution<double> radius(0.3, 1.0), jitter(0.0, 0.9);
  Ring r;
  for (int i = 0; i < n; ++i) {
    const double angle = (i + jitter(gen) * 0.5) * 2.0 * M_PI / n;
    const double rad = radius(gen);
    r.push_back({rad * std::cos(angle), rad * std::sin(angle)});
  }
  return r;
}

double exact_rect_overlap(double ax0, double ay0, double ax1, double ay1, double bx0, double by0, double bx1,
                          double by1) {
  const double w = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double h = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  return w * h / ((ax1 - ax0) * (ay1 - ay0));
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("shoelace area of simple shapes") {
    CHECK(polygon_area(square(0, 0, 1)) == doctest::Approx(1.0));
    CHECK(polygon_area({{0, 0}, {1, 0}, {0, 1}}) == doctest::Approx(0.5));
    Ring reversed = square(0, 0, 1);
    std::reverse(reversed.begin(), reversed.end());
    CHECK(polygon_area(reversed) == doctest::Approx(1.0));
    Ring closed = square(0, 0, 2);
    closed.push_back(closed.front());
    CHECK(polygon_area(closed) == doctest::Approx(4.0));
  }

  TEST_CASE("area of a degenerate ring throws") {
    CHECK_THROWS_AS(polygon_area({{0, 0}, {1, 1}}), DataError);
    CHECK_THROWS_AS(polygon_area({{0, 0}, {1, 1}, {0, 0}}), DataError);
  }

  TEST_CASE("area is invariant under vertex order reversal") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 200; ++trial) {
      Ring r = random_star(gen, 3 + trial % 9);
      const double a = polygon_area(r);
      std::reverse(r.begin(), r.end());
      CHECK(polygon_area(r) == doctest::Approx(a).epsilon(1e-12));
    }
  }

  TEST_CASE("segment intersection agrees with an orientation oracle") {
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> coord(0, 4);  // small lattice forces touching and collinear cases
    for (int trial = 0; trial < 5000; ++trial) {
      Point p[4];
      for (auto& q : p) q = {static_cast<double>(coord(gen)), static_cast<double>(coord(gen))};
      CHECK(segments_intersect(p[0], p[1], p[2], p[3]) == oracle_intersect(p[0], p[1], p[2], p[3]));
    }
  }

  TEST_CASE("validate_plot reports ring problems") {
    PlotRecord ok;
    ok.plot_id = "p";
    ok.polygon = square(0, 0, 1);
    ok.pixel_ids = {"a", "b", "c"};
    CHECK(validate_plot(ok).empty());

    PlotRecord two = ok;
    two.polygon = {{0, 0}, {1, 1}};
    auto v = validate_plot(two);
    CHECK(std::find(v.begin(), v.end(), "degenerate polygon") != v.end());

    PlotRecord bowtie = ok;
    bowtie.polygon = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
    // The oracle sees edges (0,0)-(1,1) and (1,0)-(0,1) crossing.
    REQUIRE(oracle_intersect({0, 0}, {1, 1}, {1, 0}, {0, 1}));
    v = validate_plot(bowtie);
    CHECK(std::find(v.begin(), v.end(), "self-intersecting") != v.end());

    PlotRecord empty = ok;
    empty.pixel_ids.clear();
    v = validate_plot(empty);
    CHECK(std::find(v.begin(), v.end(), "empty pixel set") != v.end());
  }

  TEST_CASE("point in polygon") {
    const Ring l_shape{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
    CHECK(contains(l_shape, {0.5, 0.5}));
    CHECK(contains(l_shape, {0.5, 1.5}));
    CHECK_FALSE(contains(l_shape, {1.5, 1.5}));
    CHECK_FALSE(contains(l_shape, {3, 0.5}));
  }

  TEST_CASE("overlap fraction examples") {
    CHECK(overlap_fraction(square(0, 0, 1), square(0, 0, 1), 256) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(overlap_fraction(square(0, 0, 1), square(5, 5, 1), 256) == 0.0);
    CHECK(std::abs(overlap_fraction(square(0, 0, 1), square(0.5, 0, 1), 256) - 0.5) <= 0.01);
    CHECK_THROWS_AS(overlap_fraction(square(0, 0, 1), square(0, 0, 1), 16), DataError);
    CHECK_THROWS_AS(overlap_fraction({{0, 0}, {1, 1}}, square(0, 0, 1), 64), DataError);
  }

  TEST_CASE("overlap fraction is within 2/resolution on rectangle pairs") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
      double ax0 = u(gen), ay0 = u(gen), bx0 = u(gen), by0 = u(gen);
      double ax1 = ax0 + 0.05 + u(gen), ay1 = ay0 + 0.05 + u(gen);
      double bx1 = bx0 + 0.05 + u(gen), by1 = by0 + 0.05 + u(gen);
      for (int res : {32, 64, 256}) {
        const double got = overlap_fraction(rect(ax0, ay0, ax1, ay1), rect(bx0, by0, bx1, by1), res);
        const double want = exact_rect_overlap(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1);
        CHECK(std::abs(got - want) <= 2.0 / res);
      }
    }
  }

  TEST_CASE("self overlap of simple rings is nearly total") {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 100; ++trial) {
      const Ring r = random_star(gen, 3 + trial % 10);
      REQUIRE(is_simple(r));
      CHECK(overlap_fraction(r, r, 256) >= 0.99);
    }
  }
}
