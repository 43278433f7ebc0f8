#include "gtclean/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "gtclean/core.hpp"

namespace gtclean {
namespace {

// Drops consecutive duplicates and an explicit closing vertex.
Ring normalized(const Ring& ring) {
  Ring out;
  out.reserve(ring.size());
  for (const Point& p : ring) {
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  }
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

int orientation(Point a, Point b, Point c) {
  const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

void require_usable(const Ring& ring, const char* what) {
  if (distinct_vertex_count(ring) < 3) {
    throw DataError(std::string(what) + ": degenerate polygon (fewer than 3 distinct vertices)");
  }
}

}  // namespace

std::size_t distinct_vertex_count(const Ring& ring) {
  Ring n = normalized(ring);
  std::sort(n.begin(), n.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  return static_cast<std::size_t>(std::unique(n.begin(), n.end()) - n.begin());
}

BoundingBox bounding_box(const Ring& ring) {
  BoundingBox box{};
  if (ring.empty()) return box;
  box.min_x = box.max_x = ring.front().x;
  box.min_y = box.max_y = ring.front().y;
  for (const Point& p : ring) {
    box.min_x = std::min(box.min_x, p.x);
    box.max_x = std::max(box.max_x, p.x);
    box.min_y = std::min(box.min_y, p.y);
    box.max_y = std::max(box.max_y, p.y);
  }
  return box;
}

bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

bool is_simple(const Ring& ring) {
  const Ring r = normalized(ring);
  const std::size_t n = r.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a1 = r[i];
    const Point a2 = r[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const Point b1 = r[j];
      const Point b2 = r[(j + 1) % n];
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (!adjacent) {
        if (segments_intersect(a1, a2, b1, b2)) return false;
        continue;
      }
      // Adjacent edges share one vertex; they must not fold back onto each other.
      const Point shared = (j == i + 1) ? a2 : a1;
      const Point a_far = (j == i + 1) ? a1 : a2;
      const Point b_far = (j == i + 1) ? b2 : b1;
      if (orientation(a_far, shared, b_far) == 0) {
        const double dot = (a_far.x - shared.x) * (b_far.x - shared.x) +
                           (a_far.y - shared.y) * (b_far.y - shared.y);
        if (dot > 0.0) return false;
      }
    }
  }
  return true;
}

bool contains(const Ring& ring, Point p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = ring[i];
    const Point b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double polygon_area(const Ring& ring) {
  require_usable(ring, "polygon_area");
  const Ring r = normalized(ring);
  double twice = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Point a = r[i];
    const Point b = r[(i + 1) % r.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) / 2.0;
}

double overlap_fraction(const Ring& a, const Ring& b, int resolution) {
  require_usable(a, "overlap_fraction");
  require_usable(b, "overlap_fraction");
  if (resolution < 32) throw DataError("overlap_fraction: resolution must be >= 32");

  const BoundingBox box_a = bounding_box(a);
  const BoundingBox box_b = bounding_box(b);
  const bool disjoint_boxes = box_b.min_x > box_a.max_x || box_b.max_x < box_a.min_x ||
                              box_b.min_y > box_a.max_y || box_b.max_y < box_a.min_y;
  if (disjoint_boxes) return 0.0;

  const double dx = (box_a.max_x - box_a.min_x) / resolution;
  const double dy = (box_a.max_y - box_a.min_y) / resolution;
  long inside_a = 0;
  long inside_both = 0;
  for (int iy = 0; iy < resolution; ++iy) {
    const double y = box_a.min_y + (iy + 0.5) * dy;
    for (int ix = 0; ix < resolution; ++ix) {
      const Point p{box_a.min_x + (ix + 0.5) * dx, y};
      if (!contains(a, p)) continue;
      ++inside_a;
      if (contains(b, p)) ++inside_both;
    }
  }
  if (inside_a == 0) return 0.0;
  return static_cast<double>(inside_both) / static_cast<double>(inside_a);
}

std::vector<std::string> ring_violations(const Ring& ring) {
  std::vector<std::string> out;
  if (distinct_vertex_count(ring) < 3) {
    out.emplace_back("degenerate polygon");
    return out;
  }
  if (!is_simple(ring)) out.emplace_back("self-intersecting");
  return out;
}

}  // namespace gtclean
