#pragma once

#include <string>
#include <vector>

namespace gtclean {

/// Planar point; x is longitude and y is latitude in degrees.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Polygon ring, implicitly closed. A repeated closing vertex is tolerated
/// by every function here.
using Ring = std::vector<Point>;

struct BoundingBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
};

/// Number of distinct vertices after dropping a repeated closing vertex.
std::size_t distinct_vertex_count(const Ring& ring);

BoundingBox bounding_box(const Ring& ring);

bool segments_intersect(Point p1, Point p2, Point q1, Point q2);

/// True when no two non-adjacent edges touch and no adjacent edges overlap.
bool is_simple(const Ring& ring);

/// Ray-casting point-in-polygon test.
bool contains(const Ring& ring, Point p);

/// Absolute shoelace area in squared degrees. Throws DataError on a ring with
/// fewer than three distinct vertices.
double polygon_area(const Ring& ring);

/// Fraction of `a`'s area covered by `b`, estimated by sampling a
/// resolution x resolution lattice of cell centres over a's bounding box and
/// keeping the points inside `a`. Absolute error is within 2/resolution for
/// well-conditioned rings. Throws DataError on degenerate rings or
/// resolution < 32.
double overlap_fraction(const Ring& a, const Ring& b, int resolution);

/// Human-readable problems with a ring; empty when it is usable.
std::vector<std::string> ring_violations(const Ring& ring);

}  // namespace gtclean
