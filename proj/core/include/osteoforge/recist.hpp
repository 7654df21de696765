#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "osteoforge/volume.hpp"

namespace osteoforge {

/// Pixel coordinates on an axial slice, 0-indexed; pixel (i, j) has its centre
/// at (i, j).
struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Segment2 {
  Point2 a;
  Point2 b;
  friend bool operator==(const Segment2&, const Segment2&) = default;
};

/// One prospective RECIST measurement: a long axis and a (roughly)
/// perpendicular short axis drawn on a single slice.
struct RecistMeasurement {
  std::string lesion_id;
  std::string series_id;
  std::size_t slice_index = 0;
  Segment2 long_axis;
  Segment2 short_axis;

  std::array<Point2, 4> endpoints() const {
    return {long_axis.a, long_axis.b, short_axis.a, short_axis.b};
  }
  friend bool operator==(const RecistMeasurement&, const RecistMeasurement&) = default;
};

/// Inclusive integer rectangle.
struct PixelRect {
  long x_min = 0;
  long y_min = 0;
  long x_max = -1;
  long y_max = -1;

  bool contains(long x, long y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  std::size_t area() const {
    if (x_max < x_min || y_max < y_min) return 0;
    return static_cast<std::size_t>(x_max - x_min + 1) *
           static_cast<std::size_t>(y_max - y_min + 1);
  }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

struct ImageSize {
  std::size_t width = 0;
  std::size_t height = 0;
};

/// GrabCut seeding derived from one measurement: the search box and the
/// quadrilateral whose interior is asserted foreground.
struct SeedGeometry {
  PixelRect bbox;
  std::array<Point2, 4> quad;  // simple-polygon order
  std::size_t slice_index = 0;
};

/// Lesion-record CSV. Header:
///   lesion_id,series_id,slice_index,x1,y1,x2,y2,x3,y3,x4,y4
/// (x1,y1)-(x2,y2) is the long axis, (x3,y3)-(x4,y4) the short axis.
std::vector<RecistMeasurement> parse_lesion_records(std::istream& in);
std::vector<RecistMeasurement> parse_lesion_records(const std::filesystem::path& path);

void write_lesion_records(std::ostream& out,
                          const std::vector<RecistMeasurement>& records);
void write_lesion_records(const std::filesystem::path& path,
                          const std::vector<RecistMeasurement>& records);

bool segments_intersect(const Segment2& s, const Segment2& t);

/// Warnings for a measurement checked against a slice: endpoints outside the
/// image and axes that do not cross. Empty when the measurement is clean.
std::vector<std::string> check_measurement(const RecistMeasurement& m, ImageSize image);

/// Rounds the endpoints, clamps them into the image (appending a warning to
/// `warnings` when it has to), and orders them by polar angle around their
/// centroid. Throws ValidationError when the four points are collinear.
SeedGeometry seed_geometry(const RecistMeasurement& m, ImageSize image,
                           std::vector<std::string>* warnings = nullptr);

/// Pixels whose centre lies inside or on the boundary of the quadrilateral.
Mask2D rasterize_quad(const SeedGeometry& g, ImageSize image);

/// True when (x, y) is on an edge of, or inside, the polygon (even-odd rule).
bool point_in_polygon(std::span<const Point2> polygon, Point2 p);

}  // namespace osteoforge
