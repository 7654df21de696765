#include "osteoforge/recist.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace osteoforge {
namespace {

constexpr std::array<const char*, 11> kColumns = {
    "lesion_id", "series_id", "slice_index", "x1", "y1", "x2",
    "y2",        "x3",        "y3",          "x4", "y4"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

double parse_coordinate(std::string_view text, std::size_t line_no, const char* column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ValidationError(fmt::format("lesion records line {}: column {} is not a number: '{}'",
                                      line_no, column, text));
  }
  return value;
}

std::size_t parse_slice(std::string_view text, std::size_t line_no) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError(fmt::format(
        "lesion records line {}: slice_index is not an integer: '{}'", line_no, text));
  }
  if (value < 0) {
    throw ValidationError(
        fmt::format("lesion records line {}: negative slice_index {}", line_no, value));
  }
  return static_cast<std::size_t>(value);
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

double cross(Point2 o, Point2 a, Point2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(Point2 p, Point2 a, Point2 b, double eps) {
  if (std::abs(cross(a, b, p)) > eps) return false;
  return p.x >= std::min(a.x, b.x) - eps && p.x <= std::max(a.x, b.x) + eps &&
         p.y >= std::min(a.y, b.y) - eps && p.y <= std::max(a.y, b.y) + eps;
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

std::vector<RecistMeasurement> parse_lesion_records(std::istream& in) {
  std::vector<RecistMeasurement> records;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t, std::less<>> column_of;
  std::size_t header_width = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (trim(view).empty()) continue;
    const auto fields = split_fields(view);

    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        column_of.emplace(std::string(fields[i]), i);
      }
      for (const char* col : kColumns) {
        if (!column_of.contains(col)) {
          throw ValidationError(
              fmt::format("lesion records header is missing column '{}'", col));
        }
      }
      header_width = fields.size();
      have_header = true;
      continue;
    }

    if (fields.size() != header_width) {
      throw ValidationError(fmt::format("lesion records line {}: expected {} fields, got {}",
                                        line_no, header_width, fields.size()));
    }
    auto field = [&](const char* col) { return fields[column_of.find(col)->second]; };
    auto coord = [&](const char* col) { return parse_coordinate(field(col), line_no, col); };

    RecistMeasurement m;
    m.lesion_id = std::string(field("lesion_id"));
    m.series_id = std::string(field("series_id"));
    if (m.lesion_id.empty()) {
      throw ValidationError(fmt::format("lesion records line {}: empty lesion_id", line_no));
    }
    m.slice_index = parse_slice(field("slice_index"), line_no);
    m.long_axis = {{coord("x1"), coord("y1")}, {coord("x2"), coord("y2")}};
    m.short_axis = {{coord("x3"), coord("y3")}, {coord("x4"), coord("y4")}};
    records.push_back(std::move(m));
  }
  if (!have_header) {
    throw ValidationError("lesion records file has no header line");
  }
  return records;
}

std::vector<RecistMeasurement> parse_lesion_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open lesion records {}", path.string()));
  return parse_lesion_records(in);
}

void write_lesion_records(std::ostream& out,
                          const std::vector<RecistMeasurement>& records) {
  out << "lesion_id,series_id,slice_index,x1,y1,x2,y2,x3,y3,x4,y4\n";
  for (const auto& m : records) {
    out << m.lesion_id << ',' << m.series_id << ',' << m.slice_index;
    for (const Point2& p : m.endpoints()) {
      out << ',' << format_double(p.x) << ',' << format_double(p.y);
    }
    out << '\n';
  }
}

void write_lesion_records(const std::filesystem::path& path,
                          const std::vector<RecistMeasurement>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  write_lesion_records(out, records);
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

bool segments_intersect(const Segment2& s, const Segment2& t) {
  constexpr double eps = 1e-12;
  const int d1 = sign(cross(t.a, t.b, s.a));
  const int d2 = sign(cross(t.a, t.b, s.b));
  const int d3 = sign(cross(s.a, s.b, t.a));
  const int d4 = sign(cross(s.a, s.b, t.b));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  return (d1 == 0 && on_segment(s.a, t.a, t.b, eps)) ||
         (d2 == 0 && on_segment(s.b, t.a, t.b, eps)) ||
         (d3 == 0 && on_segment(t.a, s.a, s.b, eps)) ||
         (d4 == 0 && on_segment(t.b, s.a, s.b, eps));
}

std::vector<std::string> check_measurement(const RecistMeasurement& m, ImageSize image) {
  std::vector<std::string> warnings;
  for (const Point2& p : m.endpoints()) {
    const double rx = round_half_away(p.x);
    const double ry = round_half_away(p.y);
    if (rx < 0 || ry < 0 || rx >= static_cast<double>(image.width) ||
        ry >= static_cast<double>(image.height)) {
      warnings.push_back(fmt::format("lesion {}: endpoint ({:g}, {:g}) outside {}x{} image",
                                     m.lesion_id, p.x, p.y, image.width, image.height));
    }
  }
  if (!segments_intersect(m.long_axis, m.short_axis)) {
    warnings.push_back(fmt::format("lesion {}: long and short axes do not cross", m.lesion_id));
  }
  return warnings;
}

SeedGeometry seed_geometry(const RecistMeasurement& m, ImageSize image,
                           std::vector<std::string>* warnings) {
  if (image.width == 0 || image.height == 0) {
    throw ValidationError("seed_geometry: empty image");
  }
  std::array<Point2, 4> pts{};
  const auto raw = m.endpoints();
  const double max_x = static_cast<double>(image.width - 1);
  const double max_y = static_cast<double>(image.height - 1);
  bool clamped = false;
  for (std::size_t i = 0; i < 4; ++i) {
    const double rx = round_half_away(raw[i].x);
    const double ry = round_half_away(raw[i].y);
    pts[i] = {std::clamp(rx, 0.0, max_x), std::clamp(ry, 0.0, max_y)};
    clamped = clamped || pts[i].x != rx || pts[i].y != ry;
  }
  if (clamped && warnings != nullptr) {
    warnings->push_back(fmt::format("lesion {}: endpoints clamped into {}x{} image",
                                    m.lesion_id, image.width, image.height));
  }

  bool collinear = true;
  for (std::size_t i = 1; i < 4 && collinear; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      if (cross(pts[0], pts[i], pts[j]) != 0.0) {
        collinear = false;
        break;
      }
    }
  }
  if (collinear) {
    throw ValidationError(fmt::format(
        "lesion {}: RECIST endpoints are collinear, no quadrilateral interior", m.lesion_id));
  }

  Point2 centroid;
  for (const Point2& p : pts) {
    centroid.x += p.x / 4.0;
    centroid.y += p.y / 4.0;
  }
  std::sort(pts.begin(), pts.end(), [&](const Point2& a, const Point2& b) {
    const double ta = std::atan2(a.y - centroid.y, a.x - centroid.x);
    const double tb = std::atan2(b.y - centroid.y, b.x - centroid.x);
    if (ta != tb) return ta < tb;
    return std::hypot(a.x - centroid.x, a.y - centroid.y) <
           std::hypot(b.x - centroid.x, b.y - centroid.y);
  });

  SeedGeometry g;
  g.quad = pts;
  g.slice_index = m.slice_index;
  g.bbox.x_min = g.bbox.y_min = std::numeric_limits<long>::max();
  g.bbox.x_max = g.bbox.y_max = std::numeric_limits<long>::min();
  for (const Point2& p : pts) {
    g.bbox.x_min = std::min(g.bbox.x_min, static_cast<long>(p.x));
    g.bbox.y_min = std::min(g.bbox.y_min, static_cast<long>(p.y));
    g.bbox.x_max = std::max(g.bbox.x_max, static_cast<long>(p.x));
    g.bbox.y_max = std::max(g.bbox.y_max, static_cast<long>(p.y));
  }
  return g;
}

bool point_in_polygon(std::span<const Point2> polygon, Point2 p) {
  constexpr double eps = 1e-9;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (on_segment(p, polygon[j], polygon[i], eps)) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

Mask2D rasterize_quad(const SeedGeometry& g, ImageSize image) {
  Mask2D mask(image.width, image.height, 0);
  double min_x = g.quad[0].x, max_x = g.quad[0].x;
  double min_y = g.quad[0].y, max_y = g.quad[0].y;
  for (const Point2& p : g.quad) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const long x0 = std::max(0L, static_cast<long>(std::ceil(min_x - 1e-9)));
  const long y0 = std::max(0L, static_cast<long>(std::ceil(min_y - 1e-9)));
  const long x1 = std::min(static_cast<long>(image.width) - 1,
                           static_cast<long>(std::floor(max_x + 1e-9)));
  const long y1 = std::min(static_cast<long>(image.height) - 1,
                           static_cast<long>(std::floor(max_y + 1e-9)));
  for (long y = y0; y <= y1; ++y) {
    for (long x = x0; x <= x1; ++x) {
      if (point_in_polygon(g.quad, {static_cast<double>(x), static_cast<double>(y)})) {
        mask(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = 1;
      }
    }
  }
  return mask;
}

}  // namespace osteoforge
