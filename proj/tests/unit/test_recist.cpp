#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "osteoforge/recist.hpp"

namespace osteoforge {
namespace {

constexpr const char* kHeader = "lesion_id,series_id,slice_index,x1,y1,x2,y2,x3,y3,x4,y4\n";

std::vector<RecistMeasurement> parse(const std::string& body) {
  std::istringstream in(std::string(kHeader) + body);
  return parse_lesion_records(in);
}

RecistMeasurement cross(double cx, double cy, double h) {
  RecistMeasurement m;
  m.lesion_id = "L";
  m.long_axis = {{cx - h, cy}, {cx + h, cy}};
  m.short_axis = {{cx, cy - h}, {cx, cy + h}};
  return m;
}

double orient(Point2 a, Point2 b, Point2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// Proper or touching intersection of two closed segments.
bool touch(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 * o2 <= 0 && o3 * o4 <= 0;
}

bool cross_properly(Point2 a, Point2 b, Point2 c, Point2 d) {
  return orient(a, b, c) * orient(a, b, d) < 0 && orient(c, d, a) * orient(c, d, b) < 0;
}

TEST(LesionRecords, FieldMapping) {
  const auto r = parse("L1,S1,10,5,15,25,15,15,5,15,25\n");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].lesion_id, "L1");
  EXPECT_EQ(r[0].series_id, "S1");
  EXPECT_EQ(r[0].slice_index, 10u);
  EXPECT_EQ(r[0].long_axis, (Segment2{{5, 15}, {25, 15}}));
  EXPECT_EQ(r[0].short_axis, (Segment2{{15, 5}, {15, 25}}));
}

TEST(LesionRecords, HeaderOnlyIsEmpty) { EXPECT_TRUE(parse("").empty()); }

TEST(LesionRecords, ArityErrorNamesTheLine) {
  try {
    parse("L1,S1,10,5,15,25,15,15,5,15,25\nL2,S1,10,5,15,25,15,15,5,15\n");
    FAIL() << "expected a schema error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(LesionRecords, ColumnsFoundByName) {
  std::istringstream in(
      "series_id,lesion_id,x1,y1,x2,y2,x3,y3,x4,y4,slice_index\nS,L9,1,2,3,4,5,6,7,8,4\n");
  const auto r = parse_lesion_records(in);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].lesion_id, "L9");
  EXPECT_EQ(r[0].slice_index, 4u);
  EXPECT_EQ(r[0].short_axis.b, (Point2{7, 8}));
}

TEST(LesionRecords, RejectsBadNumbersAndNegativeSlice) {
  EXPECT_THROW(parse("L1,S1,10,a,15,25,15,15,5,15,25\n"), ValidationError);
  EXPECT_THROW(parse("L1,S1,-1,5,15,25,15,15,5,15,25\n"), ValidationError);
  EXPECT_THROW(parse("L1,S1,1.5,5,15,25,15,15,5,15,25\n"), ValidationError);
}

TEST(LesionRecords, WriteParseRoundTrip) {
  std::vector<RecistMeasurement> records = {cross(10.25, 20.5, 3), cross(40, 41, 7)};
  records[0].lesion_id = "A";
  records[0].series_id = "S";
  records[0].slice_index = 3;
  records[1].lesion_id = "B";
  records[1].series_id = "S";
  std::stringstream io;
  write_lesion_records(io, records);
  EXPECT_EQ(parse_lesion_records(io), records);
}

TEST(SeedGeometry, CrossGivesBoxAndAngleSortedQuad) {
  RecistMeasurement m;
  m.long_axis = {{5, 15}, {25, 15}};
  m.short_axis = {{15, 5}, {15, 25}};
  const SeedGeometry g = seed_geometry(m, {40, 40});
  EXPECT_EQ(g.bbox, (PixelRect{5, 5, 25, 25}));

  const std::array<Point2, 4> expected = {Point2{25, 15}, {15, 25}, {5, 15}, {15, 5}};
  bool cyclic = false;
  for (int dir : {1, -1}) {
    for (int shift = 0; shift < 4; ++shift) {
      bool same = true;
      for (int k = 0; k < 4; ++k) {
        same = same && g.quad[static_cast<std::size_t>(((dir * k + shift) % 4 + 4) % 4)] ==
                           expected[static_cast<std::size_t>(k)];
      }
      cyclic = cyclic || same;
    }
  }
  EXPECT_TRUE(cyclic);
  // Simple polygon: opposite edges never meet.
  EXPECT_FALSE(touch(g.quad[0], g.quad[1], g.quad[2], g.quad[3]));
  EXPECT_FALSE(touch(g.quad[1], g.quad[2], g.quad[3], g.quad[0]));
}

TEST(SeedGeometry, RandomCrossesGiveSimpleQuads) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(10, 50), len(2, 9), ang(0, 3.14159);
  for (int t = 0; t < 500; ++t) {
    const double cx = pos(rng), cy = pos(rng), a = ang(rng);
    const double l = len(rng), s = len(rng) * 0.8;
    RecistMeasurement m;
    m.long_axis = {{cx - l * std::cos(a), cy - l * std::sin(a)},
                   {cx + l * std::cos(a), cy + l * std::sin(a)}};
    m.short_axis = {{cx + s * std::sin(a), cy - s * std::cos(a)},
                    {cx - s * std::sin(a), cy + s * std::cos(a)}};
    SeedGeometry g;
    try {
      g = seed_geometry(m, {64, 64});
    } catch (const ValidationError&) {
      continue;  // rounding can make a thin cross collinear
    }
    ASSERT_FALSE(cross_properly(g.quad[0], g.quad[1], g.quad[2], g.quad[3])) << "trial " << t;
    ASSERT_FALSE(cross_properly(g.quad[1], g.quad[2], g.quad[3], g.quad[0])) << "trial " << t;
  }
}

TEST(SeedGeometry, ClampsIntoImageWithWarning) {
  const RecistMeasurement m = cross(0, 0, 5);
  std::vector<std::string> warnings;
  const SeedGeometry g = seed_geometry(m, {20, 20}, &warnings);
  EXPECT_EQ(g.bbox, (PixelRect{0, 0, 5, 5}));
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_FALSE(check_measurement(m, {20, 20}).empty());
}

TEST(SeedGeometry, CollinearIsAnError) {
  RecistMeasurement m;
  m.long_axis = {{0, 0}, {10, 10}};
  m.short_axis = {{3, 3}, {7, 7}};
  EXPECT_THROW(seed_geometry(m, {20, 20}), ValidationError);
}

TEST(CheckMeasurement, NonCrossingAxesWarn) {
  RecistMeasurement m;
  m.long_axis = {{10, 10}, {20, 10}};
  m.short_axis = {{30, 5}, {30, 15}};
  const auto warnings = check_measurement(m, {64, 64});
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("do not cross"), std::string::npos) << warnings[0];
  EXPECT_TRUE(check_measurement(cross(30, 30, 5), {64, 64}).empty());
}

TEST(RasterizeQuad, SubPixelQuadHitsOnlyItsCentrePixel) {
  SeedGeometry g;
  g.quad = {Point2{6.5, 7}, {7, 6.5}, {7.5, 7}, {7, 7.5}};
  g.bbox = {6, 6, 8, 8};
  const Mask2D m = rasterize_quad(g, {16, 16});
  EXPECT_EQ(count_nonzero(m.values()), 1u);
  EXPECT_EQ(m(7, 7), 1);
}

TEST(RasterizeQuad, ClosedSquareCounts49) {
  SeedGeometry g;
  g.quad = {Point2{2, 2}, {8, 2}, {8, 8}, {2, 8}};
  g.bbox = {2, 2, 8, 8};
  EXPECT_EQ(count_nonzero(rasterize_quad(g, {12, 12}).values()), 49u);
}

TEST(RasterizeQuad, DiamondMatchesPointInPolygonOracle) {
  SeedGeometry g;
  g.quad = {Point2{5, 0}, {10, 5}, {5, 10}, {0, 5}};
  g.bbox = {0, 0, 10, 10};
  const Mask2D m = rasterize_quad(g, {12, 12});
  std::size_t expected = 0;
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 0; x < 12; ++x) {
      const bool in = oracle::inside_or_on(g.quad, static_cast<double>(x), static_cast<double>(y));
      expected += in;
      EXPECT_EQ(m(x, y) != 0, in) << x << "," << y;
    }
  }
  EXPECT_EQ(count_nonzero(m.values()), expected);
  EXPECT_EQ(expected, 61u);
}

TEST(RasterizeQuad, RandomQuadsMatchOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> c(8, 24), r(1, 7), jitter(0.6, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double cx = c(rng), cy = c(rng);
    SeedGeometry g;
    for (int k = 0; k < 4; ++k) {
      const double a = k * 3.14159265358979 / 2 + 0.3 * jitter(rng);
      const double rad = r(rng);
      g.quad[static_cast<std::size_t>(k)] = {cx + rad * std::cos(a), cy + rad * std::sin(a)};
    }
    const Mask2D m = rasterize_quad(g, {32, 32});
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t x = 0; x < 32; ++x) {
        ASSERT_EQ(m(x, y) != 0,
                  oracle::inside_or_on(g.quad, static_cast<double>(x), static_cast<double>(y)))
            << "trial " << t << " at " << x << "," << y;
      }
    }
  }
}

TEST(PointInPolygon, EdgesAndVerticesAreInside) {
  const std::array<Point2, 4> sq = {Point2{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  EXPECT_TRUE(point_in_polygon(sq, {0, 0}));
  EXPECT_TRUE(point_in_polygon(sq, {2, 4}));
  EXPECT_TRUE(point_in_polygon(sq, {2, 2}));
  EXPECT_FALSE(point_in_polygon(sq, {4.01, 2}));
  EXPECT_FALSE(point_in_polygon(sq, {-1, -1}));
}

}  // namespace
}  // namespace osteoforge
