#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "osteoforge/morphology.hpp"

namespace osteoforge {
namespace {

Mask3D brute_dilate(const Mask3D& m) {
  const Dims3& d = m.dims();
  Mask3D out(m.geometry());
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x)
        for (long dz = -1; dz <= 1; ++dz)
          for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
              const long X = static_cast<long>(x) + dx, Y = static_cast<long>(y) + dy,
                         Z = static_cast<long>(z) + dz;
              if (X < 0 || Y < 0 || Z < 0 || X >= static_cast<long>(d.nx) ||
                  Y >= static_cast<long>(d.ny) || Z >= static_cast<long>(d.nz))
                continue;
              if (m(static_cast<std::size_t>(X), static_cast<std::size_t>(Y),
                    static_cast<std::size_t>(Z)))
                out(x, y, z) = 1;
            }
  return out;
}

Mask3D complement(const Mask3D& m) {
  Mask3D out(m.geometry());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = !m[i];
  return out;
}

TEST(Morphology, DilateAndErodeMatchBruteForce) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const Mask3D m = oracle::random_mask(rng, {9, 7, 5}, 0.2);
    ASSERT_EQ(dilate(m), brute_dilate(m));
    // Out-of-grid voxels are ignored, so erosion is the dual of dilation.
    ASSERT_EQ(erode(m), complement(brute_dilate(complement(m))));
  }
}

TEST(Morphology, OpeningRemovesSpeckle) {
  Mask3D m({{9, 9, 9}, {1, 1, 1}, {}});
  m(4, 4, 4) = 1;
  EXPECT_EQ(count_nonzero(open(m).values()), 0u);
}

TEST(Morphology, OpeningKeepsCube) {
  Mask3D m({{9, 9, 9}, {1, 1, 1}, {}});
  for (std::size_t z = 2; z < 5; ++z)
    for (std::size_t y = 2; y < 5; ++y)
      for (std::size_t x = 2; x < 5; ++x) m(x, y, z) = 1;
  EXPECT_EQ(open(m), m);
}

TEST(Morphology, ClosingIsExtensiveOpeningAntiExtensive) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 10; ++t) {
    const Mask3D m = oracle::random_mask(rng, {8, 8, 6}, 0.4);
    const Mask3D c = close(m), o = open(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      ASSERT_GE(c[i], m[i]);
      ASSERT_LE(o[i], m[i]);
    }
  }
}

TEST(Morphology, FillHolesPerSlice) {
  Mask3D m({{7, 7, 2}, {1, 1, 1}, {}});
  for (std::size_t y = 1; y < 6; ++y)
    for (std::size_t x = 1; x < 6; ++x) m(x, y, 0) = (x == 1 || x == 5 || y == 1 || y == 5);
  // Slice 1: ring open to the border through a gap.
  for (std::size_t y = 1; y < 6; ++y)
    for (std::size_t x = 1; x < 6; ++x) m(x, y, 1) = (x == 1 || x == 5 || y == 1 || y == 5);
  m(3, 1, 1) = 0;
  const Mask3D f = fill_holes_per_slice(m);
  EXPECT_EQ(f(3, 3, 0), 1);
  EXPECT_EQ(count_nonzero(f.values().subspan(0, 49)), 25u);
  EXPECT_EQ(f(3, 3, 1), 0);
}

TEST(Morphology, ThresholdIsStrict) {
  Volume v({{3, 1, 1}, {1, 1, 1}, {}});
  v[0] = 199;
  v[1] = 200;
  v[2] = 201;
  const Mask3D m = threshold_above(v, 200);
  EXPECT_EQ(m[0], 0);
  EXPECT_EQ(m[1], 0);
  EXPECT_EQ(m[2], 1);
}

}  // namespace
}  // namespace osteoforge
