#include "osteoforge/morphology.hpp"

#include <algorithm>
#include <vector>

namespace osteoforge {
namespace {

// One pass of a 3-wide max (dilate) or min (erode) filter along one axis.
template <bool kMax>
void filter_axis(Mask3D& mask, int axis) {
  const Dims3 d = mask.dims();
  const std::size_t len = axis == 0 ? d.nx : axis == 1 ? d.ny : d.nz;
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d.nx : d.plane();
  std::vector<std::uint8_t> line(len);
  auto values = mask.values();
  for (std::size_t z = 0; z < (axis == 2 ? 1 : d.nz); ++z) {
    for (std::size_t y = 0; y < (axis == 1 ? 1 : d.ny); ++y) {
      for (std::size_t x = 0; x < (axis == 0 ? 1 : d.nx); ++x) {
        const std::size_t base = mask.index(x, y, z);
        for (std::size_t i = 0; i < len; ++i) line[i] = values[base + i * stride];
        for (std::size_t i = 0; i < len; ++i) {
          std::uint8_t v = line[i];
          if (i > 0) v = kMax ? std::max(v, line[i - 1]) : std::min(v, line[i - 1]);
          if (i + 1 < len) v = kMax ? std::max(v, line[i + 1]) : std::min(v, line[i + 1]);
          values[base + i * stride] = v;
        }
      }
    }
  }
}

template <bool kMax>
Mask3D cube_filter(const Mask3D& mask) {
  Mask3D out = mask;
  for (auto& v : out.values()) v = v != 0 ? 1 : 0;
  filter_axis<kMax>(out, 0);
  filter_axis<kMax>(out, 1);
  filter_axis<kMax>(out, 2);
  return out;
}

}  // namespace

Mask3D dilate(const Mask3D& mask) { return cube_filter<true>(mask); }
Mask3D erode(const Mask3D& mask) { return cube_filter<false>(mask); }
Mask3D open(const Mask3D& mask) { return dilate(erode(mask)); }
Mask3D close(const Mask3D& mask) { return erode(dilate(mask)); }

Mask3D fill_holes_per_slice(const Mask3D& mask) {
  const Dims3 d = mask.dims();
  Mask3D out = mask;
  std::vector<std::uint8_t> outside(d.plane());
  std::vector<std::size_t> stack;
  for (std::size_t z = 0; z < d.nz; ++z) {
    std::fill(outside.begin(), outside.end(), 0);
    auto seed = [&](std::size_t x, std::size_t y) {
      const std::size_t i = x + d.nx * y;
      if (!outside[i] && mask(x, y, z) == 0) {
        outside[i] = 1;
        stack.push_back(i);
      }
    };
    for (std::size_t x = 0; x < d.nx; ++x) {
      seed(x, 0);
      seed(x, d.ny - 1);
    }
    for (std::size_t y = 0; y < d.ny; ++y) {
      seed(0, y);
      seed(d.nx - 1, y);
    }
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t x = i % d.nx;
      const std::size_t y = i / d.nx;
      if (x > 0) seed(x - 1, y);
      if (x + 1 < d.nx) seed(x + 1, y);
      if (y > 0) seed(x, y - 1);
      if (y + 1 < d.ny) seed(x, y + 1);
    }
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        if (!outside[x + d.nx * y]) out(x, y, z) = 1;
      }
    }
  }
  return out;
}

Mask3D threshold_above(const Volume& volume, std::int16_t hu) {
  Mask3D out(volume.geometry());
  const auto in = volume.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) dst[i] = in[i] > hu ? 1 : 0;
  return out;
}

}  // namespace osteoforge
