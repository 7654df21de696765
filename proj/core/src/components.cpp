#include "osteoforge/components.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <numeric>

#include <fmt/format.h>

namespace osteoforge {
namespace {

struct Offset3 {
  int dx, dy, dz;
};

// Neighbours that precede a voxel in x-fastest scan order.
std::vector<Offset3> backward_offsets(Connectivity3D c) {
  const int max_manhattan = c == Connectivity3D::kSix ? 1 : c == Connectivity3D::kEighteen ? 2 : 3;
  std::vector<Offset3> out;
  for (int dz = -1; dz <= 0; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const bool before = dz < 0 || (dz == 0 && dy < 0) || (dz == 0 && dy == 0 && dx < 0);
        if (!before) continue;
        if (std::abs(dx) + std::abs(dy) + std::abs(dz) > max_manhattan) continue;
        out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

class UnionFind {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

Connectivity3D connectivity_from_int(int value) {
  switch (value) {
    case 6:
      return Connectivity3D::kSix;
    case 18:
      return Connectivity3D::kEighteen;
    case 26:
      return Connectivity3D::kTwentySix;
    default:
      throw ValidationError(fmt::format("connectivity must be 6, 18 or 26, got {}", value));
  }
}

ComponentSet connected_components(const Mask3D& mask, Connectivity3D connectivity) {
  const Dims3 d = mask.dims();
  const auto offsets = backward_offsets(connectivity);
  // Provisional labels are 1-based; 0 is background.
  std::vector<std::uint32_t> provisional(d.count(), 0);
  UnionFind uf;
  uf.make();  // slot 0 unused

  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = mask.index(x, y, z);
        if (mask[i] == 0) continue;
        std::uint32_t label = 0;
        for (const Offset3& o : offsets) {
          const long nx = static_cast<long>(x) + o.dx;
          const long ny = static_cast<long>(y) + o.dy;
          const long nz = static_cast<long>(z) + o.dz;
          if (nx < 0 || ny < 0 || nz < 0 || nx >= static_cast<long>(d.nx) ||
              ny >= static_cast<long>(d.ny)) {
            continue;
          }
          const std::uint32_t other = provisional[mask.index(
              static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
              static_cast<std::size_t>(nz))];
          if (other == 0) continue;
          if (label == 0) {
            label = other;
          } else {
            uf.unite(label, other);
          }
        }
        provisional[i] = label != 0 ? label : uf.make();
      }
    }
  }

  ComponentSet out{Grid<std::uint32_t>(mask.geometry()), {}};
  std::vector<std::uint32_t> final_id(uf.size(), 0);
  std::vector<std::array<double, 3>> sums;
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = mask.index(x, y, z);
        if (provisional[i] == 0) continue;
        const std::uint32_t root = uf.find(provisional[i]);
        if (final_id[root] == 0) {
          final_id[root] = static_cast<std::uint32_t>(out.components.size() + 1);
          Component c;
          c.id = final_id[root];
          c.bbox = {x, y, z, x, y, z};
          out.components.push_back(c);
          sums.push_back({0.0, 0.0, 0.0});
        }
        const std::uint32_t id = final_id[root];
        out.labels[i] = id;
        Component& c = out.components[id - 1];
        ++c.voxel_count;
        c.bbox.x_min = std::min(c.bbox.x_min, x);
        c.bbox.y_min = std::min(c.bbox.y_min, y);
        c.bbox.x_max = std::max(c.bbox.x_max, x);
        c.bbox.y_max = std::max(c.bbox.y_max, y);
        c.bbox.z_max = std::max(c.bbox.z_max, z);
        sums[id - 1][0] += static_cast<double>(x);
        sums[id - 1][1] += static_cast<double>(y);
        sums[id - 1][2] += static_cast<double>(z);
      }
    }
  }
  for (std::size_t k = 0; k < out.components.size(); ++k) {
    const double n = static_cast<double>(out.components[k].voxel_count);
    out.components[k].centroid = {sums[k][0] / n, sums[k][1] / n, sums[k][2] / n};
  }
  return out;
}

Mask3D largest_component(const Mask3D& mask, Connectivity3D connectivity) {
  const ComponentSet set = connected_components(mask, connectivity);
  Mask3D out(mask.geometry());
  if (set.components.empty()) return out;
  const auto best = std::max_element(
      set.components.begin(), set.components.end(),
      [](const Component& a, const Component& b) { return a.voxel_count < b.voxel_count; });
  const auto labels = set.labels.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < labels.size(); ++i) dst[i] = labels[i] == best->id ? 1 : 0;
  return out;
}

Mask3D remove_small_components(const Mask3D& mask, std::size_t min_voxels,
                               Connectivity3D connectivity) {
  const ComponentSet set = connected_components(mask, connectivity);
  Mask3D out(mask.geometry());
  const auto labels = set.labels.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && set.components[labels[i] - 1].voxel_count >= min_voxels) dst[i] = 1;
  }
  return out;
}

}  // namespace osteoforge
