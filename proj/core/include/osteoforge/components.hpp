#pragma once

#include <cstdint>
#include <vector>

#include "osteoforge/volume.hpp"

namespace osteoforge {

enum class Connectivity3D { kSix = 6, kEighteen = 18, kTwentySix = 26 };

/// Throws ValidationError for anything other than 6, 18 or 26.
Connectivity3D connectivity_from_int(int value);

struct VoxelBox {
  std::size_t x_min = 0, y_min = 0, z_min = 0;
  std::size_t x_max = 0, y_max = 0, z_max = 0;
};

struct Component {
  std::uint32_t id = 0;
  std::size_t voxel_count = 0;
  VoxelBox bbox;
  Vec3 centroid;  // voxel coordinates
};

/// Foreground partition. Ids are 1..N in order of each component's first
/// voxel in x-fastest scan order; 0 marks background.
struct ComponentSet {
  Grid<std::uint32_t> labels;
  std::vector<Component> components;

  std::size_t size() const { return components.size(); }
};

/// Two-pass union-find labelling.
ComponentSet connected_components(const Mask3D& mask,
                                  Connectivity3D connectivity = Connectivity3D::kTwentySix);

/// Mask of the component with the most voxels (first id wins ties); empty
/// when there is no foreground.
Mask3D largest_component(const Mask3D& mask,
                         Connectivity3D connectivity = Connectivity3D::kTwentySix);

/// Drops components with fewer than `min_voxels` voxels.
Mask3D remove_small_components(const Mask3D& mask, std::size_t min_voxels,
                               Connectivity3D connectivity = Connectivity3D::kTwentySix);

}  // namespace osteoforge
