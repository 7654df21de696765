#pragma once

#include <span>
#include <string>
#include <vector>

#include "osteoforge/recist.hpp"
#include "osteoforge/volume.hpp"

namespace osteoforge {

/// Three-slice weak annotation: the GrabCut delineation on the measured slice
/// and the filled measurement box on the slices directly above and below.
struct WeakLesionMask {
  std::string lesion_id;
  std::size_t center_slice = 0;
  Mask2D center_mask;
  PixelRect bbox;
  std::vector<std::size_t> z_extent;  // ascending

  /// Footprint on slice z (empty mask when z is outside the extent).
  Mask2D footprint(std::size_t z) const;
  std::size_t voxel_count() const;
};

/// Throws ValidationError when the centre mask is empty, leaves the box, or
/// the slice index is out of range.
WeakLesionMask build_weak_mask(const Mask2D& center_mask, const SeedGeometry& g,
                               std::size_t nz, std::string lesion_id = {});

/// Union of all weak lesion masks on the grid.
Mask3D rasterize_lesions(std::span<const WeakLesionMask> lesions, const Geometry& geometry);

/// Per-voxel precedence lesion(3) > skeleton(2) > body(1) > background(0).
LabelVolume merge_labels(const Mask3D& body, const Mask3D& skeleton,
                         std::span<const WeakLesionMask> lesions, const Geometry& geometry);

/// Stand-in body region: HU > -500, largest 26-connected component, closing,
/// then per-slice hole filling. Throws ValidationError if nothing remains.
Mask3D fallback_body_mask(const Volume& volume);

/// Stand-in skeleton region: (HU > 200) within the body, then opening.
Mask3D fallback_skeleton_mask(const Volume& volume, const Mask3D& body);

inline constexpr std::int16_t kBodyThresholdHu = -500;
inline constexpr std::int16_t kBoneThresholdHu = 200;

}  // namespace osteoforge
