#include "osteoforge/weak_label.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "osteoforge/components.hpp"
#include "osteoforge/morphology.hpp"

namespace osteoforge {

Mask2D WeakLesionMask::footprint(std::size_t z) const {
  if (z == center_slice) return center_mask;
  Mask2D out(center_mask.width(), center_mask.height(), 0);
  if (std::find(z_extent.begin(), z_extent.end(), z) == z_extent.end()) return out;
  for (long y = bbox.y_min; y <= bbox.y_max; ++y) {
    for (long x = bbox.x_min; x <= bbox.x_max; ++x) {
      out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = 1;
    }
  }
  return out;
}

std::size_t WeakLesionMask::voxel_count() const {
  std::size_t n = 0;
  for (std::size_t z : z_extent) {
    n += z == center_slice ? count_nonzero(center_mask.values()) : bbox.area();
  }
  return n;
}

WeakLesionMask build_weak_mask(const Mask2D& center_mask, const SeedGeometry& g,
                               std::size_t nz, std::string lesion_id) {
  if (g.slice_index >= nz) {
    throw ValidationError(fmt::format("lesion {}: slice {} outside volume with {} slices",
                                      lesion_id, g.slice_index, nz));
  }
  if (g.bbox.x_min < 0 || g.bbox.y_min < 0 ||
      g.bbox.x_max >= static_cast<long>(center_mask.width()) ||
      g.bbox.y_max >= static_cast<long>(center_mask.height())) {
    throw ValidationError(fmt::format("lesion {}: bounding box outside the slice", lesion_id));
  }
  std::size_t set = 0;
  for (std::size_t y = 0; y < center_mask.height(); ++y) {
    for (std::size_t x = 0; x < center_mask.width(); ++x) {
      if (center_mask(x, y) == 0) continue;
      ++set;
      if (!g.bbox.contains(static_cast<long>(x), static_cast<long>(y))) {
        throw ValidationError(
            fmt::format("lesion {}: centre mask extends outside its bounding box", lesion_id));
      }
    }
  }
  if (set == 0) {
    throw ValidationError(fmt::format("lesion {}: empty centre-slice mask", lesion_id));
  }

  WeakLesionMask out;
  out.lesion_id = std::move(lesion_id);
  out.center_slice = g.slice_index;
  out.center_mask = center_mask;
  for (auto& v : out.center_mask.values()) v = v != 0 ? 1 : 0;
  out.bbox = g.bbox;
  if (g.slice_index > 0) out.z_extent.push_back(g.slice_index - 1);
  out.z_extent.push_back(g.slice_index);
  if (g.slice_index + 1 < nz) out.z_extent.push_back(g.slice_index + 1);
  return out;
}

Mask3D rasterize_lesions(std::span<const WeakLesionMask> lesions, const Geometry& geometry) {
  Mask3D out(geometry);
  const Dims3& d = geometry.dims;
  for (const WeakLesionMask& lesion : lesions) {
    if (lesion.center_mask.width() != d.nx || lesion.center_mask.height() != d.ny) {
      throw GeometryError(fmt::format("lesion {}: mask is {}x{} but the volume plane is {}x{}",
                                      lesion.lesion_id, lesion.center_mask.width(),
                                      lesion.center_mask.height(), d.nx, d.ny));
    }
    for (std::size_t z : lesion.z_extent) {
      if (z >= d.nz) {
        throw GeometryError(
            fmt::format("lesion {}: slice {} outside the volume", lesion.lesion_id, z));
      }
      const Mask2D fp = lesion.footprint(z);
      for (std::size_t y = 0; y < d.ny; ++y) {
        for (std::size_t x = 0; x < d.nx; ++x) {
          if (fp(x, y)) out(x, y, z) = 1;
        }
      }
    }
  }
  return out;
}

LabelVolume merge_labels(const Mask3D& body, const Mask3D& skeleton,
                         std::span<const WeakLesionMask> lesions, const Geometry& geometry) {
  require_same_geometry(body.geometry(), geometry, "body mask");
  require_same_geometry(skeleton.geometry(), geometry, "skeleton mask");
  const Mask3D lesion = rasterize_lesions(lesions, geometry);
  LabelVolume out(geometry);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (lesion[i]) {
      out[i] = label::kLesion;
    } else if (skeleton[i]) {
      out[i] = label::kSkeleton;
    } else if (body[i]) {
      out[i] = label::kBody;
    }
  }
  return out;
}

Mask3D fallback_body_mask(const Volume& volume) {
  Mask3D mask = threshold_above(volume, kBodyThresholdHu);
  mask = largest_component(mask, Connectivity3D::kTwentySix);
  if (count_nonzero(mask.values()) == 0) {
    throw ValidationError("no voxel above -500 HU, cannot extract a body region");
  }
  return fill_holes_per_slice(close(mask));
}

Mask3D fallback_skeleton_mask(const Volume& volume, const Mask3D& body) {
  require_same_geometry(body.geometry(), volume.geometry(), "body mask");
  Mask3D bone = threshold_above(volume, kBoneThresholdHu);
  for (std::size_t i = 0; i < bone.size(); ++i) bone[i] = bone[i] && body[i] ? 1 : 0;
  return open(bone);
}

}  // namespace osteoforge
