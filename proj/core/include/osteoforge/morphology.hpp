#pragma once

#include "osteoforge/volume.hpp"

namespace osteoforge {

// Binary morphology with the 3x3x3 cube (Chebyshev radius 1). Voxels outside
// the grid are ignored rather than treated as background, so closing is
// extensive and opening anti-extensive up to the volume border.

Mask3D dilate(const Mask3D& mask);
Mask3D erode(const Mask3D& mask);
Mask3D open(const Mask3D& mask);
Mask3D close(const Mask3D& mask);

/// Fills background regions not 4-connected to the slice border, slice by
/// slice.
Mask3D fill_holes_per_slice(const Mask3D& mask);

Mask3D threshold_above(const Volume& volume, std::int16_t hu);

}  // namespace osteoforge
