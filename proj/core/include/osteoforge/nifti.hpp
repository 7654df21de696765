#pragma once

#include <filesystem>

#include "osteoforge/volume.hpp"

namespace osteoforge {

// Single-file NIfTI-1 (.nii / .nii.gz) support. Only 3D images are accepted;
// gzip input is detected from the 0x1F 0x8B prefix, gzip output is chosen by
// a ".gz" extension.

/// Reads a CT volume. Integer and float datatypes are accepted; scl_slope and
/// scl_inter are applied when the slope is nonzero, then values are rounded
/// half away from zero and saturated to the int16 range.
Volume read_volume(const std::filesystem::path& path);

/// Reads an unsigned 8-bit (or other integer-valued) mask/label volume.
/// Values must fit in 0..255 after scaling.
Grid<std::uint8_t> read_u8_volume(const std::filesystem::path& path);

/// Reads a label volume and checks every code is one of 0..3.
LabelVolume read_label_volume(const std::filesystem::path& path);

/// Writes int16 data (datatype 4).
void write_volume(const Volume& volume, const std::filesystem::path& path);
/// Writes uint8 data (datatype 2).
void write_volume(const Grid<std::uint8_t>& volume,
                  const std::filesystem::path& path);

/// Reads only the header and returns its geometry.
Geometry read_geometry(const std::filesystem::path& path);

}  // namespace osteoforge
