#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "osteoforge/recist.hpp"
#include "osteoforge/volume.hpp"

namespace osteoforge::cli {

using Rgb = std::array<std::uint8_t, 3>;
using RgbImage = Image2D<Rgb>;

inline constexpr Rgb kBodyColor{255, 0, 0};
inline constexpr Rgb kSkeletonColor{0, 255, 0};
inline constexpr Rgb kLesionColor{255, 255, 0};
inline constexpr Rgb kRecistColor{255, 0, 255};

/// 50% blend, halves rounded up: (a + b + 1) / 2 per channel.
Rgb blend_half(Rgb base, Rgb over);

/// QC overlay for one slice, painted in order: windowed gray, body contour
/// (labels >= 1), skeleton contour (labels 2 and 3), lesion fill blended over
/// whatever is underneath, then RECIST lines. A contour pixel belongs to the
/// region and has a 4-neighbour outside it; the image border counts as
/// outside.
RgbImage render_overlay(const GrayImage& gray, const Image2D<std::uint8_t>& labels,
                        const std::vector<RecistMeasurement>& recist = {});

/// Slices holding at least one nonzero label, ascending.
std::vector<std::size_t> slices_with_labels(const LabelVolume& labels);

void write_png(const RgbImage& image, const std::filesystem::path& path);
/// Reads 8-bit RGB PNGs written by write_png.
RgbImage read_png(const std::filesystem::path& path);

}  // namespace osteoforge::cli
