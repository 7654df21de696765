#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "osteoforge/error.hpp"

namespace osteoforge {

struct Dims3 {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  std::size_t plane() const { return nx * ny; }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// Voxel grid geometry shared by a CT volume and every mask derived from it.
/// Spacing and origin are in millimetres.
struct Geometry {
  Dims3 dims;
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin;

  /// Dimensions identical and spacing/origin equal within `tol` mm.
  bool matches(const Geometry& other, double tol = 1e-4) const;
  void validate() const;
};

std::string describe(const Geometry& g);

/// Throws GeometryError naming `what` when the two grids differ.
void require_same_geometry(const Geometry& a, const Geometry& b,
                           const std::string& what);

/// Dense 3D grid, x-fastest (NIfTI on-disk order).
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(const Geometry& geometry, T fill = T{})
      : geometry_(geometry), data_(geometry.dims.count(), fill) {
    geometry_.validate();
  }
  Grid(const Geometry& geometry, std::vector<T> data)
      : geometry_(geometry), data_(std::move(data)) {
    geometry_.validate();
    if (data_.size() != geometry_.dims.count()) {
      throw ValidationError("grid data length " + std::to_string(data_.size()) +
                            " does not match dims " + describe(geometry_));
    }
  }

  const Geometry& geometry() const { return geometry_; }
  const Dims3& dims() const { return geometry_.dims; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + geometry_.dims.nx * (y + geometry_.dims.ny * z);
  }
  T& operator()(std::size_t x, std::size_t y, std::size_t z) {
    return data_[index(x, y, z)];
  }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[index(x, y, z)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t size() const { return data_.size(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.geometry_.dims == b.geometry_.dims && a.data_ == b.data_ &&
           a.geometry_.matches(b.geometry_, 1e-6);
  }

 private:
  Geometry geometry_;
  std::vector<T> data_;
};

/// Hounsfield units.
using Volume = Grid<std::int16_t>;
/// Class codes, see `Label`.
using LabelVolume = Grid<std::uint8_t>;
/// 0/1 voxel mask.
using Mask3D = Grid<std::uint8_t>;
/// Display-windowed intensities.
using WindowedVolume = Grid<std::uint8_t>;

namespace label {
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kBody = 1;
inline constexpr std::uint8_t kSkeleton = 2;
inline constexpr std::uint8_t kLesion = 3;
inline constexpr std::uint8_t kMaxCode = kLesion;
}  // namespace label

/// Throws ValidationError if any voxel holds a code outside 0..3.
void validate_label_codes(const LabelVolume& labels);

/// 2D raster, x-fastest.
template <typename T>
class Image2D {
 public:
  Image2D() = default;
  Image2D(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}
  Image2D(std::size_t width, std::size_t height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_) {
      throw ValidationError("image data length does not match its size");
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t x, std::size_t y) { return data_[x + width_ * y]; }
  const T& operator()(std::size_t x, std::size_t y) const {
    return data_[x + width_ * y];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  friend bool operator==(const Image2D&, const Image2D&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using Mask2D = Image2D<std::uint8_t>;
using GrayImage = Image2D<std::uint8_t>;

struct WindowSpec {
  double center = 50.0;
  double width = 450.0;

  void validate() const;
};

/// Rounds half away from zero. std::round already does this; the name
/// documents intent at call sites.
inline double round_half_away(double v) { return std::round(v); }

/// Maps [center - width/2, center + width/2] linearly onto [0, 255], clamping
/// outside the window.
std::uint8_t window_value(std::int16_t hu, const WindowSpec& window);
WindowedVolume window_to_u8(const Volume& volume, const WindowSpec& window);

template <typename T>
Image2D<T> extract_slice(const Grid<T>& volume, std::size_t z) {
  const Dims3& d = volume.dims();
  if (z >= d.nz) {
    throw ValidationError("slice index " + std::to_string(z) +
                          " out of range [0, " + std::to_string(d.nz) + ")");
  }
  auto values = volume.values();
  const std::size_t plane = d.plane();
  std::vector<T> out(values.begin() + static_cast<std::ptrdiff_t>(z * plane),
                     values.begin() + static_cast<std::ptrdiff_t>((z + 1) * plane));
  return Image2D<T>(d.nx, d.ny, std::move(out));
}

std::size_t count_nonzero(std::span<const std::uint8_t> values);

}  // namespace osteoforge
