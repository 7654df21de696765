#include "osteoforge/volume.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace osteoforge {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kValidation:
      return "validation";
    case ErrorKind::kGeometry:
      return "geometry";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kInternal:
      return "internal";
  }
  return "internal";
}

bool Geometry::matches(const Geometry& other, double tol) const {
  auto close = [tol](const Vec3& a, const Vec3& b) {
    return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol &&
           std::abs(a.z - b.z) <= tol;
  };
  return dims == other.dims && close(spacing, other.spacing) &&
         close(origin, other.origin);
}

void Geometry::validate() const {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
    throw ValidationError("volume dimensions must be positive, got " +
                          describe(*this));
  }
  if (!(spacing.x > 0.0) || !(spacing.y > 0.0) || !(spacing.z > 0.0)) {
    throw ValidationError("voxel spacing must be strictly positive, got " +
                          describe(*this));
  }
}

std::string describe(const Geometry& g) {
  return fmt::format("{}x{}x{} @ ({:g}, {:g}, {:g}) mm", g.dims.nx, g.dims.ny,
                     g.dims.nz, g.spacing.x, g.spacing.y, g.spacing.z);
}

void require_same_geometry(const Geometry& a, const Geometry& b,
                           const std::string& what) {
  if (!a.matches(b)) {
    throw GeometryError(fmt::format("geometry mismatch for {}: {} vs {}", what,
                                    describe(a), describe(b)));
  }
}

void validate_label_codes(const LabelVolume& labels) {
  const auto values = labels.values();
  const auto bad = std::find_if(values.begin(), values.end(),
                                [](std::uint8_t v) { return v > label::kMaxCode; });
  if (bad != values.end()) {
    throw ValidationError(fmt::format("label code {} at voxel {} is not one of 0..3",
                                      static_cast<int>(*bad), bad - values.begin()));
  }
}

void WindowSpec::validate() const {
  if (!(width > 0.0)) {
    throw ValidationError(fmt::format("window width must be > 0, got {:g}", width));
  }
}

std::uint8_t window_value(std::int16_t hu, const WindowSpec& window) {
  const double lower = window.center - window.width / 2.0;
  const double scaled = (static_cast<double>(hu) - lower) * 255.0 / window.width;
  return static_cast<std::uint8_t>(round_half_away(std::clamp(scaled, 0.0, 255.0)));
}

WindowedVolume window_to_u8(const Volume& volume, const WindowSpec& window) {
  window.validate();
  // HU has only 65536 possible values; a lookup table keeps full volumes cheap.
  std::vector<std::uint8_t> table(65536);
  for (int hu = -32768; hu <= 32767; ++hu) {
    table[static_cast<std::size_t>(hu + 32768)] =
        window_value(static_cast<std::int16_t>(hu), window);
  }
  WindowedVolume out(volume.geometry());
  const auto in = volume.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    dst[i] = table[static_cast<std::size_t>(in[i] + 32768)];
  }
  return out;
}

std::size_t count_nonzero(std::span<const std::uint8_t> values) {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace osteoforge
