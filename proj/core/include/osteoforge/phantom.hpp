#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "osteoforge/recist.hpp"
#include "osteoforge/volume.hpp"

namespace osteoforge {

// Synthetic CT phantom. Positions are millimetres from the centre of voxel
// (0, 0, 0) along the grid axes; voxel (i, j, k) sits at (i*sx, j*sy, k*sz).

inline constexpr std::int16_t kAirHu = -1000;
inline constexpr std::int16_t kSoftTissueHu = 40;

struct BodySpec {
  Vec3 center;
  Vec3 semi_axes;
  std::int16_t hu = kSoftTissueHu;
};

struct BoneSpec {
  enum class Shape { kEllipsoid, kTube };  // tubes run along z through the volume
  Shape shape = Shape::kTube;
  Vec3 center;
  Vec3 semi_axes;
  std::int16_t hu = 500;
};

enum class LesionType { kLytic, kBlastic, kMixed };

const char* to_string(LesionType type);
LesionType lesion_type_from_string(const std::string& text);

/// Lesion HU is the host bone HU plus `hu_offset` (negative for lytic,
/// positive for blastic). Mixed lesions have a lytic core of half the radius
/// at bone - |offset| and a blastic rim at bone + |offset|.
struct LesionSpec {
  std::string id;
  Vec3 center;
  double radius_mm = 5.0;
  LesionType type = LesionType::kLytic;
  int hu_offset = -400;
};

struct PhantomSpec {
  std::string series_id = "PHANTOM";
  Dims3 dims{128, 128, 40};
  Vec3 spacing{0.8, 0.8, 2.5};
  BodySpec body;
  std::vector<BoneSpec> bones;
  std::vector<LesionSpec> lesions;
  double noise_sigma = 15.0;
  std::uint64_t seed = 1;

  /// Ten lesions of all three types spread over a spine and two long bones.
  static PhantomSpec default_spec();
  /// Throws ValidationError on broken invariants that do not need
  /// rasterisation (offset signs, positive sizes).
  void validate() const;
};

PhantomSpec phantom_spec_from_json(const nlohmann::json& doc);
nlohmann::json phantom_spec_to_json(const PhantomSpec& spec);
PhantomSpec read_phantom_spec(const std::filesystem::path& path);

struct Phantom {
  Volume volume;
  LabelVolume labels;  // body 1, bone 2, lesion 3
  Mask3D body;
  Mask3D skeleton;  // bone region including lesions
  std::vector<Mask3D> lesion_masks;
  std::vector<RecistMeasurement> recist;
};

/// Deterministic for a fixed seed. Throws ValidationError when a lesion
/// leaves the bone region or covers no voxel centre. Spheres crossing the
/// grid boundary are clipped to it.
Phantom generate_phantom(const PhantomSpec& spec);

/// Lesion-instance map: voxel value is 1 + the lesion's index, 0 elsewhere.
Grid<std::uint8_t> lesion_instance_map(std::span<const Mask3D> lesion_masks);

struct PerturbMode {
  enum class Kind { kPerfect, kDilate, kErode, kDrop, kAddSpurious };
  Kind kind = Kind::kPerfect;
  std::size_t count = 0;  // k for drop / add_spurious

  static PerturbMode parse(const std::string& text);  // "perfect", "drop:2", ...
};

/// Controlled predictions derived from ground-truth lesion masks. Spurious
/// components are 3x3x3 cubes kept at least one voxel away from every other
/// foreground voxel so they stay separate components under any connectivity.
Mask3D perturb_predictions(std::span<const Mask3D> gt_masks, const PerturbMode& mode,
                           std::uint64_t seed);

}  // namespace osteoforge
