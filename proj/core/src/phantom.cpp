#include "osteoforge/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "osteoforge/morphology.hpp"

namespace osteoforge {

namespace {

using nlohmann::json;

double sq(double v) { return v * v; }

Vec3 voxel_mm(const Vec3& spacing, std::size_t x, std::size_t y, std::size_t z) {
  return {static_cast<double>(x) * spacing.x, static_cast<double>(y) * spacing.y,
          static_cast<double>(z) * spacing.z};
}

bool inside_ellipsoid(const Vec3& p, const Vec3& c, const Vec3& r) {
  return sq((p.x - c.x) / r.x) + sq((p.y - c.y) / r.y) + sq((p.z - c.z) / r.z) <= 1.0;
}

bool inside_bone(const BoneSpec& bone, const Vec3& p) {
  if (bone.shape == BoneSpec::Shape::kTube) {
    return sq((p.x - bone.center.x) / bone.semi_axes.x) +
               sq((p.y - bone.center.y) / bone.semi_axes.y) <=
           1.0;
  }
  return inside_ellipsoid(p, bone.center, bone.semi_axes);
}

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt(sq(a.x - b.x) + sq(a.y - b.y) + sq(a.z - b.z));
}

std::int16_t saturate(double v) {
  return static_cast<std::int16_t>(std::clamp(round_half_away(v), -32768.0, 32767.0));
}

Vec3 vec_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ValidationError(fmt::format("phantom spec: {} must be a 3-element array", what));
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

BoneSpec::Shape shape_from_string(const std::string& s) {
  if (s == "tube") return BoneSpec::Shape::kTube;
  if (s == "ellipsoid") return BoneSpec::Shape::kEllipsoid;
  throw ValidationError(fmt::format("phantom spec: unknown bone shape '{}'", s));
}

// Host bone HU for a lesion: the last listed bone containing its centre.
std::optional<std::int16_t> host_bone_hu(const PhantomSpec& spec, const Vec3& p) {
  std::optional<std::int16_t> hu;
  for (const BoneSpec& b : spec.bones) {
    if (inside_bone(b, p)) hu = b.hu;
  }
  return hu;
}

// Axial cross-section with the most voxels; ties go to the slice nearest the
// centre, then the lower one.
std::size_t largest_slice(const Mask3D& mask, double center_z) {
  const Dims3& d = mask.dims();
  std::size_t best = 0;
  std::size_t best_count = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t z = 0; z < d.nz; ++z) {
    const auto plane = mask.values().subspan(z * d.plane(), d.plane());
    const std::size_t n = count_nonzero(plane);
    const double dist = std::abs(static_cast<double>(z) - center_z);
    if (n > best_count || (n == best_count && n > 0 && dist < best_dist)) {
      best = z;
      best_count = n;
      best_dist = dist;
    }
  }
  return best;
}

// Measurement through the in-plane centre pixel, spanning the extreme mask
// pixels of its row and column.
RecistMeasurement measure_lesion(const Mask3D& mask, const LesionSpec& lesion,
                                 const PhantomSpec& spec) {
  const Dims3& d = mask.dims();
  const std::size_t z = largest_slice(mask, lesion.center.z / spec.spacing.z);
  const double cx = lesion.center.x / spec.spacing.x;
  const double cy = lesion.center.y / spec.spacing.y;
  long px = -1;
  long py = -1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < d.ny; ++y) {
    for (std::size_t x = 0; x < d.nx; ++x) {
      if (!mask(x, y, z)) continue;
      const double dd = sq(static_cast<double>(x) - cx) + sq(static_cast<double>(y) - cy);
      if (dd < best) {
        best = dd;
        px = static_cast<long>(x);
        py = static_cast<long>(y);
      }
    }
  }
  const auto ux = static_cast<std::size_t>(px);
  const auto uy = static_cast<std::size_t>(py);
  long x0 = px, x1 = px, y0 = py, y1 = py;
  while (x0 > 0 && mask(static_cast<std::size_t>(x0 - 1), uy, z)) --x0;
  while (x1 + 1 < static_cast<long>(d.nx) && mask(static_cast<std::size_t>(x1 + 1), uy, z)) ++x1;
  while (y0 > 0 && mask(ux, static_cast<std::size_t>(y0 - 1), z)) --y0;
  while (y1 + 1 < static_cast<long>(d.ny) && mask(ux, static_cast<std::size_t>(y1 + 1), z)) ++y1;

  const auto fx = static_cast<double>(px);
  const auto fy = static_cast<double>(py);
  const Segment2 horizontal{{static_cast<double>(x0), fy}, {static_cast<double>(x1), fy}};
  const Segment2 vertical{{fx, static_cast<double>(y0)}, {fx, static_cast<double>(y1)}};
  const double len_h = static_cast<double>(x1 - x0) * spec.spacing.x;
  const double len_v = static_cast<double>(y1 - y0) * spec.spacing.y;

  RecistMeasurement m;
  m.lesion_id = lesion.id;
  m.series_id = spec.series_id;
  m.slice_index = z;
  m.long_axis = len_h >= len_v ? horizontal : vertical;
  m.short_axis = len_h >= len_v ? vertical : horizontal;
  return m;
}

}  // namespace

const char* to_string(LesionType type) {
  switch (type) {
    case LesionType::kLytic: return "lytic";
    case LesionType::kBlastic: return "blastic";
    case LesionType::kMixed: return "mixed";
  }
  return "?";
}

LesionType lesion_type_from_string(const std::string& text) {
  if (text == "lytic") return LesionType::kLytic;
  if (text == "blastic") return LesionType::kBlastic;
  if (text == "mixed") return LesionType::kMixed;
  throw ValidationError(fmt::format("unknown lesion type '{}'", text));
}

PhantomSpec PhantomSpec::default_spec() {
  PhantomSpec s;
  s.body = {{51.0, 51.0, 48.75}, {46.0, 40.0, 80.0}, kSoftTissueHu};
  s.bones = {
      {BoneSpec::Shape::kTube, {51.0, 72.0, 0.0}, {13.0, 11.0, 1.0}, 400},
      {BoneSpec::Shape::kTube, {24.0, 46.0, 0.0}, {10.0, 10.0, 1.0}, 380},
      {BoneSpec::Shape::kTube, {78.0, 46.0, 0.0}, {10.0, 10.0, 1.0}, 420},
  };
  // Lesions sharing a bone are at least 20 mm apart in z so their three-slice
  // weak masks never touch.
  s.lesions = {
      {"L01", {51.0, 72.0, 12.5}, 6.0, LesionType::kLytic, -350},
      {"L02", {51.0, 72.0, 35.0}, 5.0, LesionType::kBlastic, 350},
      {"L03", {51.0, 72.0, 60.0}, 6.5, LesionType::kMixed, 350},
      {"L04", {51.0, 72.0, 85.0}, 5.0, LesionType::kLytic, -330},
      {"L05", {24.0, 46.0, 17.5}, 5.5, LesionType::kBlastic, 320},
      {"L06", {24.0, 46.0, 47.5}, 6.0, LesionType::kLytic, -340},
      {"L07", {24.0, 46.0, 77.5}, 5.0, LesionType::kMixed, 330},
      {"L08", {78.0, 46.0, 22.5}, 6.0, LesionType::kLytic, -370},
      {"L09", {78.0, 46.0, 52.5}, 5.5, LesionType::kBlastic, 300},
      {"L10", {78.0, 46.0, 82.5}, 5.0, LesionType::kLytic, -360},
  };
  return s;
}

void PhantomSpec::validate() const {
  Geometry{dims, spacing, {}}.validate();
  auto positive = [](const Vec3& v) { return v.x > 0 && v.y > 0 && v.z > 0; };
  if (!positive(body.semi_axes)) throw ValidationError("phantom body semi-axes must be positive");
  if (noise_sigma < 0.0 || !std::isfinite(noise_sigma)) {
    throw ValidationError("phantom noise sigma must be finite and non-negative");
  }
  for (const BoneSpec& b : bones) {
    if (!positive(b.semi_axes)) throw ValidationError("phantom bone semi-axes must be positive");
    if (b.hu < 300 || b.hu > 700) {
      throw ValidationError(fmt::format("phantom bone HU {} outside [300, 700]", b.hu));
    }
  }
  for (const LesionSpec& l : lesions) {
    if (!(l.radius_mm > 0.0)) {
      throw ValidationError(fmt::format("lesion {}: radius must be positive", l.id));
    }
    const bool ok = (l.type == LesionType::kLytic && l.hu_offset < 0) ||
                    (l.type == LesionType::kBlastic && l.hu_offset > 0) ||
                    (l.type == LesionType::kMixed && l.hu_offset != 0);
    if (!ok) {
      throw ValidationError(fmt::format("lesion {}: HU offset {} does not fit a {} lesion", l.id,
                                        l.hu_offset, to_string(l.type)));
    }
  }
}

PhantomSpec phantom_spec_from_json(const json& doc) {
  PhantomSpec s = PhantomSpec::default_spec();
  try {
    if (!doc.is_object()) throw ValidationError("phantom spec must be a JSON object");
    if (doc.contains("series_id")) s.series_id = doc["series_id"].get<std::string>();
    if (doc.contains("dims")) {
      const auto d = doc["dims"].get<std::vector<std::size_t>>();
      if (d.size() != 3) throw ValidationError("phantom spec: dims must have 3 entries");
      s.dims = {d[0], d[1], d[2]};
    }
    if (doc.contains("spacing")) s.spacing = vec_from_json(doc["spacing"], "spacing");
    if (doc.contains("body")) {
      const json& b = doc["body"];
      s.body.center = vec_from_json(b.at("center"), "body.center");
      s.body.semi_axes = vec_from_json(b.at("semi_axes"), "body.semi_axes");
      s.body.hu = b.value("hu", kSoftTissueHu);
    }
    if (doc.contains("bones")) {
      s.bones.clear();
      for (const json& b : doc["bones"]) {
        BoneSpec bone;
        bone.shape = shape_from_string(b.value("shape", std::string("tube")));
        bone.center = vec_from_json(b.at("center"), "bone.center");
        bone.semi_axes = vec_from_json(b.at("semi_axes"), "bone.semi_axes");
        bone.hu = b.at("hu").get<std::int16_t>();
        s.bones.push_back(bone);
      }
    }
    if (doc.contains("lesions")) {
      s.lesions.clear();
      for (const json& l : doc["lesions"]) {
        LesionSpec lesion;
        lesion.id = l.value("id", fmt::format("L{:02d}", s.lesions.size() + 1));
        lesion.center = vec_from_json(l.at("center"), "lesion.center");
        lesion.radius_mm = l.at("radius_mm").get<double>();
        lesion.type = lesion_type_from_string(l.at("type").get<std::string>());
        lesion.hu_offset = l.at("hu_offset").get<int>();
        s.lesions.push_back(lesion);
      }
    }
    if (doc.contains("noise_sigma")) s.noise_sigma = doc["noise_sigma"].get<double>();
    if (doc.contains("seed")) s.seed = doc["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("phantom spec: {}", e.what()));
  }
  s.validate();
  return s;
}

json phantom_spec_to_json(const PhantomSpec& s) {
  json doc;
  doc["series_id"] = s.series_id;
  doc["dims"] = {s.dims.nx, s.dims.ny, s.dims.nz};
  doc["spacing"] = vec_to_json(s.spacing);
  doc["body"] = {{"center", vec_to_json(s.body.center)},
                 {"semi_axes", vec_to_json(s.body.semi_axes)},
                 {"hu", s.body.hu}};
  doc["bones"] = json::array();
  for (const BoneSpec& b : s.bones) {
    doc["bones"].push_back({{"shape", b.shape == BoneSpec::Shape::kTube ? "tube" : "ellipsoid"},
                            {"center", vec_to_json(b.center)},
                            {"semi_axes", vec_to_json(b.semi_axes)},
                            {"hu", b.hu}});
  }
  doc["lesions"] = json::array();
  for (const LesionSpec& l : s.lesions) {
    doc["lesions"].push_back({{"id", l.id},
                              {"center", vec_to_json(l.center)},
                              {"radius_mm", l.radius_mm},
                              {"type", to_string(l.type)},
                              {"hu_offset", l.hu_offset}});
  }
  doc["noise_sigma"] = s.noise_sigma;
  doc["seed"] = s.seed;
  return doc;
}

PhantomSpec read_phantom_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return phantom_spec_from_json(doc);
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Geometry geometry{spec.dims, spec.spacing, {}};
  const Dims3& d = spec.dims;

  Phantom p;
  p.volume = Volume(geometry, kAirHu);
  p.body = Mask3D(geometry);
  p.skeleton = Mask3D(geometry);
  std::vector<double> hu(d.count(), static_cast<double>(kAirHu));

  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        const Vec3 pos = voxel_mm(spec.spacing, x, y, z);
        const std::size_t i = geometry.dims.nx * (y + d.ny * z) + x;
        if (inside_ellipsoid(pos, spec.body.center, spec.body.semi_axes)) {
          p.body[i] = 1;
          hu[i] = spec.body.hu;
        }
        for (const BoneSpec& b : spec.bones) {
          if (inside_bone(b, pos)) {
            p.skeleton[i] = 1;
            hu[i] = b.hu;
          }
        }
      }
    }
  }

  for (const LesionSpec& l : spec.lesions) {
    const auto bone_hu = host_bone_hu(spec, l.center);
    if (!bone_hu) {
      throw ValidationError(fmt::format("lesion {}: centre lies outside every bone", l.id));
    }
    Mask3D mask(geometry);
    std::size_t n = 0;
    const int magnitude = std::abs(l.hu_offset);
    for (std::size_t z = 0; z < d.nz; ++z) {
      for (std::size_t y = 0; y < d.ny; ++y) {
        for (std::size_t x = 0; x < d.nx; ++x) {
          const Vec3 pos = voxel_mm(spec.spacing, x, y, z);
          const double r = distance(pos, l.center);
          if (r > l.radius_mm) continue;
          const std::size_t i = mask.index(x, y, z);
          if (!p.skeleton[i]) {
            throw ValidationError(fmt::format("lesion {}: extends outside the bone region", l.id));
          }
          mask[i] = 1;
          ++n;
          int value = *bone_hu + l.hu_offset;
          if (l.type == LesionType::kMixed) {
            value = r <= l.radius_mm / 2.0 ? *bone_hu - magnitude : *bone_hu + magnitude;
          }
          hu[i] = value;
        }
      }
    }
    if (n == 0) throw ValidationError(fmt::format("lesion {}: covers no voxel centre", l.id));
    p.recist.push_back(measure_lesion(mask, l, spec));
    p.lesion_masks.push_back(std::move(mask));
  }

  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : hu) v += noise(rng);
  }
  for (std::size_t i = 0; i < hu.size(); ++i) p.volume[i] = saturate(hu[i]);

  p.labels = LabelVolume(geometry);
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    if (p.skeleton[i]) {
      p.labels[i] = label::kSkeleton;
    } else if (p.body[i]) {
      p.labels[i] = label::kBody;
    }
  }
  for (const Mask3D& m : p.lesion_masks) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i]) p.labels[i] = label::kLesion;
    }
  }
  return p;
}

Grid<std::uint8_t> lesion_instance_map(std::span<const Mask3D> lesion_masks) {
  if (lesion_masks.empty()) throw ValidationError("no lesion masks");
  if (lesion_masks.size() > 255) throw ValidationError("more than 255 lesions");
  Grid<std::uint8_t> out(lesion_masks.front().geometry());
  for (std::size_t k = 0; k < lesion_masks.size(); ++k) {
    require_same_geometry(lesion_masks[k].geometry(), out.geometry(), "lesion mask");
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (lesion_masks[k][i]) out[i] = static_cast<std::uint8_t>(k + 1);
    }
  }
  return out;
}

PerturbMode PerturbMode::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  PerturbMode m;
  if (name == "perfect") {
    m.kind = Kind::kPerfect;
  } else if (name == "dilate") {
    m.kind = Kind::kDilate;
  } else if (name == "erode") {
    m.kind = Kind::kErode;
  } else if (name == "drop") {
    m.kind = Kind::kDrop;
  } else if (name == "add_spurious") {
    m.kind = Kind::kAddSpurious;
  } else {
    throw ValidationError(fmt::format("unknown perturbation '{}'", text));
  }
  const bool counted = m.kind == Kind::kDrop || m.kind == Kind::kAddSpurious;
  if (counted != (colon != std::string::npos)) {
    throw ValidationError(fmt::format("perturbation '{}': drop and add_spurious take ':k'", text));
  }
  if (counted) {
    try {
      std::size_t used = 0;
      const std::string arg = text.substr(colon + 1);
      m.count = std::stoul(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("perturbation '{}': bad count", text));
    }
  }
  return m;
}

Mask3D perturb_predictions(std::span<const Mask3D> gt_masks, const PerturbMode& mode,
                           std::uint64_t seed) {
  if (gt_masks.empty()) throw ValidationError("perturb_predictions needs at least one mask");
  const Geometry& geometry = gt_masks.front().geometry();
  for (const Mask3D& m : gt_masks) require_same_geometry(m.geometry(), geometry, "lesion mask");
  std::mt19937_64 rng(seed);

  auto union_of = [&](auto&& keep, auto&& transform) {
    Mask3D out(geometry);
    for (std::size_t k = 0; k < gt_masks.size(); ++k) {
      if (!keep(k)) continue;
      const Mask3D m = transform(gt_masks[k]);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] || m[i] ? 1 : 0;
    }
    return out;
  };
  auto all = [](std::size_t) { return true; };
  auto same = [](const Mask3D& m) { return m; };

  switch (mode.kind) {
    case PerturbMode::Kind::kPerfect:
      return union_of(all, same);
    case PerturbMode::Kind::kDilate:
      return union_of(all, [](const Mask3D& m) { return dilate(m); });
    case PerturbMode::Kind::kErode:
      return union_of(all, [](const Mask3D& m) { return erode(m); });
    case PerturbMode::Kind::kDrop: {
      if (mode.count > gt_masks.size()) {
        throw ValidationError(fmt::format("cannot drop {} of {} lesions", mode.count,
                                          gt_masks.size()));
      }
      std::vector<std::size_t> order(gt_masks.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<std::uint8_t> dropped(gt_masks.size(), 0);
      for (std::size_t k = 0; k < mode.count; ++k) dropped[order[k]] = 1;
      return union_of([&](std::size_t k) { return dropped[k] == 0; }, same);
    }
    case PerturbMode::Kind::kAddSpurious:
      break;
  }

  Mask3D out = union_of(all, same);
  const Dims3& d = geometry.dims;
  if (mode.count == 0) return out;
  if (d.nx < 3 || d.ny < 3 || d.nz < 3) {
    throw ValidationError("volume too small for 3x3x3 spurious components");
  }
  // Cube centres must keep the 5x5x5 neighbourhood (clipped to the grid)
  // clear of foreground.
  auto clear = [&](std::size_t cx, std::size_t cy, std::size_t cz) {
    for (std::size_t z = cz > 1 ? cz - 2 : 0; z <= std::min(cz + 2, d.nz - 1); ++z) {
      for (std::size_t y = cy > 1 ? cy - 2 : 0; y <= std::min(cy + 2, d.ny - 1); ++y) {
        for (std::size_t x = cx > 1 ? cx - 2 : 0; x <= std::min(cx + 2, d.nx - 1); ++x) {
          if (out(x, y, z)) return false;
        }
      }
    }
    return true;
  };
  std::uniform_int_distribution<std::size_t> ux(1, d.nx - 2), uy(1, d.ny - 2), uz(1, d.nz - 2);
  constexpr int kAttempts = 20000;
  for (std::size_t placed = 0; placed < mode.count; ++placed) {
    bool ok = false;
    for (int attempt = 0; attempt < kAttempts && !ok; ++attempt) {
      const std::size_t cx = ux(rng), cy = uy(rng), cz = uz(rng);
      if (!clear(cx, cy, cz)) continue;
      for (std::size_t z = cz - 1; z <= cz + 1; ++z) {
        for (std::size_t y = cy - 1; y <= cy + 1; ++y) {
          for (std::size_t x = cx - 1; x <= cx + 1; ++x) out(x, y, z) = 1;
        }
      }
      ok = true;
    }
    if (!ok) {
      throw ValidationError(
          fmt::format("could not place spurious component {} of {}", placed + 1, mode.count));
    }
  }
  return out;
}

}  // namespace osteoforge
