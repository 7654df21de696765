#include "osteoforge_cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "osteoforge/components.hpp"
#include "osteoforge/graphcut.hpp"
#include "osteoforge/nifti.hpp"
#include "osteoforge/phantom.hpp"
#include "osteoforge/recist.hpp"
#include "osteoforge/weak_label.hpp"
#include "osteoforge_cli/overlay.hpp"

namespace osteoforge::cli {

namespace {

using nlohmann::json;

// Removes the files it tracks unless commit() was called.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    for (const fs::path& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
  void track(const fs::path& p) { paths_.push_back(p); }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> paths_;
  bool committed_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct LesionOutcome {
  WeakLesionMask mask;
  std::size_t rounds = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

LesionOutcome segment_lesion(const RecistMeasurement& m, const WindowedVolume& windowed,
                             const PipelineConfig& config, std::uint64_t seed) {
  const Dims3& d = windowed.dims();
  if (m.slice_index >= d.nz) {
    throw ValidationError(fmt::format("lesion {}: slice_index {} outside volume with {} slices",
                                      m.lesion_id, m.slice_index, d.nz));
  }
  const ImageSize size{d.nx, d.ny};
  LesionOutcome out;
  out.warnings = check_measurement(m, size);
  const SeedGeometry g = seed_geometry(m, size, &out.warnings);
  const GrayImage slice = extract_slice(windowed, m.slice_index);
  GrabCutResult gc;
  try {
    gc = grabcut_segment(slice, g, config.grabcut, seed);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kValidation) throw;
    throw ValidationError(fmt::format("lesion {}: {}", m.lesion_id, e.what()));
  }
  out.rounds = gc.rounds;
  out.converged = gc.converged;
  out.mask = build_weak_mask(gc.mask, g, d.nz, m.lesion_id);
  return out;
}

// Runs segment_lesion over all records on a bounded pool. Results are stored
// by record index, so output does not depend on scheduling; the error of the
// lowest failing index is rethrown.
std::vector<LesionOutcome> segment_all(const std::vector<RecistMeasurement>& records,
                                       const WindowedVolume& windowed,
                                       const PipelineConfig& config) {
  std::vector<LesionOutcome> results(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        results[i] = segment_lesion(records[i], windowed, config, splitmix64(config.seed + i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(config.workers, std::max<std::size_t>(records.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::string series_from_path(const fs::path& p) {
  std::string name = p.filename().string();
  for (const char* ext : {".nii.gz", ".nii"}) {
    const std::string e(ext);
    if (name.size() > e.size() && name.ends_with(e)) return name.substr(0, name.size() - e.size());
  }
  return p.stem().string();
}

Mask3D codes_to_mask(const Grid<std::uint8_t>& values, const std::vector<int>& codes) {
  Mask3D out(values.geometry());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int v = values[i];
    const bool in = codes.empty() ? v != 0 : std::find(codes.begin(), codes.end(), v) != codes.end();
    out[i] = in ? 1 : 0;
  }
  return out;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", p.string()));
  out << text;
  if (!out) throw IoError(fmt::format("failed writing {}", p.string()));
}

}  // namespace

Mask3D load_region_mask(const RegionMaskInput& input, const Geometry& expected,
                        const std::string& what) {
  const Grid<std::uint8_t> values = read_u8_volume(input.path);
  require_same_geometry(values.geometry(), expected, what);
  return codes_to_mask(values, input.codes);
}

json cmd_weaklabel(const WeakLabelArgs& args, const PipelineConfig& config, spdlog::logger& log) {
  config.validate();
  const Volume volume = read_volume(args.volume);
  const std::vector<RecistMeasurement> records = parse_lesion_records(args.lesions_csv);
  const Geometry& geometry = volume.geometry();

  json summary;
  summary["volume"] = args.volume.string();
  summary["output"] = args.output.string();
  summary["warnings"] = json::array();
  auto warn = [&](const std::string& msg) {
    log.warn("{}", msg);
    summary["warnings"].push_back(msg);
  };

  std::set<std::string> series;
  for (const auto& r : records) series.insert(r.series_id);
  if (series.size() > 1) warn(fmt::format("lesion file mixes {} series ids", series.size()));
  summary["series_id"] = series.empty() ? series_from_path(args.volume) : *series.begin();

  Mask3D body;
  if (args.body_mask) {
    body = load_region_mask(*args.body_mask, geometry, "body mask");
  } else {
    warn("no body mask given, using the HU-threshold fallback");
    body = fallback_body_mask(volume);
  }
  Mask3D skeleton;
  if (args.skeleton_mask) {
    skeleton = load_region_mask(*args.skeleton_mask, geometry, "skeleton mask");
  } else {
    warn("no skeleton mask given, using the HU-threshold fallback");
    skeleton = fallback_skeleton_mask(volume, body);
  }
  summary["fallback"] = {{"body", !args.body_mask}, {"skeleton", !args.skeleton_mask}};

  const WindowedVolume windowed = window_to_u8(volume, config.window);
  std::vector<LesionOutcome> outcomes = segment_all(records, windowed, config);

  std::vector<WeakLesionMask> masks;
  summary["lesions"] = json::array();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const LesionOutcome& o = outcomes[i];
    for (const auto& w : o.warnings) warn(w);
    summary["lesions"].push_back({{"lesion_id", records[i].lesion_id},
                                  {"series_id", records[i].series_id},
                                  {"slice_index", o.mask.center_slice},
                                  {"center_voxels", count_nonzero(o.mask.center_mask.values())},
                                  {"voxel_count", o.mask.voxel_count()},
                                  {"z_extent", o.mask.z_extent},
                                  {"grabcut_rounds", o.rounds},
                                  {"converged", o.converged},
                                  {"warnings", o.warnings}});
    masks.push_back(o.mask);
  }
  const LabelVolume labels = merge_labels(body, skeleton, masks, geometry);
  summary["label_voxels"] = {
      {"body", std::count(labels.values().begin(), labels.values().end(), label::kBody)},
      {"skeleton", std::count(labels.values().begin(), labels.values().end(), label::kSkeleton)},
      {"lesion", std::count(labels.values().begin(), labels.values().end(), label::kLesion)}};

  OutputGuard guard;
  ensure_parent(args.output);
  guard.track(args.output);
  write_volume(labels, args.output);
  if (args.summary) {
    ensure_parent(*args.summary);
    guard.track(*args.summary);
    write_text(*args.summary, summary.dump(2) + "\n");
  }
  guard.commit();
  log.info("wrote {} ({} lesions)", args.output.string(), records.size());
  return summary;
}

DetectionReport cmd_eval(const EvalArgs& args, const PipelineConfig& config) {
  config.validate();
  const LabelVolume gt_labels = read_label_volume(args.ground_truth);
  const Grid<std::uint8_t> pred_values = read_u8_volume(args.prediction);
  require_same_geometry(pred_values.geometry(), gt_labels.geometry(), "prediction");
  const Mask3D pred = args.prediction_binary ? codes_to_mask(pred_values, {})
                                             : codes_to_mask(pred_values, {label::kLesion});
  const Mask3D gt = extract_lesion_components(gt_labels);
  DetectionReport report =
      match_detections(connected_components(gt, config.connectivity),
                       connected_components(pred, config.connectivity),
                       MatchOptions{config.min_overlap});
  report.series_id = args.series_id.empty() ? series_from_path(args.ground_truth) : args.series_id;
  if (args.report) {
    OutputGuard guard;
    ensure_parent(*args.report);
    guard.track(*args.report);
    write_report(report, *args.report);
    guard.commit();
  }
  return report;
}

std::vector<fs::path> cmd_phantom(const PhantomArgs& args) {
  PhantomSpec spec = args.spec ? read_phantom_spec(*args.spec) : PhantomSpec::default_spec();
  if (args.seed) spec.seed = *args.seed;
  const Phantom p = generate_phantom(spec);

  fs::create_directories(args.out_dir);
  const std::vector<fs::path> paths = {args.out_dir / "volume.nii.gz",
                                       args.out_dir / "labels.nii.gz",
                                       args.out_dir / "lesion_instances.nii.gz",
                                       args.out_dir / "recist.csv"};
  OutputGuard guard;
  for (const auto& path : paths) guard.track(path);
  write_volume(p.volume, paths[0]);
  write_volume(p.labels, paths[1]);
  write_volume(lesion_instance_map(p.lesion_masks), paths[2]);
  write_lesion_records(paths[3], p.recist);
  guard.commit();
  return paths;
}

std::vector<fs::path> cmd_overlay(const OverlayArgs& args, const PipelineConfig& config) {
  config.validate();
  const Volume volume = read_volume(args.volume);
  const LabelVolume labels = read_label_volume(args.labels);
  require_same_geometry(labels.geometry(), volume.geometry(), "label volume");
  std::vector<RecistMeasurement> records;
  if (args.recist_csv) records = parse_lesion_records(*args.recist_csv);

  fs::create_directories(args.out_dir);
  OutputGuard guard;
  std::vector<fs::path> written;
  for (std::size_t z : slices_with_labels(labels)) {
    std::vector<RecistMeasurement> on_slice;
    for (const auto& r : records) {
      if (r.slice_index == z) on_slice.push_back(r);
    }
    const Image2D<std::int16_t> hu = extract_slice(volume, z);
    GrayImage gray(hu.width(), hu.height());
    for (std::size_t i = 0; i < hu.size(); ++i) gray[i] = window_value(hu[i], config.window);
    const fs::path path = args.out_dir / fmt::format("slice_{:04d}.png", z);
    guard.track(path);
    write_png(render_overlay(gray, extract_slice(labels, z), on_slice), path);
    written.push_back(path);
  }
  guard.commit();
  return written;
}

std::size_t cmd_baseline(const BaselineArgs& args, const PipelineConfig& config,
                         spdlog::logger& log) {
  config.validate();
  const Volume volume = read_volume(args.volume);
  Mask3D skeleton;
  if (args.skeleton_mask) {
    skeleton = load_region_mask(*args.skeleton_mask, volume.geometry(), "skeleton mask");
  } else {
    log.warn("no skeleton mask given, using the HU-threshold fallback");
    skeleton = fallback_skeleton_mask(volume, fallback_body_mask(volume));
  }
  const Mask3D pred = baseline_predict(volume, skeleton);
  Grid<std::uint8_t> out(volume.geometry());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pred[i] ? label::kLesion : 0;

  OutputGuard guard;
  ensure_parent(args.output);
  guard.track(args.output);
  write_volume(out, args.output);
  guard.commit();
  return connected_components(pred, config.connectivity).size();
}

}  // namespace osteoforge::cli
