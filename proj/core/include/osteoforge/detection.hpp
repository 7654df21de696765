#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "osteoforge/components.hpp"
#include "osteoforge/volume.hpp"

namespace osteoforge {

struct DetectionMatch {
  std::uint32_t gt = 0;
  std::vector<std::uint32_t> preds;
  friend bool operator==(const DetectionMatch&, const DetectionMatch&) = default;
};

/// Lesion-level detection counts.
///
/// TP and FN count ground-truth components; FP counts predicted components
/// that touch no ground truth. Precision is TP / (TP + FP) with those mixed
/// units, which is how the published detection table was computed, so one
/// prediction spanning two lesions yields two TPs. Undefined ratios are
/// empty optionals and serialise as null.
struct DetectionReport {
  std::string series_id;
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::vector<DetectionMatch> matches;

  friend bool operator==(const DetectionReport&, const DetectionReport&) = default;
};

struct DetectionMetrics {
  std::optional<double> precision;
  std::optional<double> recall;
};

DetectionMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

/// "96.6"-style one-decimal percentage, or "n/a".
std::string format_percent(const std::optional<double>& fraction);

struct MatchOptions {
  /// A GT/prediction pair overlaps when they share at least one voxel and
  /// the shared voxels cover at least this fraction of the GT component.
  double min_overlap_fraction = 0.0;
};

DetectionReport match_detections(const ComponentSet& gt, const ComponentSet& pred,
                                 const MatchOptions& options = {});

/// Voxels carrying the lesion code.
Mask3D extract_lesion_components(const LabelVolume& labels);

inline constexpr std::int16_t kBlasticThresholdHu = 500;
inline constexpr std::int16_t kLyticThresholdHu = 80;
inline constexpr std::size_t kMinPredictionVoxels = 10;

/// Non-learned stand-in detector: skeleton voxels brighter than 500 HU or
/// darker than 80 HU, opened, and components under 10 voxels dropped.
Mask3D baseline_predict(const Volume& volume, const Mask3D& skeleton);

nlohmann::json report_to_json(const DetectionReport& report);
DetectionReport report_from_json(const nlohmann::json& doc);
void write_report(const DetectionReport& report, const std::filesystem::path& path);
DetectionReport read_report(const std::filesystem::path& path);

}  // namespace osteoforge
