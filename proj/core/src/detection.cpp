#include "osteoforge/detection.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "osteoforge/morphology.hpp"

namespace osteoforge {

DetectionMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  DetectionMetrics m;
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return m;
}

std::string format_percent(const std::optional<double>& fraction) {
  if (!fraction) return "n/a";
  return fmt::format("{:.1f}", *fraction * 100.0);
}

DetectionReport match_detections(const ComponentSet& gt, const ComponentSet& pred,
                                 const MatchOptions& options) {
  require_same_geometry(gt.labels.geometry(), pred.labels.geometry(), "prediction");
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> shared;
  const auto g = gt.labels.values();
  const auto p = pred.labels.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] != 0 && p[i] != 0) ++shared[{g[i], p[i]}];
  }

  DetectionReport r;
  r.n_gt = gt.size();
  r.n_pred = pred.size();
  r.matches.resize(gt.size());
  std::vector<std::uint8_t> pred_hit(pred.size(), 0);
  for (std::size_t k = 0; k < gt.size(); ++k) r.matches[k].gt = gt.components[k].id;
  for (const auto& [pair, count] : shared) {
    const auto [gt_id, pred_id] = pair;
    const double fraction = static_cast<double>(count) /
                            static_cast<double>(gt.components[gt_id - 1].voxel_count);
    if (fraction < options.min_overlap_fraction) continue;
    r.matches[gt_id - 1].preds.push_back(pred_id);
    pred_hit[pred_id - 1] = 1;
  }
  for (const auto& m : r.matches) {
    if (m.preds.empty()) {
      ++r.fn;
    } else {
      ++r.tp;
    }
  }
  r.fp = static_cast<std::size_t>(std::count(pred_hit.begin(), pred_hit.end(), 0));
  const auto metrics = metrics_from_counts(r.tp, r.fp, r.fn);
  r.precision = metrics.precision;
  r.recall = metrics.recall;
  return r;
}

Mask3D extract_lesion_components(const LabelVolume& labels) {
  Mask3D out(labels.geometry());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == label::kLesion ? 1 : 0;
  return out;
}

Mask3D baseline_predict(const Volume& volume, const Mask3D& skeleton) {
  require_same_geometry(skeleton.geometry(), volume.geometry(), "skeleton mask");
  Mask3D candidates(volume.geometry());
  for (std::size_t i = 0; i < volume.size(); ++i) {
    const std::int16_t hu = volume[i];
    candidates[i] =
        skeleton[i] && (hu > kBlasticThresholdHu || hu < kLyticThresholdHu) ? 1 : 0;
  }
  return remove_small_components(open(candidates), kMinPredictionVoxels);
}

nlohmann::json report_to_json(const DetectionReport& report) {
  nlohmann::json doc;
  doc["series_id"] = report.series_id;
  doc["n_gt"] = report.n_gt;
  doc["n_pred"] = report.n_pred;
  doc["tp"] = report.tp;
  doc["fp"] = report.fp;
  doc["fn"] = report.fn;
  doc["precision"] = report.precision ? nlohmann::json(*report.precision) : nlohmann::json();
  doc["recall"] = report.recall ? nlohmann::json(*report.recall) : nlohmann::json();
  doc["matches"] = nlohmann::json::array();
  for (const auto& m : report.matches) {
    doc["matches"].push_back({{"gt", m.gt}, {"preds", m.preds}});
  }
  return doc;
}

DetectionReport report_from_json(const nlohmann::json& doc) {
  try {
    DetectionReport r;
    r.series_id = doc.at("series_id").get<std::string>();
    r.n_gt = doc.at("n_gt").get<std::size_t>();
    r.n_pred = doc.at("n_pred").get<std::size_t>();
    r.tp = doc.at("tp").get<std::size_t>();
    r.fp = doc.at("fp").get<std::size_t>();
    r.fn = doc.at("fn").get<std::size_t>();
    if (!doc.at("precision").is_null()) r.precision = doc.at("precision").get<double>();
    if (!doc.at("recall").is_null()) r.recall = doc.at("recall").get<double>();
    for (const auto& m : doc.at("matches")) {
      r.matches.push_back(
          {m.at("gt").get<std::uint32_t>(), m.at("preds").get<std::vector<std::uint32_t>>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed detection report: {}", e.what()));
  }
}

void write_report(const DetectionReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << report_to_json(report).dump(2) << '\n';
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

DetectionReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return report_from_json(doc);
}

}  // namespace osteoforge
