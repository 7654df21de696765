#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/logger.h>

#include "osteoforge/detection.hpp"
#include "osteoforge/volume.hpp"
#include "osteoforge_cli/config.hpp"

namespace osteoforge::cli {

namespace fs = std::filesystem;

/// A region mask file plus the voxel values that count as inside. An empty
/// code list means any nonzero value.
struct RegionMaskInput {
  fs::path path;
  std::vector<int> codes;
};

Mask3D load_region_mask(const RegionMaskInput& input, const Geometry& expected,
                        const std::string& what);

struct WeakLabelArgs {
  fs::path volume;
  fs::path lesions_csv;
  fs::path output;
  std::optional<fs::path> summary;
  std::optional<RegionMaskInput> body_mask;
  std::optional<RegionMaskInput> skeleton_mask;
};

/// Writes the merged label volume (and the summary file when requested) and
/// returns the summary. On failure nothing it created is left behind.
nlohmann::json cmd_weaklabel(const WeakLabelArgs& args, const PipelineConfig& config,
                             spdlog::logger& log);

struct EvalArgs {
  fs::path ground_truth;
  fs::path prediction;
  std::optional<fs::path> report;
  std::string series_id;
  bool prediction_binary = false;
};

DetectionReport cmd_eval(const EvalArgs& args, const PipelineConfig& config);

struct PhantomArgs {
  fs::path out_dir;
  std::optional<fs::path> spec;
  std::optional<std::uint64_t> seed;
};

/// volume.nii.gz, labels.nii.gz, lesion_instances.nii.gz and recist.csv.
std::vector<fs::path> cmd_phantom(const PhantomArgs& args);

struct OverlayArgs {
  fs::path volume;
  fs::path labels;
  fs::path out_dir;
  std::optional<fs::path> recist_csv;
};

std::vector<fs::path> cmd_overlay(const OverlayArgs& args, const PipelineConfig& config);

struct BaselineArgs {
  fs::path volume;
  fs::path output;
  std::optional<RegionMaskInput> skeleton_mask;
};

/// Writes the prediction as a label volume with value 3 on predicted voxels
/// and returns the number of predicted components.
std::size_t cmd_baseline(const BaselineArgs& args, const PipelineConfig& config,
                         spdlog::logger& log);

}  // namespace osteoforge::cli
