#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <nlohmann/json_fwd.hpp>

#include "osteoforge/components.hpp"
#include "osteoforge/graphcut.hpp"
#include "osteoforge/volume.hpp"

namespace osteoforge::cli {

struct PipelineConfig {
  WindowSpec window;
  GrabCutParams grabcut;
  Connectivity3D connectivity = Connectivity3D::kTwentySix;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  double min_overlap = 0.0;

  void validate() const;
};

/// Overlays the keys present in `doc` onto `base`. Unknown keys are rejected
/// so a typo does not silently fall back to a default.
PipelineConfig apply_config_json(PipelineConfig base, const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
nlohmann::json config_to_json(const PipelineConfig& config);

/// Values given on the command line; each wins over file and defaults.
struct ConfigOverrides {
  std::optional<double> window_center;
  std::optional<double> window_width;
  std::optional<int> connectivity;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<double> min_overlap;
};

PipelineConfig resolve_config(const std::optional<std::filesystem::path>& config_path,
                              const ConfigOverrides& overrides);

}  // namespace osteoforge::cli
