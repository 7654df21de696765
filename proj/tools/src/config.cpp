#include "osteoforge_cli/config.hpp"

#include <fstream>
#include <set>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace osteoforge::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const char* where) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) {
      throw ValidationError(fmt::format("config: unknown key '{}' in {}", key, where));
    }
  }
}

Connectivity2D connectivity2d_from_int(int v) {
  if (v == 4) return Connectivity2D::kFour;
  if (v == 8) return Connectivity2D::kEight;
  throw ValidationError(fmt::format("GrabCut connectivity must be 4 or 8, got {}", v));
}

}  // namespace

void PipelineConfig::validate() const {
  window.validate();
  grabcut.validate();
  if (workers < 1) throw ValidationError("worker count must be at least 1");
  if (!(min_overlap >= 0.0 && min_overlap <= 1.0)) {
    throw ValidationError(fmt::format("min overlap {} outside [0, 1]", min_overlap));
  }
}

PipelineConfig apply_config_json(PipelineConfig c, const json& doc) {
  try {
    if (!doc.is_object()) throw ValidationError("config must be a JSON object");
    reject_unknown(doc, {"window", "grabcut", "connectivity", "workers", "seed", "min_overlap"},
                   "top level");
    if (doc.contains("window")) {
      const json& w = doc["window"];
      reject_unknown(w, {"center", "width"}, "window");
      c.window.center = w.value("center", c.window.center);
      c.window.width = w.value("width", c.window.width);
    }
    if (doc.contains("grabcut")) {
      const json& g = doc["grabcut"];
      reject_unknown(g,
                     {"components", "gamma", "max_iters", "variance_floor", "connectivity",
                      "refit_iterations"},
                     "grabcut");
      c.grabcut.components = g.value("components", c.grabcut.components);
      c.grabcut.gamma = g.value("gamma", c.grabcut.gamma);
      c.grabcut.max_iters = g.value("max_iters", c.grabcut.max_iters);
      c.grabcut.variance_floor = g.value("variance_floor", c.grabcut.variance_floor);
      c.grabcut.refit_iterations = g.value("refit_iterations", c.grabcut.refit_iterations);
      if (g.contains("connectivity")) {
        c.grabcut.connectivity = connectivity2d_from_int(g["connectivity"].get<int>());
      }
    }
    if (doc.contains("connectivity")) {
      c.connectivity = connectivity_from_int(doc["connectivity"].get<int>());
    }
    if (doc.contains("workers")) c.workers = doc["workers"].get<std::size_t>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("min_overlap")) c.min_overlap = doc["min_overlap"].get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("config: {}", e.what()));
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config {}", path.string()));
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return apply_config_json(std::move(base), doc);
}

json config_to_json(const PipelineConfig& c) {
  return {{"window", {{"center", c.window.center}, {"width", c.window.width}}},
          {"grabcut",
           {{"components", c.grabcut.components},
            {"gamma", c.grabcut.gamma},
            {"max_iters", c.grabcut.max_iters},
            {"variance_floor", c.grabcut.variance_floor},
            {"connectivity", static_cast<int>(c.grabcut.connectivity)},
            {"refit_iterations", c.grabcut.refit_iterations}}},
          {"connectivity", static_cast<int>(c.connectivity)},
          {"workers", c.workers},
          {"seed", c.seed},
          {"min_overlap", c.min_overlap}};
}

PipelineConfig resolve_config(const std::optional<std::filesystem::path>& config_path,
                              const ConfigOverrides& o) {
  PipelineConfig c;
  if (config_path) c = load_config(*config_path, c);
  if (o.window_center) c.window.center = *o.window_center;
  if (o.window_width) c.window.width = *o.window_width;
  if (o.connectivity) c.connectivity = connectivity_from_int(*o.connectivity);
  if (o.workers) c.workers = *o.workers;
  if (o.seed) c.seed = *o.seed;
  if (o.min_overlap) c.min_overlap = *o.min_overlap;
  c.validate();
  return c;
}

}  // namespace osteoforge::cli
