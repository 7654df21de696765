#include "osteoforge_cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <new>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "osteoforge/error.hpp"
#include "osteoforge_cli/commands.hpp"
#include "osteoforge_cli/config.hpp"

namespace osteoforge::cli {

namespace {

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto log = std::make_shared<spdlog::logger>("osteoforge", sink);
  log->set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("OSTEOFORGE_LOG"); env != nullptr && *env != '\0') {
    level = spdlog::level::from_str(env);
  }
  log->set_level(level);
  return log;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
    case ErrorKind::kIo: return kExitValidation;
    case ErrorKind::kGeometry: return kExitGeometry;
    case ErrorKind::kInternal: return kExitInternal;
  }
  return kExitInternal;
}

int report_error(std::ostream& err, const char* kind, int code, const std::string& message) {
  const nlohmann::json doc = {
      {"error", {{"kind", kind}, {"exit_code", code}, {"message", message}}}};
  err << doc.dump() << '\n';
  return code;
}

std::optional<RegionMaskInput> region_input(const std::string& path,
                                            const std::vector<int>& codes) {
  if (path.empty()) return std::nullopt;
  return RegionMaskInput{path, codes};
}

template <typename T>
std::optional<T> given(CLI::Option* opt, const T& value) {
  return opt->count() > 0 ? std::optional<T>(value) : std::nullopt;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weak 3D lesion labels from RECIST measurements, and lesion-level evaluation",
               "osteoforge"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  double window_center = 0, window_width = 0, min_overlap = 0;
  int connectivity = 26;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON pipeline config")->check(CLI::ExistingFile);
  auto* o_center = app.add_option("--window-center", window_center, "HU window centre");
  auto* o_width = app.add_option("--window-width", window_width, "HU window width");
  auto* o_conn = app.add_option("--connectivity", connectivity, "3D connectivity: 6, 18 or 26");
  auto* o_workers = app.add_option("--workers", workers, "Worker threads for GrabCut");
  auto* o_seed = app.add_option("--seed", seed, "Base random seed");
  auto* o_overlap =
      app.add_option("--min-overlap", min_overlap, "Minimum overlap fraction of a GT component");

  WeakLabelArgs wl;
  std::string wl_body, wl_skel, wl_summary;
  std::vector<int> wl_body_codes, wl_skel_codes;
  auto* weaklabel = app.add_subcommand("weaklabel", "Build a weak 3D label volume");
  weaklabel->add_option("volume", wl.volume, "CT volume (NIfTI)")->required();
  weaklabel->add_option("lesions", wl.lesions_csv, "Lesion measurement CSV")->required();
  weaklabel->add_option("-o,--output", wl.output, "Output label volume")->required();
  weaklabel->add_option("--summary", wl_summary, "Write the per-lesion summary JSON here");
  weaklabel->add_option("--body-mask", wl_body, "Body region mask");
  weaklabel->add_option("--body-codes", wl_body_codes, "Mask values counted as body")
      ->delimiter(',');
  weaklabel->add_option("--skeleton-mask", wl_skel, "Skeleton region mask");
  weaklabel->add_option("--skeleton-codes", wl_skel_codes, "Mask values counted as skeleton")
      ->delimiter(',');

  EvalArgs ev;
  std::string ev_report;
  auto* eval = app.add_subcommand("eval", "Lesion-level detection precision and recall");
  eval->add_option("ground_truth", ev.ground_truth, "Ground-truth label volume")->required();
  eval->add_option("prediction", ev.prediction, "Prediction volume")->required();
  eval->add_option("-o,--report", ev_report, "Write the JSON report here");
  eval->add_option("--series-id", ev.series_id, "Series id stored in the report");
  eval->add_flag("--pred-binary", ev.prediction_binary,
                 "Treat every nonzero prediction voxel as lesion (default: value 3 only)");

  PhantomArgs ph;
  std::string ph_spec;
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom");
  phantom->add_option("out_dir", ph.out_dir, "Output directory")->required();
  phantom->add_option("--spec", ph_spec, "Phantom spec JSON")->check(CLI::ExistingFile);

  OverlayArgs ov;
  std::string ov_recist;
  auto* overlay = app.add_subcommand("overlay", "Per-slice QC overlays as PNG");
  overlay->add_option("volume", ov.volume, "CT volume")->required();
  overlay->add_option("labels", ov.labels, "Label volume")->required();
  overlay->add_option("out_dir", ov.out_dir, "Output directory")->required();
  overlay->add_option("--recist", ov_recist, "Draw these measurements");

  BaselineArgs bl;
  std::string bl_skel;
  std::vector<int> bl_skel_codes;
  auto* baseline = app.add_subcommand("baseline", "Threshold-based stand-in lesion detector");
  baseline->add_option("volume", bl.volume, "CT volume")->required();
  baseline->add_option("-o,--output", bl.output, "Output prediction volume")->required();
  baseline->add_option("--skeleton-mask", bl_skel, "Skeleton region mask");
  baseline->add_option("--skeleton-codes", bl_skel_codes, "Mask values counted as skeleton")
      ->delimiter(',');

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    return report_error(err, "usage", kExitValidation, e.what());
  }

  try {
    auto log = make_logger(err);
    ConfigOverrides overrides;
    overrides.window_center = given(o_center, window_center);
    overrides.window_width = given(o_width, window_width);
    overrides.connectivity = given(o_conn, connectivity);
    overrides.workers = given(o_workers, workers);
    overrides.seed = given(o_seed, seed);
    overrides.min_overlap = given(o_overlap, min_overlap);
    const PipelineConfig config = resolve_config(
        config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path),
        overrides);

    if (weaklabel->parsed()) {
      if (!wl_summary.empty()) wl.summary = wl_summary;
      wl.body_mask = region_input(wl_body, wl_body_codes);
      wl.skeleton_mask = region_input(wl_skel, wl_skel_codes);
      const auto summary = cmd_weaklabel(wl, config, *log);
      out << summary.dump(2) << '\n';
    } else if (eval->parsed()) {
      if (!ev_report.empty()) ev.report = ev_report;
      const DetectionReport r = cmd_eval(ev, config);
      out << fmt::format("series {}\n", r.series_id);
      out << fmt::format("gt {} pred {} tp {} fp {} fn {}\n", r.n_gt, r.n_pred, r.tp, r.fp,
                         r.fn);
      out << fmt::format("precision {}\n", format_percent(r.precision));
      out << fmt::format("recall {}\n", format_percent(r.recall));
    } else if (phantom->parsed()) {
      if (!ph_spec.empty()) ph.spec = ph_spec;
      if (o_seed->count() > 0) ph.seed = seed;
      for (const auto& p : cmd_phantom(ph)) out << p.string() << '\n';
    } else if (overlay->parsed()) {
      if (!ov_recist.empty()) ov.recist_csv = ov_recist;
      const auto written = cmd_overlay(ov, config);
      out << fmt::format("{} overlay images\n", written.size());
    } else if (baseline->parsed()) {
      bl.skeleton_mask = region_input(bl_skel, bl_skel_codes);
      out << fmt::format("{} predicted components\n", cmd_baseline(bl, config, *log));
    }
    log->flush();
    return kExitOk;
  } catch (const Error& e) {
    return report_error(err, to_string(e.kind()), exit_code_for(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error(err, "io", kExitValidation, e.what());
  } catch (const spdlog::spdlog_ex& e) {
    return report_error(err, "validation", kExitValidation, e.what());
  } catch (const std::bad_alloc&) {
    return report_error(err, "internal", kExitInternal, "out of memory");
  } catch (const std::exception& e) {
    return report_error(err, "internal", kExitInternal, e.what());
  }
}

}  // namespace osteoforge::cli
