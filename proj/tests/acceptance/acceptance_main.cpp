// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and trial counts are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "osteoforge/components.hpp"
#include "osteoforge/detection.hpp"
#include "osteoforge/graphcut.hpp"
#include "osteoforge/maxflow.hpp"
#include "osteoforge/nifti.hpp"
#include "osteoforge/phantom.hpp"
#include "osteoforge/weak_label.hpp"
#include "osteoforge_cli/cli.hpp"

namespace {

using namespace osteoforge;

constexpr double kMetricTolerancePp = 0.15;
constexpr int kMaxFlowNetworks = 1000;
constexpr double kMaxFlowBudgetS = 10.0;
constexpr int kGrabCutSlices = 50;
constexpr int kGrabCutMinGood = 48;
constexpr double kGrabCutDice = 0.95;
constexpr int kContrastMin = 150;
constexpr long kBoxMarginMin = 2;
constexpr double kGrabCutBudgetS = 60.0;
constexpr int kWeakMaskLesions = 100;
constexpr int kComponentMasks = 100;
constexpr double kComponentBudgetS = 30.0;
constexpr int kMatchingPairs = 200;
constexpr double kClosureBudgetS = 120.0;
constexpr int kNiftiVolumes = 50;
constexpr double kSpacingTolMm = 1e-6;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1
Outcome metric_arithmetic() {
  struct Row {
    std::size_t tp, fp, fn;
    double printed_precision, printed_recall;
    std::vector<std::string> precision_ok;
    std::vector<std::string> recall_ok;
  };
  const std::vector<Row> rows = {
      {375, 13, 418, 96.7, 47.3, {"96.6", "96.7"}, {"47.3"}},
      {99, 289, 98, 25.6, 50.2, {"25.5", "25.6"}, {"50.2", "50.3"}},
  };
  Outcome o;
  for (const Row& r : rows) {
    const auto m = metrics_from_counts(r.tp, r.fp, r.fn);
    const double p = *m.precision * 100.0, rc = *m.recall * 100.0;
    const std::string ps = format_percent(m.precision), rs = format_percent(m.recall);
    const bool ok = std::abs(p - r.printed_precision) <= kMetricTolerancePp &&
                    std::abs(rc - r.printed_recall) <= kMetricTolerancePp &&
                    std::abs(std::stod(ps) - r.printed_precision) <= kMetricTolerancePp &&
                    std::abs(std::stod(rs) - r.printed_recall) <= kMetricTolerancePp &&
                    std::find(r.precision_ok.begin(), r.precision_ok.end(), ps) !=
                        r.precision_ok.end() &&
                    std::find(r.recall_ok.begin(), r.recall_ok.end(), rs) != r.recall_ok.end();
    o.pass = o.pass && ok;
    o.detail += fmt::format("({},{},{}) -> P {} R {} [{:.3f}/{:.3f}]; ", r.tp, r.fp, r.fn, ps, rs,
                            p, rc);
  }
  return o;
}

// ---------------------------------------------------------------- 2
Outcome maxflow_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> size(2, 10);
  int agree = 0;
  for (int t = 0; t < kMaxFlowNetworks; ++t) {
    const FlowNetwork net = oracle::random_network(rng, size(rng), 10);
    const auto r = max_flow(net);
    agree += r.flow == oracle::min_cut_by_enumeration(net) &&
             net.cut_capacity(r.source_side) == r.flow;
  }
  const double s = seconds_since(t0);
  return {agree == kMaxFlowNetworks && s < kMaxFlowBudgetS,
          fmt::format("{}/{} networks equal the enumerated min cut, {:.2f} s", agree,
                      kMaxFlowNetworks, s)};
}

// ---------------------------------------------------------------- 3 and 4
struct GrabCutStats {
  int good = 0;
  int constraints_ok = 0;
  std::size_t energy_violations = 0;
  std::size_t rounds = 0;
  double min_dice = 1.0;
  double seconds = 0.0;
};

GrabCutStats run_grabcut_suite() {
  const auto t0 = Clock::now();
  GrabCutStats st;
  std::mt19937_64 rng(777);
  constexpr std::size_t kSize = 64;
  std::uniform_real_distribution<double> radius(6.0, 14.0), angle(0.0, 3.14159265358979);
  std::uniform_int_distribution<int> level(0, 255);
  std::uniform_int_distribution<long> margin(kBoxMarginMin, 4);
  std::normal_distribution<double> noise(0.0, 8.0);
  for (int t = 0; t < kGrabCutSlices; ++t) {
    const double r = radius(rng);
    const long m = margin(rng);
    const double lo = r + static_cast<double>(m) + 2.0;
    std::uniform_real_distribution<double> centre(lo, static_cast<double>(kSize) - 1.0 - lo);
    const double cx = centre(rng), cy = centre(rng);
    int fg = 0, bg = 0;
    do {
      fg = level(rng);
      bg = level(rng);
    } while (std::abs(fg - bg) < kContrastMin);

    const Mask2D truth = oracle::disk(kSize, kSize, cx, cy, r);
    GrayImage img(kSize, kSize);
    for (std::size_t i = 0; i < img.size(); ++i) {
      img[i] = static_cast<std::uint8_t>(
          std::clamp(std::round((truth[i] ? fg : bg) + noise(rng)), 0.0, 255.0));
    }
    // Crossing diameters at a random angle, shortened to stay in the disk.
    const double a = angle(rng), l = 0.85 * r, s = 0.6 * r;
    RecistMeasurement meas;
    meas.long_axis = {{cx - l * std::cos(a), cy - l * std::sin(a)},
                      {cx + l * std::cos(a), cy + l * std::sin(a)}};
    meas.short_axis = {{cx + s * std::sin(a), cy - s * std::cos(a)},
                       {cx - s * std::sin(a), cy + s * std::cos(a)}};
    SeedGeometry g = seed_geometry(meas, {kSize, kSize});
    g.bbox = {static_cast<long>(std::floor(cx - r)) - m, static_cast<long>(std::floor(cy - r)) - m,
              static_cast<long>(std::ceil(cx + r)) + m, static_cast<long>(std::ceil(cy + r)) + m};

    const GrabCutResult res = grabcut_segment(img, g, {}, static_cast<std::uint64_t>(t));
    const Mask2D quad = rasterize_quad(g, {kSize, kSize});
    bool constraints = true;
    for (std::size_t y = 0; y < kSize; ++y) {
      for (std::size_t x = 0; x < kSize; ++x) {
        const bool in_box = g.bbox.contains(static_cast<long>(x), static_cast<long>(y));
        if (quad(x, y) && !res.mask(x, y)) constraints = false;
        if (!in_box && res.mask(x, y)) constraints = false;
      }
    }
    const double d = oracle::dice(res.mask.values(), truth.values());
    st.good += d >= kGrabCutDice;
    st.constraints_ok += constraints;
    st.min_dice = std::min(st.min_dice, d);
    st.rounds += res.rounds;
    for (std::size_t k = 1; k < res.energies.size(); ++k) {
      st.energy_violations += res.energies[k] > res.energies[k - 1];
    }
  }
  st.seconds = seconds_since(t0);
  return st;
}

Outcome grabcut_recovery(const GrabCutStats& st) {
  return {st.good >= kGrabCutMinGood && st.constraints_ok == kGrabCutSlices &&
              st.seconds < kGrabCutBudgetS,
          fmt::format("Dice >= {} in {}/{} (min {:.4f}), hard constraints {}/{}, {:.2f} s",
                      kGrabCutDice, st.good, kGrabCutSlices, st.min_dice, st.constraints_ok,
                      kGrabCutSlices, st.seconds)};
}

Outcome energy_monotonicity(const GrabCutStats& st) {
  return {st.energy_violations == 0,
          fmt::format("{} violations over {} rounds", st.energy_violations, st.rounds)};
}

// ---------------------------------------------------------------- 5
Outcome weak_mask_structure() {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> inplane(0.45, 0.98), thick(1.0, 5.0), rad(3.0, 7.0),
      unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> slices(12, 30);
  int checked = 0, ok = 0, clamped = 0;
  for (int ph = 0; checked < kWeakMaskLesions; ++ph) {
    PhantomSpec s;
    s.dims = {96, 96, slices(rng)};
    s.spacing = {inplane(rng), inplane(rng), thick(rng)};
    s.spacing.y = s.spacing.x;
    const double cx = 48 * s.spacing.x, cy = 48 * s.spacing.y;
    const double zmax = static_cast<double>(s.dims.nz - 1) * s.spacing.z;
    s.body = {{cx, cy, zmax / 2}, {45 * s.spacing.x, 45 * s.spacing.y, zmax}, kSoftTissueHu};
    const double bone_r = 30 * s.spacing.x;
    s.bones = {{BoneSpec::Shape::kTube, {cx, cy, 0}, {bone_r, bone_r, 1}, 450}};
    s.noise_sigma = 10;
    s.seed = static_cast<std::uint64_t>(ph);
    s.lesions.clear();
    for (int k = 0; k < 10; ++k) {
      const double r = std::min(rad(rng), bone_r * 0.4);
      const double reach = bone_r - r - 0.5;
      const double t = unit(rng) * 2 * 3.14159265358979, u = std::sqrt(unit(rng)) * reach;
      double z = unit(rng) * zmax;
      if (k == 0 && ph % 2 == 0) z = 0.0;
      if (k == 1 && ph % 2 == 0) z = zmax;
      const LesionType type = k % 3 == 0 ? LesionType::kLytic
                              : k % 3 == 1 ? LesionType::kBlastic
                                           : LesionType::kMixed;
      s.lesions.push_back({fmt::format("P{}L{}", ph, k),
                           {cx + u * std::cos(t), cy + u * std::sin(t), z},
                           r,
                           type,
                           type == LesionType::kLytic ? -380 : 250});
    }
    const Phantom p = generate_phantom(s);
    const WindowedVolume w = window_to_u8(p.volume, {});
    const Dims3& d = p.volume.dims();
    for (std::size_t k = 0; k < p.recist.size() && checked < kWeakMaskLesions; ++k) {
      const RecistMeasurement& m = p.recist[k];
      SeedGeometry g;
      try {
        g = seed_geometry(m, {d.nx, d.ny});
      } catch (const ValidationError&) {
        continue;  // lesion too small for a two-axis measurement on this grid
      }
      ++checked;
      const GrabCutResult gc = grabcut_segment(extract_slice(w, m.slice_index), g, {}, k);
      const WeakLesionMask wm = build_weak_mask(gc.mask, g, d.nz, m.lesion_id);
      const std::vector<WeakLesionMask> one = {wm};
      const Mask3D vol = rasterize_lesions(one, p.volume.geometry());

      bool good = true;
      const std::size_t z0 = m.slice_index;
      const bool at_edge = z0 == 0 || z0 + 1 == d.nz;
      clamped += at_edge;
      good = good && wm.z_extent.size() == (at_edge ? 2u : 3u);
      for (std::size_t z = 0; z < d.nz; ++z) {
        const bool in_extent = z + 1 >= z0 && z <= z0 + 1;
        for (std::size_t y = 0; y < d.ny; ++y) {
          for (std::size_t x = 0; x < d.nx; ++x) {
            const bool in_box = g.bbox.contains(static_cast<long>(x), static_cast<long>(y));
            const std::uint8_t v = vol(x, y, z);
            if (!in_extent) {
              good = good && v == 0;
            } else if (z == z0) {
              good = good && v == gc.mask(x, y) && (!v || in_box);
            } else {
              good = good && v == static_cast<std::uint8_t>(in_box);
            }
          }
        }
      }
      ok += good;
    }
  }
  return {ok == checked,
          fmt::format("{}/{} lesions with exact 3-slice structure ({} clamped to 2 slices)", ok,
                      checked, clamped)};
}

// ---------------------------------------------------------------- 6
Outcome components_partition() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> density(0.05, 0.6);
  int ok = 0, total = 0;
  for (int t = 0; t < kComponentMasks; ++t) {
    const Mask3D m = oracle::random_mask(rng, {32, 32, 32}, density(rng));
    for (int conn : {6, 26}) {
      ++total;
      std::size_t n = 0;
      const auto expected = oracle::flood_fill_labels(m, conn, &n);
      const ComponentSet c = connected_components(m, connectivity_from_int(conn));
      ok += c.size() == n &&
            std::equal(expected.begin(), expected.end(), c.labels.values().begin());
    }
  }
  const double s = seconds_since(t0);
  return {ok == total && s < kComponentBudgetS,
          fmt::format("{}/{} labelings identical to flood fill, {:.2f} s", ok, total, s)};
}

// ---------------------------------------------------------------- 7
Mask3D union_of(const std::vector<Mask3D>& masks) {
  Mask3D out(masks.front().geometry());
  for (const auto& m : masks)
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = out[i] || m[i];
  return out;
}

Outcome matching_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> side(1, 16);
  std::uniform_real_distribution<double> density(0.02, 0.3), overlap(0.0, 0.5);
  int ok = 0;
  for (int t = 0; t < kMatchingPairs; ++t) {
    const Dims3 d{side(rng), side(rng), side(rng)};
    const Mask3D gt = oracle::random_mask(rng, d, density(rng));
    const Mask3D pred = oracle::random_mask(rng, d, density(rng));
    const int conn = t % 2 ? 6 : 26;
    const double frac = t % 4 == 3 ? overlap(rng) : 0.0;
    const auto r = match_detections(connected_components(gt, connectivity_from_int(conn)),
                                    connected_components(pred, connectivity_from_int(conn)),
                                    {frac});
    const auto o = oracle::match_all_pairs(gt, pred, conn, frac);
    ok += r.n_gt == o.n_gt && r.n_pred == o.n_pred && r.tp == o.tp && r.fp == o.fp &&
          r.fn == o.fn;
  }

  // Perturbation deltas on small random phantoms.
  int deltas_ok = 0, deltas = 0;
  std::uniform_int_distribution<int> nles(2, 6);
  for (int t = 0; t < 20; ++t) {
    PhantomSpec s;
    s.dims = {40, 40, 48};
    s.spacing = {1, 1, 1};
    s.body = {{20, 20, 24}, {19, 19, 40}, kSoftTissueHu};
    s.bones = {{BoneSpec::Shape::kTube, {20, 20, 0}, {12, 12, 1}, 450}};
    s.noise_sigma = 0;
    s.lesions.clear();
    const int n = nles(rng);
    for (int k = 0; k < n; ++k) {
      s.lesions.push_back({fmt::format("L{}", k), {20, 20, 4.0 + 8.0 * k}, 2.5,
                           LesionType::kLytic, -300});
    }
    const Phantom p = generate_phantom(s);
    const Mask3D gt = union_of(p.lesion_masks);
    const auto eval = [&](const Mask3D& pred) {
      return match_detections(connected_components(gt), connected_components(pred));
    };
    const auto base = eval(perturb_predictions(p.lesion_masks, {}, 0));
    std::uniform_int_distribution<std::size_t> kd(0, static_cast<std::size_t>(n));
    const std::size_t drop = kd(rng), add = kd(rng) + 1;
    const auto dropped = eval(perturb_predictions(
        p.lesion_masks, {PerturbMode::Kind::kDrop, drop}, static_cast<std::uint64_t>(t)));
    const auto spurious = eval(perturb_predictions(
        p.lesion_masks, {PerturbMode::Kind::kAddSpurious, add}, static_cast<std::uint64_t>(t)));
    deltas += 2;
    deltas_ok += dropped.fn == base.fn + drop && dropped.tp == base.tp - drop &&
                 dropped.fp == base.fp;
    deltas_ok += spurious.fp == base.fp + add && spurious.tp == base.tp &&
                 spurious.fn == base.fn;
  }
  return {ok == kMatchingPairs && deltas_ok == deltas,
          fmt::format("{}/{} volume pairs equal the all-pairs oracle, {}/{} perturbation deltas",
                      ok, kMatchingPairs, deltas_ok, deltas)};
}

// ---------------------------------------------------------------- 8
struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  oracle::TempDir dir("acceptance_e2e");
  auto path = [&](const char* name) { return (dir.path() / name).string(); };
  Outcome o;
  auto step = [&](const CliRun& r, const char* what) {
    if (r.code != 0) {
      o.pass = false;
      o.detail += fmt::format("{} exited {}: {}; ", what, r.code, r.err);
    }
    return r.code == 0;
  };
  if (!step(cli({"phantom", path("ph")}), "phantom")) return o;
  const std::string vol = path("ph/volume.nii.gz"), labels = path("ph/labels.nii.gz");
  if (!step(cli({"weaklabel", vol, path("ph/recist.csv"), "-o", path("weak.nii.gz")}),
            "weaklabel")) {
    return o;
  }
  const CliRun perfect = cli({"eval", path("weak.nii.gz"), labels, "-o", path("perfect.json")});
  if (!step(perfect, "eval perfect")) return o;
  const DetectionReport pr = read_report(path("perfect.json"));
  const bool perfect_ok = pr.tp == 10 && pr.fp == 0 && pr.fn == 0 &&
                          perfect.out.find("precision 100.0") != std::string::npos &&
                          perfect.out.find("recall 100.0") != std::string::npos;

  if (!step(cli({"baseline", vol, "-o", path("base.nii.gz"), "--skeleton-mask", labels,
                 "--skeleton-codes", "2,3"}),
            "baseline")) {
    return o;
  }
  if (!step(cli({"eval", path("weak.nii.gz"), path("base.nii.gz"), "-o", path("base.json")}),
            "eval baseline")) {
    return o;
  }
  const DetectionReport br = read_report(path("base.json"));
  const auto oc = oracle::match_all_pairs(
      extract_lesion_components(read_label_volume(path("weak.nii.gz"))),
      extract_lesion_components(read_label_volume(path("base.nii.gz"))), 26);
  const bool baseline_ok = br.tp == oc.tp && br.fp == oc.fp && br.fn == oc.fn;
  const double s = seconds_since(t0);
  o.pass = perfect_ok && baseline_ok && s < kClosureBudgetS;
  o.detail = fmt::format(
      "perfect TP={} FP={} FN={} P={} R={}; baseline TP={} FP={} FN={} vs oracle {}/{}/{}; "
      "{:.2f} s",
      pr.tp, pr.fp, pr.fn, format_percent(pr.precision), format_percent(pr.recall), br.tp, br.fp,
      br.fn, oc.tp, oc.fp, oc.fn, s);
  return o;
}

// ---------------------------------------------------------------- 9
Outcome io_fidelity() {
  oracle::TempDir dir("acceptance_io");
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> side(1, 24);
  std::uniform_int_distribution<int> hu(-32768, 32767);
  std::uniform_real_distribution<double> sp(0.3, 5.0), org(-200, 200);
  int ok = 0;
  for (int t = 0; t < kNiftiVolumes; ++t) {
    const Geometry g{{side(rng), side(rng), side(rng)},
                     {sp(rng), sp(rng), sp(rng)},
                     {org(rng), org(rng), org(rng)}};
    Volume v(g);
    for (auto& x : v.values()) x = static_cast<std::int16_t>(hu(rng));
    const auto p = dir.path() / (t % 2 ? fmt::format("v{}.nii.gz", t) : fmt::format("v{}.nii", t));
    write_volume(v, p);
    const Volume back = read_volume(p);
    // Origins are stored as float32 offsets, so the exact expectation is
    // the float32 rounding of what went in.
    const auto as_f32 = [](double x) { return static_cast<double>(static_cast<float>(x)); };
    const Geometry& bg = back.geometry();
    const bool same_data = std::equal(v.values().begin(), v.values().end(),
                                      back.values().begin(), back.values().end());
    const bool same_origin = bg.origin.x == as_f32(g.origin.x) &&
                             bg.origin.y == as_f32(g.origin.y) &&
                             bg.origin.z == as_f32(g.origin.z);
    const bool same_spacing = std::abs(bg.spacing.x - g.spacing.x) <= kSpacingTolMm &&
                              std::abs(bg.spacing.y - g.spacing.y) <= kSpacingTolMm &&
                              std::abs(bg.spacing.z - g.spacing.z) <= kSpacingTolMm;
    ok += bg.dims == g.dims && same_spacing && same_origin && same_data;
  }
  const WindowSpec w{50, 450};
  const int lo = window_value(-175, w), hi = window_value(275, w), mid = window_value(50, w);
  const bool window_ok = lo == 0 && hi == 255 && mid == 128;
  return {ok == kNiftiVolumes && window_ok,
          fmt::format("{}/{} volumes bit-exact (half gzip); window -175->{} 275->{} 50->{}", ok,
                      kNiftiVolumes, lo, hi, mid)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  GrabCutStats gc_stats;
  bool gc_ran = false;
  auto grabcut_stats = [&]() -> const GrabCutStats& {
    if (!gc_ran) {
      gc_stats = run_grabcut_suite();
      gc_ran = true;
    }
    return gc_stats;
  };
  const std::vector<Criterion> criteria = {
      {"metric arithmetic", metric_arithmetic},
      {"max-flow exactness", maxflow_exactness},
      {"GrabCut recovery", [&] { return grabcut_recovery(grabcut_stats()); }},
      {"energy monotonicity", [&] { return energy_monotonicity(grabcut_stats()); }},
      {"weak-mask structure", weak_mask_structure},
      {"connected components", components_partition},
      {"detection matching", matching_oracle},
      {"end-to-end closure", end_to_end},
      {"I/O fidelity", io_fidelity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
