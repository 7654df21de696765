#include "osteoforge/graphcut.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace osteoforge {
namespace {

struct Offset {
  int dx;
  int dy;
  double distance;
};

// Each unordered neighbour pair is visited once via these forward offsets.
std::vector<Offset> forward_offsets(Connectivity2D c) {
  std::vector<Offset> offsets{{1, 0, 1.0}, {0, 1, 1.0}};
  if (c == Connectivity2D::kEight) {
    offsets.push_back({1, 1, std::numbers::sqrt2});
    offsets.push_back({-1, 1, std::numbers::sqrt2});
  }
  return offsets;
}

template <typename Fn>
void for_each_pair(std::size_t width, std::size_t height, Connectivity2D c, Fn&& fn) {
  const auto offsets = forward_offsets(c);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (const Offset& o : offsets) {
        const long nx = static_cast<long>(x) + o.dx;
        const long ny = static_cast<long>(y) + o.dy;
        if (nx < 0 || ny < 0 || nx >= static_cast<long>(width) ||
            ny >= static_cast<long>(height)) {
          continue;
        }
        fn(x + width * y, static_cast<std::size_t>(nx) + width * static_cast<std::size_t>(ny),
           o.distance);
      }
    }
  }
}

Capacity nlink_capacity(std::uint8_t a, std::uint8_t b, double distance, double gamma,
                        double beta) {
  const double d = static_cast<double>(a) - static_cast<double>(b);
  return quantize(gamma / distance * std::exp(-beta * d * d));
}

Capacity hard_capacity(const GrabCutParams& params) {
  return quantize(8.0 * params.gamma * static_cast<double>(max_neighbours(params.connectivity)) +
                  1.0);
}

void require_same_size(const GrayImage& image, const Trimap& trimap) {
  if (image.width() != trimap.width() || image.height() != trimap.height()) {
    throw GeometryError(fmt::format("trimap {}x{} does not match image {}x{}", trimap.width(),
                                    trimap.height(), image.width(), image.height()));
  }
}

IntensityHistogram class_histogram(const GrayImage& image, const Mask2D& foreground,
                                   bool want_foreground) {
  IntensityHistogram h{};
  for (std::size_t i = 0; i < image.size(); ++i) {
    if ((foreground[i] != 0) == want_foreground) h[image[i]] += 1.0;
  }
  return h;
}

}  // namespace

void GrabCutParams::validate() const {
  if (components < 1) throw ValidationError("GrabCut needs K >= 1 mixture components");
  if (!(gamma >= 0.0)) throw ValidationError("GrabCut gamma must be >= 0");
  if (max_iters < 1) throw ValidationError("GrabCut max_iters must be >= 1");
  if (!(variance_floor > 0.0)) throw ValidationError("GrabCut variance floor must be > 0");
}

Capacity quantize(double value) { return std::llround(value * kCapacityScale); }

std::size_t max_neighbours(Connectivity2D connectivity) {
  return connectivity == Connectivity2D::kEight ? 8 : 4;
}

Trimap build_trimap(const SeedGeometry& g, const Mask2D& quad_mask, ImageSize image) {
  if (quad_mask.width() != image.width || quad_mask.height() != image.height) {
    throw GeometryError("quadrilateral mask does not match the slice size");
  }
  Trimap trimap(image.width, image.height, TrimapState::kDefiniteBackground);
  std::size_t definite_bg = 0;
  std::size_t definite_fg = 0;
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const bool in_box = g.bbox.contains(static_cast<long>(x), static_cast<long>(y));
      if (quad_mask(x, y) != 0) {
        if (!in_box) {
          throw ValidationError("quadrilateral mask extends outside the bounding box");
        }
        trimap(x, y) = TrimapState::kDefiniteForeground;
        ++definite_fg;
      } else if (in_box) {
        trimap(x, y) = TrimapState::kProbableForeground;
      } else {
        ++definite_bg;
      }
    }
  }
  if (definite_bg == 0) {
    throw ValidationError("bounding box covers the whole slice, no definite background seed");
  }
  if (definite_fg == 0) {
    throw ValidationError("quadrilateral covers no pixel centre, no definite foreground seed");
  }
  return trimap;
}

double compute_beta(const GrayImage& image, Connectivity2D connectivity) {
  if (image.size() < 2) throw ValidationError("compute_beta needs at least two pixels");
  double sum = 0.0;
  std::size_t pairs = 0;
  for_each_pair(image.width(), image.height(), connectivity,
                [&](std::size_t a, std::size_t b, double) {
                  const double d = static_cast<double>(image[a]) - static_cast<double>(image[b]);
                  sum += d * d;
                  ++pairs;
                });
  if (pairs == 0 || sum == 0.0) return 0.0;
  return 1.0 / (2.0 * sum / static_cast<double>(pairs));
}

DataCosts data_costs(const ClassModels& models) {
  DataCosts costs;
  for (int z = 0; z < 256; ++z) {
    const double pf = std::max(models.foreground.density(z), kLikelihoodFloor);
    const double pb = std::max(models.background.density(z), kLikelihoodFloor);
    costs.foreground[static_cast<std::size_t>(z)] = quantize(-std::log(pf));
    costs.background[static_cast<std::size_t>(z)] = quantize(-std::log(pb));
  }
  return costs;
}

FlowNetwork build_graph(const GrayImage& image, const Trimap& trimap, const ClassModels& models,
                        const GrabCutParams& params, double beta) {
  require_same_size(image, trimap);
  const std::size_t n = image.size();
  FlowNetwork net(n + 2, n, n + 1);
  const Capacity large = hard_capacity(params);
  const DataCosts costs = data_costs(models);

  for (std::size_t i = 0; i < n; ++i) {
    switch (trimap[i]) {
      case TrimapState::kDefiniteForeground:
        net.add_terminal_edges(i, large, 0);
        break;
      case TrimapState::kDefiniteBackground:
        net.add_terminal_edges(i, 0, large);
        break;
      default: {
        // Cutting source->i labels i background; cutting i->sink labels it
        // foreground. Subtracting the smaller cost shifts the energy by a
        // constant and keeps both capacities non-negative.
        const Capacity to_bg = costs.background[image[i]];
        const Capacity to_fg = costs.foreground[image[i]];
        const Capacity shift = std::min(to_bg, to_fg);
        net.add_terminal_edges(i, to_bg - shift, to_fg - shift);
        break;
      }
    }
  }
  for_each_pair(image.width(), image.height(), params.connectivity,
                [&](std::size_t a, std::size_t b, double distance) {
                  const Capacity w =
                      nlink_capacity(image[a], image[b], distance, params.gamma, beta);
                  if (w > 0) net.add_edge(a, b, w, w);
                });
  return net;
}

Capacity labelling_energy(const GrayImage& image, const Trimap& trimap, const Mask2D& foreground,
                          const ClassModels& models, const GrabCutParams& params, double beta) {
  require_same_size(image, trimap);
  const DataCosts costs = data_costs(models);
  Capacity energy = 0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const bool fg = foreground[i] != 0;
    if ((trimap[i] == TrimapState::kDefiniteForeground && !fg) ||
        (trimap[i] == TrimapState::kDefiniteBackground && fg)) {
      throw ValidationError("labelling violates a hard trimap constraint");
    }
    energy += fg ? costs.foreground[image[i]] : costs.background[image[i]];
  }
  for_each_pair(image.width(), image.height(), params.connectivity,
                [&](std::size_t a, std::size_t b, double distance) {
                  if ((foreground[a] != 0) != (foreground[b] != 0)) {
                    energy += nlink_capacity(image[a], image[b], distance, params.gamma, beta);
                  }
                });
  return energy;
}

GrabCutResult grabcut(const GrayImage& image, const Trimap& trimap, const GrabCutParams& params,
                      std::uint64_t seed) {
  params.validate();
  require_same_size(image, trimap);
  const double beta = compute_beta(image, params.connectivity);

  Mask2D labels(image.width(), image.height(), 0);
  for (std::size_t i = 0; i < image.size(); ++i) labels[i] = is_foreground(trimap[i]) ? 1 : 0;

  GmmFitOptions fit;
  fit.components = params.components;
  fit.variance_floor = params.variance_floor;
  fit.seed = seed;
  ClassModels models;
  models.foreground = fit_gmm(class_histogram(image, labels, true), fit);
  fit.seed = seed ^ 0x9E3779B97F4A7C15ULL;
  models.background = fit_gmm(class_histogram(image, labels, false), fit);

  GrabCutResult result;
  result.energies.push_back(labelling_energy(image, trimap, labels, models, params, beta));

  for (std::size_t round = 0; round < params.max_iters; ++round) {
    // Component assignment and refit: warm-started EM on each class's current
    // pixels. Models are only replaced when the quantised energy does not rise.
    ClassModels refit;
    refit.foreground = refine_gmm(models.foreground, class_histogram(image, labels, true),
                                  params.variance_floor, params.refit_iterations, 1e-9);
    refit.background = refine_gmm(models.background, class_histogram(image, labels, false),
                                  params.variance_floor, params.refit_iterations, 1e-9);
    if (labelling_energy(image, trimap, labels, refit, params, beta) <=
        result.energies.back()) {
      models = std::move(refit);
    }

    const FlowNetwork net = build_graph(image, trimap, models, params, beta);
    const MaxFlowResult cut = max_flow(net);

    Mask2D next(image.width(), image.height(), 0);
    for (std::size_t i = 0; i < image.size(); ++i) next[i] = cut.source_side[i];
    const Capacity energy = labelling_energy(image, trimap, next, models, params, beta);
    if (energy > result.energies.back()) {
      throw Error(ErrorKind::kInternal,
                  fmt::format("GrabCut energy rose from {} to {} in round {}",
                              result.energies.back(), energy, round + 1));
    }
    result.energies.push_back(energy);
    result.rounds = round + 1;
    const bool fixed_point = next == labels;
    labels = std::move(next);
    if (fixed_point) {
      result.converged = true;
      break;
    }
  }
  result.mask = std::move(labels);
  return result;
}

GrabCutResult grabcut_segment(const GrayImage& slice, const SeedGeometry& geometry,
                              const GrabCutParams& params, std::uint64_t seed) {
  const ImageSize size{slice.width(), slice.height()};
  if (geometry.bbox.x_min < 0 || geometry.bbox.y_min < 0 ||
      geometry.bbox.x_max >= static_cast<long>(size.width) ||
      geometry.bbox.y_max >= static_cast<long>(size.height)) {
    throw ValidationError("seed bounding box lies outside the slice");
  }
  const Mask2D quad = rasterize_quad(geometry, size);
  const Trimap trimap = build_trimap(geometry, quad, size);
  return grabcut(slice, trimap, params, seed);
}

}  // namespace osteoforge
