#pragma once

#include <cstdint>
#include <vector>

#include "osteoforge/gmm.hpp"
#include "osteoforge/maxflow.hpp"
#include "osteoforge/recist.hpp"
#include "osteoforge/volume.hpp"

namespace osteoforge {

enum class TrimapState : std::uint8_t {
  kDefiniteBackground = 0,
  kProbableBackground = 1,
  kProbableForeground = 2,
  kDefiniteForeground = 3,
};

using Trimap = Image2D<TrimapState>;

inline bool is_definite(TrimapState s) {
  return s == TrimapState::kDefiniteBackground || s == TrimapState::kDefiniteForeground;
}
inline bool is_foreground(TrimapState s) {
  return s == TrimapState::kProbableForeground || s == TrimapState::kDefiniteForeground;
}

enum class Connectivity2D { kFour = 4, kEight = 8 };

struct GrabCutParams {
  std::size_t components = 5;
  double gamma = 50.0;
  std::size_t max_iters = 5;
  double variance_floor = 0.25;
  Connectivity2D connectivity = Connectivity2D::kEight;
  /// EM iterations used to refit each class model per round.
  std::size_t refit_iterations = 10;

  void validate() const;
};

struct ClassModels {
  GaussianMixture foreground;
  GaussianMixture background;
};

/// Real-valued energies are stored as round(value * kCapacityScale) in
/// 64-bit integers.
inline constexpr double kCapacityScale = 1e6;
/// Likelihood floor before taking -log.
inline constexpr double kLikelihoodFloor = 1e-12;

Capacity quantize(double value);

/// Outside the box: definite background. Box minus quadrilateral: probable
/// foreground. Quadrilateral: definite foreground. Throws ValidationError when
/// no definite-background or no definite-foreground pixel would exist.
Trimap build_trimap(const SeedGeometry& g, const Mask2D& quad_mask, ImageSize image);

/// 1 / (2 <(z_n - z_m)^2>) over unordered neighbour pairs; 0 for a constant
/// image.
double compute_beta(const GrayImage& image, Connectivity2D connectivity);

/// Largest number of neighbours any pixel can have.
std::size_t max_neighbours(Connectivity2D connectivity);

/// Per-intensity data costs -log(max(p(z), floor)) for both classes,
/// quantised.
struct DataCosts {
  std::array<Capacity, 256> foreground{};
  std::array<Capacity, 256> background{};
};
DataCosts data_costs(const ClassModels& models);

/// Pixel graph: nodes 0..N-1 are pixels (x + width * y), N is the source
/// (foreground), N+1 the sink (background).
FlowNetwork build_graph(const GrayImage& image, const Trimap& trimap, const ClassModels& models,
                        const GrabCutParams& params, double beta);

/// Quantised Gibbs energy of a foreground labelling. Definite pixels
/// contribute the data cost of their fixed class; a labelling that violates a
/// hard constraint is not meaningful and is rejected with ValidationError.
Capacity labelling_energy(const GrayImage& image, const Trimap& trimap, const Mask2D& foreground,
                          const ClassModels& models, const GrabCutParams& params, double beta);

struct GrabCutResult {
  Mask2D mask;
  /// energies[0] is the initial labelling under the initial models, then one
  /// entry per completed round.
  std::vector<Capacity> energies;
  std::size_t rounds = 0;
  bool converged = false;
};

GrabCutResult grabcut(const GrayImage& image, const Trimap& trimap, const GrabCutParams& params,
                      std::uint64_t seed);

/// Seeds from the measurement geometry and runs GrabCut on one windowed slice.
GrabCutResult grabcut_segment(const GrayImage& slice, const SeedGeometry& geometry,
                              const GrabCutParams& params, std::uint64_t seed);

}  // namespace osteoforge
