#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace osteoforge {

struct GaussianComponent {
  double weight = 0.0;
  double mean = 0.0;
  double variance = 1.0;
};

/// Scalar Gaussian mixture over 8-bit intensities.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  explicit GaussianMixture(std::vector<GaussianComponent> components)
      : components_(std::move(components)) {}

  const std::vector<GaussianComponent>& components() const { return components_; }
  std::vector<GaussianComponent>& components() { return components_; }
  std::size_t size() const { return components_.size(); }

  double density(double z) const;
  double component_density(std::size_t k, double z) const;
  /// Index of the component with the largest weighted density at z.
  std::size_t most_likely_component(double z) const;

 private:
  std::vector<GaussianComponent> components_;
};

/// 256-bin intensity histogram; all fitting works on counts so cost does not
/// grow with the number of pixels.
using IntensityHistogram = std::array<double, 256>;

IntensityHistogram make_histogram(std::span<const std::uint8_t> samples);

struct GmmFitOptions {
  std::size_t components = 5;
  double variance_floor = 0.25;
  std::uint64_t seed = 0;
  std::size_t max_em_iterations = 100;
  /// Stop once the mean per-sample log-likelihood improves by less than this.
  double tolerance = 1e-6;
};

/// Seeded k-means++ initialisation, Lloyd refinement, then EM. Components
/// that lose all support are re-seeded by splitting the widest component when
/// it has spread above the floor; otherwise they keep weight 0. Throws
/// ValidationError on empty input or K == 0.
GaussianMixture fit_gmm(const IntensityHistogram& histogram, const GmmFitOptions& options);
GaussianMixture fit_gmm(std::span<const std::uint8_t> samples, const GmmFitOptions& options);

/// Mean log-likelihood per sample.
double mean_log_likelihood(const GaussianMixture& gmm, const IntensityHistogram& histogram);

/// Warm-started EM on a histogram. Never re-seeds, so the mixture
/// log-likelihood is non-decreasing in every iteration.
GaussianMixture refine_gmm(const GaussianMixture& start, const IntensityHistogram& histogram,
                           double variance_floor, std::size_t iterations, double tolerance);

}  // namespace osteoforge
