#include "osteoforge/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "osteoforge/error.hpp"

namespace osteoforge {
namespace {

constexpr double kTinyDensity = 1e-300;

double normal_density(double z, double mean, double variance) {
  const double d = z - mean;
  return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

double histogram_total(const IntensityHistogram& h) {
  double total = 0.0;
  for (double c : h) total += c;
  return total;
}

// Per-bin responsibilities for one E-step. Bins whose total density underflows
// go wholly to the nearest mean.
void responsibilities(const GaussianMixture& gmm, double z, std::vector<double>& r) {
  const auto& comps = gmm.components();
  double sum = 0.0;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    r[k] = comps[k].weight > 0.0 ? comps[k].weight * normal_density(z, comps[k].mean,
                                                                    comps[k].variance)
                                 : 0.0;
    sum += r[k];
  }
  if (sum > 0.0) {
    for (double& v : r) v /= sum;
    return;
  }
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (comps[k].weight <= 0.0) continue;
    const double d = std::abs(z - comps[k].mean);
    if (d < best) {
      best = d;
      nearest = k;
    }
  }
  std::fill(r.begin(), r.end(), 0.0);
  r[nearest] = 1.0;
}

struct MStepResult {
  GaussianMixture gmm;
  std::vector<std::size_t> empty;
};

MStepResult em_step(const GaussianMixture& gmm, const IntensityHistogram& h, double total,
                    double variance_floor) {
  const std::size_t k_count = gmm.size();
  std::vector<double> n(k_count, 0.0), s1(k_count, 0.0), s2(k_count, 0.0);
  std::vector<double> r(k_count);
  for (std::size_t bin = 0; bin < h.size(); ++bin) {
    if (h[bin] <= 0.0) continue;
    const double z = static_cast<double>(bin);
    responsibilities(gmm, z, r);
    for (std::size_t k = 0; k < k_count; ++k) {
      const double w = h[bin] * r[k];
      n[k] += w;
      s1[k] += w * z;
    }
  }
  std::vector<double> means(k_count);
  for (std::size_t k = 0; k < k_count; ++k) means[k] = n[k] > 0.0 ? s1[k] / n[k] : 0.0;
  // Second pass for a numerically stable centred variance.
  for (std::size_t bin = 0; bin < h.size(); ++bin) {
    if (h[bin] <= 0.0) continue;
    const double z = static_cast<double>(bin);
    responsibilities(gmm, z, r);
    for (std::size_t k = 0; k < k_count; ++k) {
      const double d = z - means[k];
      s2[k] += h[bin] * r[k] * d * d;
    }
  }

  MStepResult out{gmm, {}};
  auto& comps = out.gmm.components();
  for (std::size_t k = 0; k < k_count; ++k) {
    if (n[k] <= 1e-12 * total) {
      comps[k].weight = 0.0;
      out.empty.push_back(k);
      continue;
    }
    comps[k].weight = n[k] / total;
    comps[k].mean = means[k];
    comps[k].variance = std::max(s2[k] / n[k], variance_floor);
  }
  return out;
}

// Splits the widest component into two when it is wider than the floor.
bool reseed(GaussianMixture& gmm, std::size_t target, double variance_floor) {
  auto& comps = gmm.components();
  std::size_t widest = comps.size();
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (k == target || comps[k].weight <= 0.0) continue;
    if (widest == comps.size() || comps[k].variance > comps[widest].variance) widest = k;
  }
  if (widest == comps.size() || comps[widest].variance <= variance_floor * (1.0 + 1e-9)) {
    return false;
  }
  const double sd = std::sqrt(comps[widest].variance);
  const double half = comps[widest].weight / 2.0;
  comps[target] = {half, comps[widest].mean + sd, comps[widest].variance};
  comps[widest].weight = half;
  comps[widest].mean -= sd;
  return true;
}

std::vector<double> kmeans_centres(const IntensityHistogram& h, std::size_t k_count,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> centres;
  {
    std::discrete_distribution<std::size_t> pick(h.begin(), h.end());
    centres.push_back(static_cast<double>(pick(rng)));
  }
  while (centres.size() < k_count) {
    std::array<double, 256> weights{};
    double sum = 0.0;
    for (std::size_t bin = 0; bin < h.size(); ++bin) {
      double d2 = std::numeric_limits<double>::infinity();
      for (double c : centres) {
        d2 = std::min(d2, (static_cast<double>(bin) - c) * (static_cast<double>(bin) - c));
      }
      weights[bin] = h[bin] * d2;
      sum += weights[bin];
    }
    if (sum <= 0.0) {
      // Fewer distinct values than components; the extra centres coincide and
      // end up with no support.
      centres.push_back(centres.front());
      continue;
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    centres.push_back(static_cast<double>(pick(rng)));
  }

  std::vector<std::size_t> assign(256, 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (std::size_t bin = 0; bin < h.size(); ++bin) {
      if (h[bin] <= 0.0) continue;
      std::size_t best = 0;
      for (std::size_t k = 1; k < centres.size(); ++k) {
        if (std::abs(static_cast<double>(bin) - centres[k]) <
            std::abs(static_cast<double>(bin) - centres[best])) {
          best = k;
        }
      }
      changed = changed || assign[bin] != best;
      assign[bin] = best;
    }
    std::vector<double> n(centres.size(), 0.0), s(centres.size(), 0.0);
    for (std::size_t bin = 0; bin < h.size(); ++bin) {
      n[assign[bin]] += h[bin];
      s[assign[bin]] += h[bin] * static_cast<double>(bin);
    }
    for (std::size_t k = 0; k < centres.size(); ++k) {
      if (n[k] > 0.0) centres[k] = s[k] / n[k];
    }
    if (!changed && iter > 0) break;
  }
  return centres;
}

}  // namespace

double GaussianMixture::component_density(std::size_t k, double z) const {
  const auto& c = components_[k];
  return normal_density(z, c.mean, c.variance);
}

double GaussianMixture::density(double z) const {
  double p = 0.0;
  for (const auto& c : components_) {
    if (c.weight > 0.0) p += c.weight * normal_density(z, c.mean, c.variance);
  }
  return p;
}

std::size_t GaussianMixture::most_likely_component(double z) const {
  std::size_t best = 0;
  double best_p = -1.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const double p = components_[k].weight * component_density(k, z);
    if (p > best_p) {
      best_p = p;
      best = k;
    }
  }
  return best;
}

IntensityHistogram make_histogram(std::span<const std::uint8_t> samples) {
  IntensityHistogram h{};
  for (std::uint8_t v : samples) h[v] += 1.0;
  return h;
}

double mean_log_likelihood(const GaussianMixture& gmm, const IntensityHistogram& histogram) {
  double ll = 0.0;
  double total = 0.0;
  for (std::size_t bin = 0; bin < histogram.size(); ++bin) {
    if (histogram[bin] <= 0.0) continue;
    ll += histogram[bin] * std::log(std::max(gmm.density(static_cast<double>(bin)), kTinyDensity));
    total += histogram[bin];
  }
  return total > 0.0 ? ll / total : 0.0;
}

GaussianMixture fit_gmm(const IntensityHistogram& histogram, const GmmFitOptions& options) {
  if (options.components == 0) throw ValidationError("GMM needs at least one component");
  if (!(options.variance_floor > 0.0)) throw ValidationError("variance floor must be > 0");
  const double total = histogram_total(histogram);
  if (total <= 0.0) throw ValidationError("cannot fit a GMM to an empty sample");

  const auto centres = kmeans_centres(histogram, options.components, options.seed);
  std::vector<GaussianComponent> comps(options.components);
  {
    std::vector<double> n(comps.size(), 0.0), s1(comps.size(), 0.0), s2(comps.size(), 0.0);
    for (std::size_t bin = 0; bin < histogram.size(); ++bin) {
      if (histogram[bin] <= 0.0) continue;
      const double z = static_cast<double>(bin);
      std::size_t best = 0;
      for (std::size_t k = 1; k < centres.size(); ++k) {
        if (std::abs(z - centres[k]) < std::abs(z - centres[best])) best = k;
      }
      n[best] += histogram[bin];
      s1[best] += histogram[bin] * z;
    }
    for (std::size_t k = 0; k < comps.size(); ++k) {
      comps[k].mean = n[k] > 0.0 ? s1[k] / n[k] : centres[k];
    }
    for (std::size_t bin = 0; bin < histogram.size(); ++bin) {
      if (histogram[bin] <= 0.0) continue;
      const double z = static_cast<double>(bin);
      std::size_t best = 0;
      for (std::size_t k = 1; k < centres.size(); ++k) {
        if (std::abs(z - centres[k]) < std::abs(z - centres[best])) best = k;
      }
      s2[best] += histogram[bin] * (z - comps[best].mean) * (z - comps[best].mean);
    }
    for (std::size_t k = 0; k < comps.size(); ++k) {
      comps[k].weight = n[k] / total;
      comps[k].variance =
          std::max(n[k] > 0.0 ? s2[k] / n[k] : options.variance_floor, options.variance_floor);
    }
  }

  GaussianMixture gmm(std::move(comps));
  double previous = mean_log_likelihood(gmm, histogram);
  std::size_t reseeds_left = 2 * options.components;
  for (std::size_t iter = 0; iter < options.max_em_iterations; ++iter) {
    auto step = em_step(gmm, histogram, total, options.variance_floor);
    gmm = std::move(step.gmm);
    bool reseeded = false;
    for (std::size_t k : step.empty) {
      if (reseeds_left == 0) break;
      if (reseed(gmm, k, options.variance_floor)) {
        --reseeds_left;
        reseeded = true;
      }
    }
    const double current = mean_log_likelihood(gmm, histogram);
    if (!reseeded && current - previous < options.tolerance) break;
    previous = current;
  }
  return gmm;
}

GaussianMixture fit_gmm(std::span<const std::uint8_t> samples, const GmmFitOptions& options) {
  return fit_gmm(make_histogram(samples), options);
}

GaussianMixture refine_gmm(const GaussianMixture& start, const IntensityHistogram& histogram,
                           double variance_floor, std::size_t iterations, double tolerance) {
  const double total = histogram_total(histogram);
  if (total <= 0.0) return start;
  GaussianMixture gmm = start;
  double previous = mean_log_likelihood(gmm, histogram);
  for (std::size_t iter = 0; iter < iterations; ++iter) {
    auto step = em_step(gmm, histogram, total, variance_floor);
    const double current = mean_log_likelihood(step.gmm, histogram);
    if (current < previous) break;
    gmm = std::move(step.gmm);
    if (current - previous < tolerance) break;
    previous = current;
  }
  return gmm;
}

}  // namespace osteoforge
