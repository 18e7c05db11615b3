#ifndef BGRPO_SYNTHETIC_HPP_
#define BGRPO_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "bgrpo/dataset.hpp"

namespace bgrpo {

// Isotropic Gaussian mixture over random unit directions. The default
// separation puts a supervised half-corpus baseline in the mid-range where
// refinement has room to move it.
struct MixtureSpec {
  int num_classes = 6;
  int dim = 32;
  std::vector<int> per_class_counts;  // empty -> `per_class` everywhere
  int per_class = 100;
  double sigma = 1.0;
  double separation = 2.3;  // distance of each class mean from the origin
  std::uint64_t seed = 0;
  std::string name = "mixture";

  void check() const;
  std::vector<int> counts() const;
};

// Class means: unit directions scaled by `separation`, derived from
// `spec.seed` only (the draw tag below never changes them).
std::vector<std::vector<double>> mixture_means(const MixtureSpec& spec);

// Deterministic per (spec.seed, draw). Different draws share means but use
// fresh samples, giving train/eval sets from the same population.
Dataset generate(const MixtureSpec& spec, std::uint64_t draw = 0);

// Features mapped through a random orthogonal matrix plus Gaussian noise;
// ids, labels and order are preserved. Stands in for a second extractor.
Dataset second_view(const Dataset& dataset, std::uint64_t rotation_seed,
                    double noise_std);

// Posterior over components for explicit means (equal priors, shared
// isotropic sigma): softmax of -||x - mu_k||^2 / (2 sigma^2).
ProbDistribution mixture_posterior(
    const std::vector<std::vector<double>>& means, double sigma,
    std::span<const double> features);

// Exact posterior under the generating mixture with equal priors.
std::pair<int, ProbDistribution> bayes_oracle(const MixtureSpec& spec,
                                              std::span<const double> features);

// Reproducibility sidecar written next to generated feature files.
void save_mixture_spec(const MixtureSpec& spec,
                       const std::filesystem::path& path);

}  // namespace bgrpo

#endif  // BGRPO_SYNTHETIC_HPP_
