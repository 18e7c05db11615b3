#include "bgrpo/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "bgrpo/rng.hpp"

namespace bgrpo {

namespace {

constexpr std::uint64_t kMeansTag = 0x6d65616e73ULL;   // mean directions
constexpr std::uint64_t kSampleTag = 0x73616d70ULL;    // sample draws
constexpr std::uint64_t kRotateTag = 0x726f74ULL;      // orthogonal map

void normalize(std::vector<double>& v) {
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
}

}  // namespace

void MixtureSpec::check() const {
  if (num_classes < 2 || dim < 1) {
    throw std::invalid_argument("mixture needs >= 2 classes and dim >= 1");
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("mixture sigma must be > 0");
  }
  if (separation < 0.0) {
    throw std::invalid_argument("mixture separation must be >= 0");
  }
  const auto c = counts();
  if (static_cast<int>(c.size()) != num_classes) {
    throw std::invalid_argument("per-class count list length mismatch");
  }
  for (int k : c) {
    if (k < 1) throw std::invalid_argument("per-class counts must be >= 1");
  }
}

std::vector<int> MixtureSpec::counts() const {
  if (!per_class_counts.empty()) return per_class_counts;
  return std::vector<int>(static_cast<std::size_t>(num_classes), per_class);
}

std::vector<std::vector<double>> mixture_means(const MixtureSpec& spec) {
  spec.check();
  rng::Prng gen(rng::mix(spec.seed, kMeansTag));
  std::vector<std::vector<double>> means;
  means.reserve(static_cast<std::size_t>(spec.num_classes));
  for (int c = 0; c < spec.num_classes; ++c) {
    std::vector<double> dir(static_cast<std::size_t>(spec.dim));
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (double& x : dir) {
        x = gen.normal();
        norm2 += x * x;
      }
    } while (norm2 < 1e-12);
    normalize(dir);
    for (double& x : dir) x *= spec.separation;
    means.push_back(std::move(dir));
  }
  return means;
}

Dataset generate(const MixtureSpec& spec, std::uint64_t draw) {
  spec.check();
  const auto means = mixture_means(spec);
  const auto counts = spec.counts();

  Dataset ds;
  ds.name = spec.name;
  ds.dim = spec.dim;
  ds.num_classes = spec.num_classes;

  for (int c = 0; c < spec.num_classes; ++c) {
    // Per-class generator so classes can be produced independently.
    rng::Prng gen(rng::mix(rng::mix(spec.seed, kSampleTag),
                           rng::mix(draw, static_cast<std::uint64_t>(c))));
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
      UtteranceSample s;
      s.id = spec.name + "_d" + std::to_string(draw) + "_c" +
             std::to_string(c) + "_" + std::to_string(i);
      s.corpus = spec.name;
      s.label = c;
      s.features.resize(static_cast<std::size_t>(spec.dim));
      for (int k = 0; k < spec.dim; ++k) {
        s.features[static_cast<std::size_t>(k)] =
            means[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] +
            spec.sigma * gen.normal();
      }
      ds.samples.push_back(std::move(s));
    }
  }
  ds.validate();
  return ds;
}

Dataset second_view(const Dataset& dataset, std::uint64_t rotation_seed,
                    double noise_std) {
  dataset.validate();
  if (noise_std < 0.0) {
    throw std::invalid_argument("second view noise std must be >= 0");
  }
  const auto d = static_cast<std::size_t>(dataset.dim);

  // Random orthogonal matrix: Gaussian matrix -> Gram-Schmidt rows.
  rng::Prng gen(rng::mix(rotation_seed, kRotateTag));
  std::vector<std::vector<double>> q(d, std::vector<double>(d));
  for (std::size_t r = 0; r < d; ++r) {
    bool independent = false;
    while (!independent) {
      for (double& x : q[r]) x = gen.normal();
      for (std::size_t prev = 0; prev < r; ++prev) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += q[r][k] * q[prev][k];
        for (std::size_t k = 0; k < d; ++k) q[r][k] -= dot * q[prev][k];
      }
      double norm2 = 0.0;
      for (double x : q[r]) norm2 += x * x;
      if (norm2 > 1e-9) {
        normalize(q[r]);
        independent = true;
      }
    }
  }

  Dataset out = dataset;
  out.name = dataset.name + "_view2";
  std::vector<double> rotated(d);
  for (auto& s : out.samples) {
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += q[r][k] * s.features[k];
      rotated[r] = acc;
    }
    for (std::size_t r = 0; r < d; ++r) {
      s.features[r] =
          noise_std > 0.0 ? rotated[r] + noise_std * gen.normal() : rotated[r];
    }
    s.corpus = out.name;
  }
  return out;
}

ProbDistribution mixture_posterior(
    const std::vector<std::vector<double>>& means, double sigma,
    std::span<const double> features) {
  if (means.empty() || !(sigma > 0.0)) {
    throw std::invalid_argument("mixture_posterior: bad means or sigma");
  }
  std::vector<double> score(means.size());
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t c = 0; c < means.size(); ++c) {
    if (means[c].size() != features.size()) {
      throw std::invalid_argument("mixture_posterior: dimension mismatch");
    }
    double dist2 = 0.0;
    for (std::size_t k = 0; k < features.size(); ++k) {
      const double diff = features[k] - means[c][k];
      dist2 += diff * diff;
    }
    score[c] = -dist2 * inv_two_var;
  }
  const double zmax = *std::max_element(score.begin(), score.end());
  double sum = 0.0;
  ProbDistribution posterior;
  posterior.probs.resize(score.size());
  for (std::size_t c = 0; c < score.size(); ++c) {
    posterior.probs[c] = std::exp(score[c] - zmax);
    sum += posterior.probs[c];
  }
  for (double& p : posterior.probs) p /= sum;
  return posterior;
}

std::pair<int, ProbDistribution> bayes_oracle(
    const MixtureSpec& spec, std::span<const double> features) {
  spec.check();
  if (static_cast<int>(features.size()) != spec.dim) {
    throw std::invalid_argument("bayes_oracle: feature length mismatch");
  }
  ProbDistribution posterior =
      mixture_posterior(mixture_means(spec), spec.sigma, features);
  return {argmax_lowest(posterior.probs), std::move(posterior)};
}

void save_mixture_spec(const MixtureSpec& spec,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write mixture spec: " + path.string());
  }
  char buf[32];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "name=" << spec.name << '\n'
      << "classes=" << spec.num_classes << '\n'
      << "dim=" << spec.dim << '\n'
      << "sigma=" << fmt(spec.sigma) << '\n'
      << "separation=" << fmt(spec.separation) << '\n'
      << "seed=" << spec.seed << '\n';
  out << "counts=";
  const auto c = spec.counts();
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out << ',';
    out << c[i];
  }
  out << '\n';
}

}  // namespace bgrpo
