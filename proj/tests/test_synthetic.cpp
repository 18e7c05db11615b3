#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "bgrpo/synthetic.hpp"
#include "bgrpo/trainer.hpp"
#include "test_util.hpp"

using namespace bgrpo;

namespace {

double dist2(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d += (a[k] - b[k]) * (a[k] - b[k]);
  }
  return d;
}

}  // namespace

TEST_CASE("vanishing sigma makes nearest-mean classification exact") {
  MixtureSpec spec;
  spec.num_classes = 6;
  spec.dim = 16;
  spec.per_class = 20;
  spec.sigma = 1e-6;
  spec.separation = 3.0;
  spec.seed = 11;
  const Dataset ds = generate(spec);
  const auto means = mixture_means(spec);

  for (const auto& s : ds.samples) {
    int nearest = 0;
    double best = dist2(s.features, means[0]);
    for (int c = 1; c < spec.num_classes; ++c) {
      const double d = dist2(s.features, means[static_cast<std::size_t>(c)]);
      if (d < best) {
        best = d;
        nearest = c;
      }
    }
    CHECK(nearest == *s.label);
    CHECK(bayes_oracle(spec, s.features).first == *s.label);
  }
}

TEST_CASE("per-class counts and determinism") {
  MixtureSpec spec;
  spec.num_classes = 6;
  spec.per_class = 100;
  spec.dim = 8;
  spec.seed = 5;
  const Dataset a = generate(spec);
  CHECK(a.size() == 600);
  std::map<int, int> counts;
  for (const auto& s : a.samples) ++counts[*s.label];
  for (int c = 0; c < 6; ++c) CHECK(counts[c] == 100);

  const Dataset b = generate(spec);
  REQUIRE(b.size() == a.size());
  for (int i = 0; i < a.size(); ++i) {
    const auto iz = static_cast<std::size_t>(i);
    CHECK(a.samples[iz].id == b.samples[iz].id);
    CHECK(a.samples[iz].features == b.samples[iz].features);
  }

  // Separate draws share means but not samples.
  const Dataset fresh = generate(spec, 1);
  CHECK(fresh.samples[0].features != a.samples[0].features);
  CHECK(fresh.samples[0].id != a.samples[0].id);  // ids stay globally unique

  spec.per_class_counts = {4, 1, 2, 1, 1, 1};
  const Dataset skew = generate(spec);
  CHECK(skew.size() == 10);
}

TEST_CASE("second view with zero noise is an isometry that keeps ids") {
  MixtureSpec spec;
  spec.num_classes = 4;
  spec.dim = 12;
  spec.per_class = 10;
  spec.seed = 9;
  const Dataset ds = generate(spec);
  const Dataset view = second_view(ds, 77, 0.0);

  REQUIRE(view.size() == ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    const auto iz = static_cast<std::size_t>(i);
    CHECK(view.samples[iz].id == ds.samples[iz].id);
    CHECK(view.samples[iz].label == ds.samples[iz].label);
  }
  for (int i = 0; i < 12; ++i) {
    for (int j = i + 1; j < 12; ++j) {
      const auto iz = static_cast<std::size_t>(i);
      const auto jz = static_cast<std::size_t>(j);
      const double before =
          std::sqrt(dist2(ds.samples[iz].features, ds.samples[jz].features));
      const double after = std::sqrt(
          dist2(view.samples[iz].features, view.samples[jz].features));
      CHECK(after == doctest::Approx(before).epsilon(1e-9));
    }
  }

  // The rotation genuinely moves points.
  CHECK(view.samples[0].features != ds.samples[0].features);
}

TEST_CASE("bayes posterior rows sum to one and peak at the component") {
  MixtureSpec spec;
  spec.num_classes = 6;
  spec.dim = 16;
  spec.per_class = 5;
  spec.sigma = 0.5;
  spec.separation = 10.0;
  spec.seed = 3;
  const auto means = mixture_means(spec);

  for (int c = 0; c < spec.num_classes; ++c) {
    const auto [argmax, posterior] =
        bayes_oracle(spec, means[static_cast<std::size_t>(c)]);
    CHECK(argmax == c);
    CHECK(posterior[c] > 0.999);
    double sum = 0.0;
    for (double p : posterior.probs) sum += p;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("equidistant point splits its mass over the two nearest components") {
  MixtureSpec spec;
  spec.num_classes = 6;
  spec.dim = 16;
  spec.sigma = 1.0;
  spec.separation = 10.0;
  spec.seed = 21;
  const auto means = mixture_means(spec);

  std::vector<double> midpoint(16);
  for (int k = 0; k < 16; ++k) {
    midpoint[static_cast<std::size_t>(k)] =
        0.5 * (means[0][static_cast<std::size_t>(k)] +
               means[1][static_cast<std::size_t>(k)]);
  }
  const auto [argmax, posterior] = bayes_oracle(spec, midpoint);
  CHECK(posterior[0] == doctest::Approx(posterior[1]).epsilon(1e-9));
  CHECK(posterior[0] + posterior[1] > 0.99);
  CHECK(argmax <= 1);
}

TEST_CASE("posterior is equivariant under permuting the means") {
  MixtureSpec spec;
  spec.num_classes = 5;
  spec.dim = 8;
  spec.sigma = 1.3;
  spec.separation = 2.0;
  spec.seed = 8;
  auto means = mixture_means(spec);

  std::vector<double> x(8);
  for (int k = 0; k < 8; ++k) x[static_cast<std::size_t>(k)] = 0.1 * k - 0.3;
  const ProbDistribution base = mixture_posterior(means, spec.sigma, x);

  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<std::vector<double>> permuted(means.size());
  for (std::size_t c = 0; c < perm.size(); ++c) permuted[c] = means[perm[c]];
  const ProbDistribution shuffled = mixture_posterior(permuted, spec.sigma, x);
  for (std::size_t c = 0; c < perm.size(); ++c) {
    CHECK(shuffled[static_cast<int>(c)] ==
          doctest::Approx(base[static_cast<int>(perm[c])]).epsilon(1e-12));
  }
}

TEST_CASE("the oracle dominates a trained policy on fresh samples") {
  MixtureSpec spec;
  spec.num_classes = 6;
  spec.dim = 16;
  spec.per_class = 100;
  spec.sigma = 1.0;
  spec.separation = 2.0;
  spec.seed = 40;
  const Dataset train = generate(spec, 0);
  const Dataset fresh = generate(spec, 1);  // large unseen draw

  BGRPOConfig cfg;
  cfg.warmup_epochs = 40;
  cfg.learning_rate = 1e-3;
  cfg.seed = 2;
  const PolicyParams policy =
      train_supervised(init_params(16, 32, 6, 1), train, fresh, cfg).first;

  long policy_hits = 0, oracle_hits = 0;
  for (const auto& s : fresh.samples) {
    if (predict(policy, s.features) == *s.label) ++policy_hits;
    if (bayes_oracle(spec, s.features).first == *s.label) ++oracle_hits;
  }
  const double policy_acc = static_cast<double>(policy_hits) / fresh.size();
  const double oracle_acc = static_cast<double>(oracle_hits) / fresh.size();
  CHECK(oracle_acc >= policy_acc - 0.01);  // 1% sampling-noise allowance
}

TEST_CASE("spec validation and sidecar file") {
  MixtureSpec spec;
  spec.sigma = 0.0;
  CHECK_THROWS_AS(spec.check(), std::invalid_argument);
  spec = MixtureSpec{};
  spec.per_class = 0;
  CHECK_THROWS_AS(spec.check(), std::invalid_argument);
  spec = MixtureSpec{};
  spec.per_class_counts = {1, 2};  // wrong length for 6 classes
  CHECK_THROWS_AS(spec.check(), std::invalid_argument);

  spec = MixtureSpec{};
  const auto dir = testutil::scratch_dir("synthetic");
  save_mixture_spec(spec, dir / "m.spec");
  const std::string text = testutil::read_file(dir / "m.spec");
  CHECK(text.find("classes=6") != std::string::npos);
  CHECK(text.find("separation=") != std::string::npos);
}
