#include "bgrpo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bgrpo {

namespace {

struct SampleScratch {
  std::vector<double> hidden, logits, probs, dlogits, dhidden;

  void resize(const PolicyParams& p) {
    hidden.resize(static_cast<std::size_t>(p.hidden));
    logits.resize(static_cast<std::size_t>(p.num_classes));
    probs.resize(static_cast<std::size_t>(p.num_classes));
    dlogits.resize(static_cast<std::size_t>(p.num_classes));
    dhidden.resize(static_cast<std::size_t>(p.hidden));
  }
};

void check_indices(const Dataset& dataset, std::span<const int> indices) {
  if (indices.empty()) {
    throw std::invalid_argument("empty batch");
  }
  for (int i : indices) {
    if (i < 0 || i >= dataset.size()) {
      throw std::invalid_argument("sample index " + std::to_string(i) +
                                  " out of range");
    }
  }
}

void check_labels(const Dataset& dataset, std::span<const int> indices) {
  for (int i : indices) {
    if (!dataset.samples[static_cast<std::size_t>(i)].label) {
      throw std::invalid_argument(
          "unlabeled sample '" + dataset.samples[static_cast<std::size_t>(i)].id +
          "' in supervised batch");
    }
  }
}

void check_rollouts(const Dataset& dataset,
                    std::span<const SampleRollout> rollouts,
                    const BGRPOConfig& cfg) {
  cfg.check();
  if (rollouts.empty()) {
    throw std::invalid_argument("empty rollout batch");
  }
  for (const auto& r : rollouts) {
    if (r.sample < 0 || r.sample >= dataset.size()) {
      throw std::invalid_argument("rollout sample index out of range");
    }
    if (r.action < 0 || r.action >= dataset.num_classes) {
      throw std::invalid_argument("rollout action out of range");
    }
    if (!(r.p_old > 0.0 && r.p_old <= 1.0) ||
        !(r.p_ref > 0.0 && r.p_ref <= 1.0)) {
      throw std::invalid_argument(
          "rollout snapshot probabilities must lie in (0,1]");
    }
    if (!std::isfinite(r.advantage)) {
      throw std::invalid_argument("non-finite advantage in rollout");
    }
  }
}

// Backprop of dlogits through the second linear layer, relu and first layer.
// Adds the (unscaled) contribution of one sample into `grad`.
void backward_from_dlogits(const PolicyParams& p, std::span<const double> x,
                           SampleScratch& s, GradientSet& grad) {
  const int d = p.dim;
  const int h = p.hidden;
  const int n = p.num_classes;

  for (int c = 0; c < n; ++c) {
    const double dz = s.dlogits[static_cast<std::size_t>(c)];
    grad.b2[static_cast<std::size_t>(c)] += dz;
    double* grow = grad.w2.data() + static_cast<std::size_t>(c) * h;
    for (int j = 0; j < h; ++j) grow[j] += dz * s.hidden[static_cast<std::size_t>(j)];
  }
  for (int j = 0; j < h; ++j) {
    double acc = 0.0;
    for (int c = 0; c < n; ++c) {
      acc += s.dlogits[static_cast<std::size_t>(c)] *
             p.w2[static_cast<std::size_t>(c) * h + static_cast<std::size_t>(j)];
    }
    // relu mask: gradient flows only where the unit fired
    s.dhidden[static_cast<std::size_t>(j)] =
        s.hidden[static_cast<std::size_t>(j)] > 0.0 ? acc : 0.0;
  }
  for (int j = 0; j < h; ++j) {
    const double dh = s.dhidden[static_cast<std::size_t>(j)];
    grad.b1[static_cast<std::size_t>(j)] += dh;
    double* grow = grad.w1.data() + static_cast<std::size_t>(j) * d;
    for (int k = 0; k < d; ++k) grow[k] += dh * x[static_cast<std::size_t>(k)];
  }
}

// Per-sample loss and dlogits of the supervised objective, unscaled.
double ce_dlogits(const PolicyParams& p, std::span<const double> probs,
                  int label, std::span<double> dlogits) {
  for (int c = 0; c < p.num_classes; ++c) {
    dlogits[static_cast<std::size_t>(c)] =
        probs[static_cast<std::size_t>(c)] - (c == label ? 1.0 : 0.0);
  }
  return -std::log(probs[static_cast<std::size_t>(label)]);
}

// d(-J)/dp_cur for one rollout: the surrogate contributes A/p_old while the
// ratio branch of the min is active and zero once the clip saturates; the
// KL estimator contributes beta (p_cur - p_ref) / p_cur^2.
double neg_objective_dp(double p_cur, const SampleRollout& r,
                        const BGRPOConfig& cfg) {
  const double t = p_cur / r.p_old;
  const double clipped =
      std::clamp(t, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
  const double v_ratio = t * r.advantage;
  const double v_clip = clipped * r.advantage;
  double dj = v_ratio <= v_clip ? r.advantage / r.p_old : 0.0;
  dj += cfg.beta * (r.p_ref - p_cur) / (p_cur * p_cur);
  return -dj;
}

// Per-sample loss and dlogits of the refinement objective, unscaled.
double bgrpo_dlogits(const PolicyParams& p, std::span<const double> probs,
                     const SampleRollout& r, const BGRPOConfig& cfg,
                     std::span<double> dlogits) {
  const double p_cur = probs[static_cast<std::size_t>(r.action)];
  const double loss = -per_sample_objective(p_cur, r, cfg);
  const double dl_dp = neg_objective_dp(p_cur, r, cfg);
  // softmax jacobian row for the acted class
  for (int c = 0; c < p.num_classes; ++c) {
    const double pc = probs[static_cast<std::size_t>(c)];
    const double jac = c == r.action ? p_cur * (1.0 - pc) : -p_cur * pc;
    dlogits[static_cast<std::size_t>(c)] = dl_dp * jac;
  }
  return loss;
}

}  // namespace

namespace serial {

void forward_many(const PolicyParams& params, const Dataset& dataset,
                  std::span<const int> indices,
                  std::vector<double>& probs_out) {
  check_params(params);
  check_indices(dataset, indices);
  const auto n = static_cast<std::size_t>(params.num_classes);
  probs_out.resize(indices.size() * n);
  SampleScratch s;
  s.resize(params);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& sample = dataset.samples[static_cast<std::size_t>(indices[i])];
    forward(params, sample.features, s.hidden, s.logits,
            std::span<double>(probs_out.data() + i * n, n));
  }
}

std::pair<double, GradientSet> ce_loss_and_grads(const PolicyParams& params,
                                                 const Dataset& dataset,
                                                 std::span<const int> indices) {
  check_params(params);
  check_indices(dataset, indices);
  check_labels(dataset, indices);
  GradientSet grad = GradientSet::zeros_like(params);
  SampleScratch s;
  s.resize(params);
  double loss = 0.0;
  for (int i : indices) {
    const auto& sample = dataset.samples[static_cast<std::size_t>(i)];
    forward(params, sample.features, s.hidden, s.logits, s.probs);
    loss += ce_dlogits(params, s.probs, *sample.label, s.dlogits);
    backward_from_dlogits(params, sample.features, s, grad);
  }
  const double inv_b = 1.0 / static_cast<double>(indices.size());
  grad.scale(inv_b);
  return {loss * inv_b, std::move(grad)};
}

std::pair<double, GradientSet> bgrpo_loss_and_grads(
    const PolicyParams& params, const Dataset& dataset,
    std::span<const SampleRollout> rollouts, const BGRPOConfig& cfg) {
  check_params(params);
  check_rollouts(dataset, rollouts, cfg);
  GradientSet grad = GradientSet::zeros_like(params);
  SampleScratch s;
  s.resize(params);
  double loss = 0.0;
  for (const auto& r : rollouts) {
    const auto& sample = dataset.samples[static_cast<std::size_t>(r.sample)];
    forward(params, sample.features, s.hidden, s.logits, s.probs);
    loss += bgrpo_dlogits(params, s.probs, r, cfg, s.dlogits);
    backward_from_dlogits(params, sample.features, s, grad);
  }
  const double inv_b = 1.0 / static_cast<double>(rollouts.size());
  grad.scale(inv_b);
  return {loss * inv_b, std::move(grad)};
}

}  // namespace serial

namespace parallel {

void forward_many(const PolicyParams& params, const Dataset& dataset,
                  std::span<const int> indices,
                  std::vector<double>& probs_out) {
  check_params(params);
  check_indices(dataset, indices);
  const auto n = static_cast<std::size_t>(params.num_classes);
  probs_out.resize(indices.size() * n);
  const auto count = static_cast<long>(indices.size());
#ifdef _OPENMP
#pragma omp parallel
#endif
  {
    SampleScratch s;
    s.resize(params);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (long i = 0; i < count; ++i) {
      const auto& sample =
          dataset.samples[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
      forward(params, sample.features, s.hidden, s.logits,
              std::span<double>(probs_out.data() + static_cast<std::size_t>(i) * n, n));
    }
  }
}

namespace {

// Batched backward pass, bitwise-equal to the serial reference. Per-sample
// intermediates are computed in parallel over samples; every gradient
// element then accumulates its per-sample terms in ascending sample order,
// parallel over rows, so the addition sequence per element matches the
// serial loop exactly for any thread count.
//
// PerSampleFn(i, probs_row, dlogits_row) -> unscaled per-sample loss.
template <typename PerSampleFn>
std::pair<double, GradientSet> phased_loss_and_grads(
    const PolicyParams& params, const Dataset& dataset,
    std::span<const int> samples, PerSampleFn&& per_sample) {
  const long b = static_cast<long>(samples.size());
  const auto bz = static_cast<std::size_t>(b);
  const int d = params.dim;
  const int h = params.hidden;
  const int n = params.num_classes;
  const auto hz = static_cast<std::size_t>(h);
  const auto nz = static_cast<std::size_t>(n);

  std::vector<double> hidden(bz * hz);    // post-relu activations
  std::vector<double> dlogits(bz * nz);   // loss gradient at the logits
  std::vector<double> dhidden(bz * hz);   // masked backprop through w2
  std::vector<double> losses(bz);

  // Phase 1: forward and per-sample logit gradients, parallel over samples.
#ifdef _OPENMP
#pragma omp parallel
#endif
  {
    std::vector<double> logits(nz), probs(nz);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (long i = 0; i < b; ++i) {
      const auto iz = static_cast<std::size_t>(i);
      const auto& sample =
          dataset.samples[static_cast<std::size_t>(samples[iz])];
      forward(params, sample.features,
              std::span<double>(hidden.data() + iz * hz, hz), logits, probs);
      losses[iz] = per_sample(
          iz, std::span<const double>(probs),
          std::span<double>(dlogits.data() + iz * nz, nz));
    }
  }

  GradientSet grad = GradientSet::zeros_like(params);

  // Phase 2: second-layer gradients, parallel over class rows; samples are
  // folded in ascending order within each row.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int c = 0; c < n; ++c) {
    const auto cz = static_cast<std::size_t>(c);
    double* wrow = grad.w2.data() + cz * hz;
    double db = 0.0;
    for (long i = 0; i < b; ++i) {
      const auto iz = static_cast<std::size_t>(i);
      const double dz = dlogits[iz * nz + cz];
      db += dz;
      const double* hrow = hidden.data() + iz * hz;
      for (int j = 0; j < h; ++j) wrow[j] += dz * hrow[j];
    }
    grad.b2[cz] = db;
  }

  // Phase 3: backprop through w2 with the relu mask, parallel over samples.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (long i = 0; i < b; ++i) {
    const auto iz = static_cast<std::size_t>(i);
    const double* dzrow = dlogits.data() + iz * nz;
    const double* hrow = hidden.data() + iz * hz;
    double* dhrow = dhidden.data() + iz * hz;
    for (int j = 0; j < h; ++j) {
      double acc = 0.0;
      for (int c = 0; c < n; ++c) {
        acc += dzrow[c] * params.w2[static_cast<std::size_t>(c) * hz +
                                    static_cast<std::size_t>(j)];
      }
      dhrow[j] = hrow[j] > 0.0 ? acc : 0.0;
    }
  }

  // Phase 4: first-layer gradients, parallel over hidden rows.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int j = 0; j < h; ++j) {
    const auto jz = static_cast<std::size_t>(j);
    double* wrow = grad.w1.data() + jz * static_cast<std::size_t>(d);
    double db = 0.0;
    for (long i = 0; i < b; ++i) {
      const auto iz = static_cast<std::size_t>(i);
      const double dh = dhidden[iz * hz + jz];
      db += dh;
      const auto& x =
          dataset.samples[static_cast<std::size_t>(samples[iz])].features;
      for (int k = 0; k < d; ++k) wrow[k] += dh * x[static_cast<std::size_t>(k)];
    }
    grad.b1[jz] = db;
  }

  double loss = 0.0;
  for (double l : losses) loss += l;
  const double inv_b = 1.0 / static_cast<double>(b);
  grad.scale(inv_b);
  return {loss * inv_b, std::move(grad)};
}

}  // namespace

std::pair<double, GradientSet> ce_loss_and_grads(const PolicyParams& params,
                                                 const Dataset& dataset,
                                                 std::span<const int> indices) {
  check_params(params);
  check_indices(dataset, indices);
  check_labels(dataset, indices);
  return phased_loss_and_grads(
      params, dataset, indices,
      [&](std::size_t i, std::span<const double> probs,
          std::span<double> dlogits) {
        const auto& sample =
            dataset.samples[static_cast<std::size_t>(indices[i])];
        return ce_dlogits(params, probs, *sample.label, dlogits);
      });
}

std::pair<double, GradientSet> bgrpo_loss_and_grads(
    const PolicyParams& params, const Dataset& dataset,
    std::span<const SampleRollout> rollouts, const BGRPOConfig& cfg) {
  check_params(params);
  check_rollouts(dataset, rollouts, cfg);
  std::vector<int> indices(rollouts.size());
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    indices[i] = rollouts[i].sample;
  }
  return phased_loss_and_grads(
      params, dataset, indices,
      [&](std::size_t i, std::span<const double> probs,
          std::span<double> dlogits) {
        return bgrpo_dlogits(params, probs, rollouts[i], cfg, dlogits);
      });
}

}  // namespace parallel

}  // namespace bgrpo
