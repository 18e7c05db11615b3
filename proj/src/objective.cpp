#include "bgrpo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bgrpo/kernels.hpp"
#include "bgrpo/rng.hpp"

namespace bgrpo {

GradientSet GradientSet::zeros_like(const PolicyParams& params) {
  GradientSet g;
  g.w1.assign(params.w1.size(), 0.0);
  g.b1.assign(params.b1.size(), 0.0);
  g.w2.assign(params.w2.size(), 0.0);
  g.b2.assign(params.b2.size(), 0.0);
  return g;
}

void GradientSet::scale(double s) {
  for (double& v : w1) v *= s;
  for (double& v : b1) v *= s;
  for (double& v : w2) v *= s;
  for (double& v : b2) v *= s;
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (const auto* t : {&w1, &b1, &w2, &b2}) {
    for (double v : *t) m = std::max(m, std::abs(v));
  }
  return m;
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer: " + s);
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

void BGRPOConfig::check() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("clip range epsilon must lie in (0,1)");
  }
  if (beta < 0.0) {
    throw std::invalid_argument("KL coefficient beta must be >= 0");
  }
  if (batch_size < 2) {
    throw std::invalid_argument("batch size must be >= 2");
  }
  if (!(eps_std > 0.0)) {
    throw std::invalid_argument("eps_std must be > 0");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning rate must be > 0");
  }
  if (warmup_epochs < 0 || rl_epochs < 0) {
    throw std::invalid_argument("epoch counts must be >= 0");
  }
  if (inner_steps < 1) {
    throw std::invalid_argument("inner steps must be >= 1");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
    throw std::invalid_argument("bad adam moment settings");
  }
}

double kl_penalty(double u) {
  if (!(u > 0.0)) {
    throw std::invalid_argument("kl_penalty requires a positive ratio");
  }
  return u - std::log(u) - 1.0;
}

double per_sample_objective(double p_cur, const SampleRollout& rollout,
                            const BGRPOConfig& cfg) {
  if (!(p_cur > 0.0 && p_cur <= 1.0)) {
    throw std::invalid_argument("p_cur must lie in (0,1]");
  }
  if (!(rollout.p_old > 0.0 && rollout.p_old <= 1.0) ||
      !(rollout.p_ref > 0.0 && rollout.p_ref <= 1.0)) {
    throw std::invalid_argument("snapshot probabilities must lie in (0,1]");
  }
  const double t = p_cur / rollout.p_old;
  const double clipped =
      std::clamp(t, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
  const double surrogate =
      std::min(t * rollout.advantage, clipped * rollout.advantage);
  return surrogate - cfg.beta * kl_penalty(rollout.p_ref / p_cur);
}

double batch_loss(const PolicyParams& params, const Dataset& dataset,
                  std::span<const SampleRollout> rollouts,
                  const BGRPOConfig& cfg) {
  return bgrpo_loss_and_grads(params, dataset, rollouts, cfg).first;
}

GradientSet batch_gradients(const PolicyParams& params, const Dataset& dataset,
                            std::span<const SampleRollout> rollouts,
                            const BGRPOConfig& cfg) {
  return bgrpo_loss_and_grads(params, dataset, rollouts, cfg).second;
}

std::pair<double, GradientSet> bgrpo_loss_and_grads(
    const PolicyParams& params, const Dataset& dataset,
    std::span<const SampleRollout> rollouts, const BGRPOConfig& cfg) {
  return cfg.parallel
             ? parallel::bgrpo_loss_and_grads(params, dataset, rollouts, cfg)
             : serial::bgrpo_loss_and_grads(params, dataset, rollouts, cfg);
}

std::pair<double, GradientSet> ce_loss_and_grads(const PolicyParams& params,
                                                 const Dataset& dataset,
                                                 std::span<const int> indices,
                                                 bool parallel_exec) {
  return parallel_exec ? parallel::ce_loss_and_grads(params, dataset, indices)
                       : serial::ce_loss_and_grads(params, dataset, indices);
}

std::vector<double> forward_many(const PolicyParams& params,
                                 const Dataset& dataset,
                                 std::span<const int> indices,
                                 bool parallel_exec) {
  std::vector<double> probs;
  if (parallel_exec) {
    parallel::forward_many(params, dataset, indices, probs);
  } else {
    serial::forward_many(params, dataset, indices, probs);
  }
  return probs;
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ce") return LossKind::cross_entropy;
  if (s == "bgrpo") return LossKind::bgrpo;
  throw std::invalid_argument("unknown loss kind: " + s);
}

namespace {

struct CheckInstance {
  PolicyParams params;
  Dataset data;
  std::vector<int> indices;
  std::vector<SampleRollout> rollouts;
  BGRPOConfig cfg;
};

// Hidden pre-activations this close to zero make the relu mask unstable
// under the finite-difference step.
constexpr double kReluMargin = 1e-3;

bool relu_safe(const PolicyParams& params, const Dataset& data) {
  for (const auto& sample : data.samples) {
    for (int j = 0; j < params.hidden; ++j) {
      double acc = params.b1[static_cast<std::size_t>(j)];
      const double* row =
          params.w1.data() + static_cast<std::size_t>(j) * params.dim;
      for (int k = 0; k < params.dim; ++k) {
        acc += row[k] * sample.features[static_cast<std::size_t>(k)];
      }
      if (std::abs(acc) < kReluMargin) return false;
    }
  }
  return true;
}

bool build_instance(const GradCheckSpec& spec, std::uint64_t attempt,
                    CheckInstance& out) {
  rng::Prng gen(rng::mix(spec.seed, attempt));
  out.params = init_params(spec.dim, spec.hidden, spec.num_classes,
                           gen.next_u64());
  out.data = Dataset{};
  out.data.name = "gradcheck";
  out.data.dim = spec.dim;
  out.data.num_classes = spec.num_classes;
  out.indices.clear();
  out.rollouts.clear();
  out.cfg = BGRPOConfig{};
  out.cfg.parallel = false;
  out.cfg.epsilon = 0.2;
  out.cfg.beta = 0.04;

  for (int i = 0; i < spec.batch; ++i) {
    UtteranceSample s;
    s.id = "g" + std::to_string(i);
    s.corpus = out.data.name;
    s.features.resize(static_cast<std::size_t>(spec.dim));
    for (double& v : s.features) v = gen.uniform(-1.0, 1.0);
    s.label = static_cast<int>(gen.uniform_int(
        static_cast<std::uint64_t>(spec.num_classes)));
    out.data.samples.push_back(std::move(s));
    out.indices.push_back(i);
  }
  if (!relu_safe(out.params, out.data)) return false;

  if (spec.kind == LossKind::bgrpo) {
    const double kink_margin = 10.0 * spec.h;
    for (int i = 0; i < spec.batch; ++i) {
      const auto& sample = out.data.samples[static_cast<std::size_t>(i)];
      const auto fr = forward(out.params, sample.features);
      SampleRollout r;
      r.sample = i;
      r.action = static_cast<int>(gen.uniform_int(
          static_cast<std::uint64_t>(spec.num_classes)));
      const double p_cur = fr.dist[r.action];
      // First sample lands beyond the clip, second exactly at ratio 1, the
      // rest spread across the clip range.
      double t_target;
      if (i == 0) {
        t_target = 1.0 + out.cfg.epsilon + 0.3;
      } else if (i == 1) {
        t_target = 1.0;
      } else {
        t_target = gen.uniform(0.5, 1.7);
      }
      r.p_old = p_cur / t_target;
      if (!(r.p_old > 1e-6 && r.p_old <= 1.0)) return false;
      const double t = p_cur / r.p_old;
      if (std::abs(t - (1.0 - out.cfg.epsilon)) < kink_margin ||
          std::abs(t - (1.0 + out.cfg.epsilon)) < kink_margin) {
        return false;
      }
      r.p_ref = gen.uniform(0.05, 1.0);
      r.advantage = gen.uniform(-2.0, 2.0);
      out.rollouts.push_back(r);
    }
  }
  return true;
}

double eval_loss(const CheckInstance& inst, const PolicyParams& params,
                 LossKind kind) {
  if (kind == LossKind::cross_entropy) {
    return serial::ce_loss_and_grads(params, inst.data, inst.indices).first;
  }
  return serial::bgrpo_loss_and_grads(params, inst.data, inst.rollouts,
                                      inst.cfg)
      .first;
}

}  // namespace

GradCheckReport grad_check(const GradCheckSpec& spec) {
  if (spec.dim < 1 || spec.hidden < 1 || spec.num_classes < 2 ||
      spec.batch < 1 || !(spec.h > 0.0)) {
    throw std::invalid_argument("bad grad_check instance spec");
  }

  CheckInstance inst;
  GradCheckReport report;
  constexpr int kMaxAttempts = 256;
  int attempt = 0;
  while (!build_instance(spec, static_cast<std::uint64_t>(attempt), inst)) {
    ++attempt;
    if (attempt >= kMaxAttempts) {
      throw std::runtime_error(
          "grad_check could not draw a kink-free instance");
    }
  }
  report.resamples = attempt;

  const GradientSet analytic =
      spec.kind == LossKind::cross_entropy
          ? serial::ce_loss_and_grads(inst.params, inst.data, inst.indices)
                .second
          : serial::bgrpo_loss_and_grads(inst.params, inst.data, inst.rollouts,
                                         inst.cfg)
                .second;

  PolicyParams probe = inst.params;
  double max_rel = 0.0;
  auto sweep = [&](std::vector<double>& tensor,
                   const std::vector<double>& grads) {
    for (std::size_t j = 0; j < tensor.size(); ++j) {
      const double saved = tensor[j];
      tensor[j] = saved + spec.h;
      const double up = eval_loss(inst, probe, spec.kind);
      tensor[j] = saved - spec.h;
      const double down = eval_loss(inst, probe, spec.kind);
      tensor[j] = saved;
      const double numeric = (up - down) / (2.0 * spec.h);
      const double analytic_j = grads[j];
      const double rel = std::abs(analytic_j - numeric) /
                         std::max({1.0, std::abs(analytic_j),
                                   std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  };
  sweep(probe.w1, analytic.w1);
  sweep(probe.b1, analytic.b1);
  sweep(probe.w2, analytic.w2);
  sweep(probe.b2, analytic.b2);

  report.max_rel_error = max_rel;
  report.pass = max_rel < spec.tol;
  return report;
}

}  // namespace bgrpo
