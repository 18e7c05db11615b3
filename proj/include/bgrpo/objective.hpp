#ifndef BGRPO_OBJECTIVE_HPP_
#define BGRPO_OBJECTIVE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bgrpo/advantage.hpp"
#include "bgrpo/dataset.hpp"
#include "bgrpo/policy.hpp"

namespace bgrpo {

struct GradientSet {
  std::vector<double> w1, b1, w2, b2;

  static GradientSet zeros_like(const PolicyParams& params);
  void scale(double s);
  double max_abs() const;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

enum class OptimizerKind { sgd, adam };

OptimizerKind optimizer_from_string(const std::string& s);
std::string to_string(OptimizerKind kind);

// Settings of the refinement objective and both training stages.
struct BGRPOConfig {
  double epsilon = 0.2;      // importance-ratio clip range
  double beta = 0.04;        // KL penalty coefficient
  int batch_size = 32;
  double eps_std = 1e-8;     // degenerate-group threshold
  AdvantageMode advantage_mode = AdvantageMode::positive_clip;
  double learning_rate = 1e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamParams adam;
  int warmup_epochs = 100;
  int rl_epochs = 100;
  int inner_steps = 1;        // gradient steps per batch rollout
  bool sample_actions = false;  // draw o_i from the old policy instead of argmax
  std::uint64_t seed = 0;
  bool parallel = true;       // OpenMP batch kernels vs serial reference

  void check() const;
};

// Frozen per-sample rollout quantities. Only p_cur carries gradient; the
// snapshot probabilities and the advantage are constants.
struct SampleRollout {
  int sample = 0;      // index into the dataset the batch was drawn from
  int action = 0;      // o_i, the class acted on at rollout time
  double p_old = 1.0;  // pi_old(o_i | q_i)
  double p_ref = 1.0;  // pi_ref(o_i | q_i)
  double advantage = 0.0;
};

// u - ln(u) - 1, the nonnegative KL estimator. Throws for u <= 0.
double kl_penalty(double u);

// min(t A, clip(t, 1-eps, 1+eps) A) - beta (u - ln u - 1) with
// t = p_cur / p_old and u = p_ref / p_cur.
double per_sample_objective(double p_cur, const SampleRollout& rollout,
                            const BGRPOConfig& cfg);

// Negated batch mean of per-sample objectives (minimized by the trainer).
double batch_loss(const PolicyParams& params, const Dataset& dataset,
                  std::span<const SampleRollout> rollouts,
                  const BGRPOConfig& cfg);

// Exact analytic gradient of batch_loss. Clipped samples on the constant
// branch contribute zero through the surrogate term.
GradientSet batch_gradients(const PolicyParams& params, const Dataset& dataset,
                            std::span<const SampleRollout> rollouts,
                            const BGRPOConfig& cfg);

std::pair<double, GradientSet> bgrpo_loss_and_grads(
    const PolicyParams& params, const Dataset& dataset,
    std::span<const SampleRollout> rollouts, const BGRPOConfig& cfg);

// Mean negative log-likelihood of the gold labels, with exact gradients.
// Every indexed sample must be labeled.
std::pair<double, GradientSet> ce_loss_and_grads(const PolicyParams& params,
                                                 const Dataset& dataset,
                                                 std::span<const int> indices,
                                                 bool parallel);

// Softmax outputs for dataset[indices], row-major |indices| x num_classes.
std::vector<double> forward_many(const PolicyParams& params,
                                 const Dataset& dataset,
                                 std::span<const int> indices, bool parallel);

enum class LossKind { cross_entropy, bgrpo };

LossKind loss_kind_from_string(const std::string& s);

// Central-difference verification of the analytic gradients on a random
// small instance. Instances whose importance ratio lands within 10h of a
// clip kink, or with a hidden pre-activation within 1e-3 of the relu kink,
// are redrawn.
struct GradCheckSpec {
  LossKind kind = LossKind::bgrpo;
  int dim = 8;
  int hidden = 4;
  int num_classes = 6;
  int batch = 5;
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tol = 1e-4;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool pass = false;
  int resamples = 0;  // instances redrawn by the kink rule
};

GradCheckReport grad_check(const GradCheckSpec& spec);

}  // namespace bgrpo

#endif  // BGRPO_OBJECTIVE_HPP_
