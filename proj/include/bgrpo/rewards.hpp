#ifndef BGRPO_REWARDS_HPP_
#define BGRPO_REWARDS_HPP_

#include <span>
#include <string>

#include "bgrpo/policy.hpp"

namespace bgrpo {

enum class RewardKind { r1, r2, r3, r4, r5 };

RewardKind reward_kind_from_string(const std::string& s);
std::string to_string(RewardKind kind);
bool reward_needs_teacher(RewardKind kind);

// Constants of the reward rules. `theta` <= 0 selects the scale-aware
// default ln(N)/2 at evaluation time.
struct RewardConfig {
  RewardKind kind = RewardKind::r1;
  double reward_score = 1.0;   // C
  double delta = 0.5;          // likelihood threshold
  double theta = 0.0;          // KL threshold; <= 0 means ln(N)/2
  double penalty = 0.0;        // value of the else-branches

  double theta_for(int num_classes) const;
  void check() const;  // C > 0, delta in (0,1), penalty <= 0
};

struct RewardOutcome {
  double value = 0.0;
  bool triggered = false;
};

// Confidence gate: C if max_n p(n) > delta, else penalty.
RewardOutcome reward_r1(const ProbDistribution& dist, const RewardConfig& cfg);

// Raw confidence: max_n p(n).
RewardOutcome reward_r2(const ProbDistribution& dist);

// Argmax agreement with the teacher (ties to the lowest index).
RewardOutcome reward_r3(const ProbDistribution& policy_dist,
                        const ProbDistribution& teacher_dist,
                        const RewardConfig& cfg);

// Conjunction of the r1 and r3 conditions.
RewardOutcome reward_r4(const ProbDistribution& policy_dist,
                        const ProbDistribution& teacher_dist,
                        const RewardConfig& cfg);

// KL consistency: C if KL(teacher || policy) < theta, else penalty.
RewardOutcome reward_r5(const ProbDistribution& policy_dist,
                        const ProbDistribution& teacher_dist,
                        const RewardConfig& cfg);

// Sum_n p[n] * ln(p[n]/q[n]) with 0 * ln(0/q) = 0. Throws if some q[n] = 0
// while p[n] > 0 (softmax outputs never trigger this).
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Dispatch on cfg.kind; teacher_dist may be null for r1/r2.
RewardOutcome compute_reward(const ProbDistribution& policy_dist,
                             const ProbDistribution* teacher_dist,
                             const RewardConfig& cfg);

}  // namespace bgrpo

#endif  // BGRPO_REWARDS_HPP_
