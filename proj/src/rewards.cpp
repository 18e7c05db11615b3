#include "bgrpo/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bgrpo {

RewardKind reward_kind_from_string(const std::string& s) {
  if (s == "r1") return RewardKind::r1;
  if (s == "r2") return RewardKind::r2;
  if (s == "r3") return RewardKind::r3;
  if (s == "r4") return RewardKind::r4;
  if (s == "r5") return RewardKind::r5;
  throw std::invalid_argument("unknown reward kind: " + s);
}

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::r1: return "r1";
    case RewardKind::r2: return "r2";
    case RewardKind::r3: return "r3";
    case RewardKind::r4: return "r4";
    case RewardKind::r5: return "r5";
  }
  return "?";
}

bool reward_needs_teacher(RewardKind kind) {
  return kind == RewardKind::r3 || kind == RewardKind::r4 ||
         kind == RewardKind::r5;
}

double RewardConfig::theta_for(int num_classes) const {
  if (theta > 0.0) return theta;
  return 0.5 * std::log(static_cast<double>(num_classes));
}

void RewardConfig::check() const {
  if (!(reward_score > 0.0)) {
    throw std::invalid_argument("reward score C must be > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("reward threshold delta must lie in (0,1)");
  }
  if (penalty > 0.0) {
    throw std::invalid_argument("reward penalty must be <= 0");
  }
}

namespace {

double max_prob(const ProbDistribution& dist) {
  if (dist.probs.empty()) {
    throw std::invalid_argument("empty probability distribution");
  }
  return *std::max_element(dist.probs.begin(), dist.probs.end());
}

void check_same_classes(const ProbDistribution& a, const ProbDistribution& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("policy/teacher class count mismatch: " +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
}

}  // namespace

RewardOutcome reward_r1(const ProbDistribution& dist, const RewardConfig& cfg) {
  const bool hit = max_prob(dist) > cfg.delta;  // strict
  return {hit ? cfg.reward_score : cfg.penalty, hit};
}

RewardOutcome reward_r2(const ProbDistribution& dist) {
  return {max_prob(dist), true};
}

RewardOutcome reward_r3(const ProbDistribution& policy_dist,
                        const ProbDistribution& teacher_dist,
                        const RewardConfig& cfg) {
  check_same_classes(policy_dist, teacher_dist);
  const bool hit =
      argmax_lowest(policy_dist.probs) == argmax_lowest(teacher_dist.probs);
  return {hit ? cfg.reward_score : cfg.penalty, hit};
}

RewardOutcome reward_r4(const ProbDistribution& policy_dist,
                        const ProbDistribution& teacher_dist,
                        const RewardConfig& cfg) {
  const bool hit = reward_r1(policy_dist, cfg).triggered &&
                   reward_r3(policy_dist, teacher_dist, cfg).triggered;
  return {hit ? cfg.reward_score : cfg.penalty, hit};
}

RewardOutcome reward_r5(const ProbDistribution& policy_dist,
                        const ProbDistribution& teacher_dist,
                        const RewardConfig& cfg) {
  check_same_classes(policy_dist, teacher_dist);
  const double kl = kl_divergence(teacher_dist.probs, policy_dist.probs);
  const bool hit = kl < cfg.theta_for(policy_dist.size());  // strict
  return {hit ? cfg.reward_score : cfg.penalty, hit};
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: length mismatch");
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (p[n] == 0.0) continue;
    if (q[n] <= 0.0) {
      throw std::invalid_argument(
          "kl_divergence: q has a zero where p is positive");
    }
    sum += p[n] * std::log(p[n] / q[n]);
  }
  return sum;
}

RewardOutcome compute_reward(const ProbDistribution& policy_dist,
                             const ProbDistribution* teacher_dist,
                             const RewardConfig& cfg) {
  if (reward_needs_teacher(cfg.kind) && teacher_dist == nullptr) {
    throw std::invalid_argument("reward " + to_string(cfg.kind) +
                                " requires a teacher distribution");
  }
  switch (cfg.kind) {
    case RewardKind::r1: return reward_r1(policy_dist, cfg);
    case RewardKind::r2: return reward_r2(policy_dist);
    case RewardKind::r3: return reward_r3(policy_dist, *teacher_dist, cfg);
    case RewardKind::r4: return reward_r4(policy_dist, *teacher_dist, cfg);
    case RewardKind::r5: return reward_r5(policy_dist, *teacher_dist, cfg);
  }
  throw std::logic_error("unreachable reward kind");
}

}  // namespace bgrpo
