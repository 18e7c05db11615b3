#ifndef BGRPO_ADVANTAGE_HPP_
#define BGRPO_ADVANTAGE_HPP_

#include <span>
#include <string>
#include <vector>

namespace bgrpo {

enum class AdvantageMode {
  positive_clip,  // max((r - mean)/std, 0)
  signed_norm,    // (r - mean)/std
  none,           // constant 1 (ablation: surrogate without weighting)
};

AdvantageMode advantage_mode_from_string(const std::string& s);
std::string to_string(AdvantageMode mode);

struct AdvantageVector {
  std::vector<double> values;
  AdvantageMode mode = AdvantageMode::positive_clip;
  bool degenerate = false;  // group std below eps_std
};

// Group-normalizes a batch of rewards: A_i = (r_i - mean) / std with the
// population standard deviation, then applies `mode`. Groups whose std falls
// below `eps_std` get all-zero advantages (mode none stays all-ones, so the
// ablation keeps training on the surrogate).
AdvantageVector batch_advantages(std::span<const double> rewards,
                                 AdvantageMode mode, double eps_std = 1e-8);

}  // namespace bgrpo

#endif  // BGRPO_ADVANTAGE_HPP_
