#include "bgrpo/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace bgrpo {

AdvantageMode advantage_mode_from_string(const std::string& s) {
  if (s == "positive_clip") return AdvantageMode::positive_clip;
  if (s == "signed") return AdvantageMode::signed_norm;
  if (s == "none") return AdvantageMode::none;
  throw std::invalid_argument("unknown advantage mode: " + s);
}

std::string to_string(AdvantageMode mode) {
  switch (mode) {
    case AdvantageMode::positive_clip: return "positive_clip";
    case AdvantageMode::signed_norm: return "signed";
    case AdvantageMode::none: return "none";
  }
  return "?";
}

AdvantageVector batch_advantages(std::span<const double> rewards,
                                 AdvantageMode mode, double eps_std) {
  const std::size_t b = rewards.size();
  if (b < 2) {
    throw std::invalid_argument("advantage group needs at least 2 rewards");
  }
  for (double r : rewards) {
    if (!std::isfinite(r)) {
      throw std::invalid_argument("non-finite reward in group");
    }
  }

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(b);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(b);
  const double sd = std::sqrt(var);

  AdvantageVector out;
  out.mode = mode;
  out.degenerate = sd < eps_std;
  out.values.resize(b);

  if (mode == AdvantageMode::none) {
    for (double& v : out.values) v = 1.0;
    return out;
  }
  if (out.degenerate) {
    for (double& v : out.values) v = 0.0;
    return out;
  }
  for (std::size_t i = 0; i < b; ++i) {
    const double a = (rewards[i] - mean) / sd;
    out.values[i] = mode == AdvantageMode::positive_clip ? std::max(a, 0.0) : a;
  }
  return out;
}

}  // namespace bgrpo
