#ifndef BGRPO_KERNELS_HPP_
#define BGRPO_KERNELS_HPP_

// Batched forward/backward kernels. bgrpo::serial holds the plain reference
// loops; bgrpo::parallel holds the OpenMP versions. The parallel kernels
// compute per-sample contributions independently and reduce them in sample
// order, so both paths produce bitwise-identical results for any thread
// count.

#include <span>
#include <utility>
#include <vector>

#include "bgrpo/objective.hpp"

namespace bgrpo::serial {

void forward_many(const PolicyParams& params, const Dataset& dataset,
                  std::span<const int> indices, std::vector<double>& probs_out);

std::pair<double, GradientSet> ce_loss_and_grads(const PolicyParams& params,
                                                 const Dataset& dataset,
                                                 std::span<const int> indices);

std::pair<double, GradientSet> bgrpo_loss_and_grads(
    const PolicyParams& params, const Dataset& dataset,
    std::span<const SampleRollout> rollouts, const BGRPOConfig& cfg);

}  // namespace bgrpo::serial

namespace bgrpo::parallel {

void forward_many(const PolicyParams& params, const Dataset& dataset,
                  std::span<const int> indices, std::vector<double>& probs_out);

std::pair<double, GradientSet> ce_loss_and_grads(const PolicyParams& params,
                                                 const Dataset& dataset,
                                                 std::span<const int> indices);

std::pair<double, GradientSet> bgrpo_loss_and_grads(
    const PolicyParams& params, const Dataset& dataset,
    std::span<const SampleRollout> rollouts, const BGRPOConfig& cfg);

}  // namespace bgrpo::parallel

#endif  // BGRPO_KERNELS_HPP_
