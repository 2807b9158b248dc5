#pragma once

#include <vector>

#include "cclc/tensor.hpp"

namespace cclc {

enum class Objective { listwise, pointwise };

// Probability floor keeping the cross-entropy logs finite.
inline constexpr double kProbEpsilon = 1e-7;

// KL divergence from the normalized label distribution to the softmax of
// the candidate scores, for one question group. Requires at least one
// positive label. The labels act as constants; gradients flow through the
// scores only.
Tensor listwise_loss(const Tensor& scores, const std::vector<int>& labels);

// Mean binary cross-entropy over independent (question, answer) pairs.
// Scores are clamped to [kProbEpsilon, 1 - kProbEpsilon] first.
Tensor pointwise_loss(const Tensor& scores, const std::vector<int>& labels);

}  // namespace cclc
