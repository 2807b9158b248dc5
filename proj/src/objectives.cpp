#include "cclc/objectives.hpp"

#include <cmath>
#include <string>

#include "cclc/error.hpp"
#include "cclc/tape.hpp"

namespace cclc {

static void check_batch(const Tensor& scores, const std::vector<int>& labels, const char* op) {
  if (scores.rank() != 1) {
    throw shape_error(std::string(op) + ": scores must be 1-D, got " +
                      shape_string(scores.shape()));
  }
  if (static_cast<std::size_t>(scores.dim(0)) != labels.size()) {
    throw shape_error(std::string(op) + ": " + std::to_string(scores.dim(0)) + " scores vs " +
                      std::to_string(labels.size()) + " labels");
  }
  for (int label : labels) {
    if (label != 0 && label != 1) {
      throw value_error(std::string(op) + ": labels must be 0 or 1, got " + std::to_string(label));
    }
  }
}

Tensor listwise_loss(const Tensor& scores, const std::vector<int>& labels) {
  check_batch(scores, labels, "listwise_loss");
  const int n = scores.dim(0);

  double positives = 0.0;
  for (int label : labels) positives += label;
  if (positives == 0.0) {
    throw value_error("listwise_loss: group has no positive label");
  }

  // loss = sum_i y'_i log(y'_i / S_i)  with  y' = y / sum(y),  0 log 0 = 0
  Tensor target({n});
  double entropy_term = 0.0;  // sum y' log y', a constant
  for (int i = 0; i < n; ++i) {
    const double y = labels[static_cast<std::size_t>(i)] / positives;
    target.at(i) = y;
    if (y > 0.0) entropy_term += y * std::log(y);
  }

  Tensor log_probs = log(softmax(scores, 0));
  Tensor cross = scale(sum(mul_const(log_probs, target)), -1.0);
  return add_scalar(cross, entropy_term);
}

Tensor pointwise_loss(const Tensor& scores, const std::vector<int>& labels) {
  check_batch(scores, labels, "pointwise_loss");
  const int n = scores.dim(0);

  Tensor positive_mask({n});
  Tensor negative_mask({n});
  for (int i = 0; i < n; ++i) {
    positive_mask.at(i) = labels[static_cast<std::size_t>(i)];
    negative_mask.at(i) = 1 - labels[static_cast<std::size_t>(i)];
  }

  Tensor p = clamp(scores, kProbEpsilon, 1.0 - kProbEpsilon);
  Tensor positive_term = mul_const(log(p), positive_mask);
  Tensor negative_term = mul_const(log(add_scalar(scale(p, -1.0), 1.0)), negative_mask);
  return scale(sum(add(positive_term, negative_term)), -1.0 / n);
}

}  // namespace cclc
