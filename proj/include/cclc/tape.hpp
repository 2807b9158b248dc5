#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "cclc/tensor.hpp"

namespace cclc {

class Rng;

// Gradients of a scalar with respect to the tape's watched leaves, keyed by
// leaf node id. Every leaf has an entry; leaves the loss does not depend on
// carry zeros of the leaf's shape.
class GradientMap {
 public:
  const Tensor& at(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const;

  std::vector<std::pair<int, Tensor>>& entries() { return entries_; }
  const std::vector<std::pair<int, Tensor>>& entries() const { return entries_; }

  // Euclidean norm over all entries taken together.
  double global_norm() const;

  // Scales every gradient in place.
  void scale_all(double factor);

 private:
  std::vector<std::pair<int, Tensor>> entries_;  // ascending node id
  friend class Tape;
};

// Op records for one forward pass, topologically ordered by construction.
// A tape and the tensors tracked on it are confined to one worker at a time.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `value` as a differentiable leaf; the returned tensor shares
  // storage with `value`.
  Tensor watch(const Tensor& value);

  // Reverse sweep from a tracked scalar. Visits each record after all of
  // its consumers and returns the per-leaf gradients.
  GradientMap backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

  // Working gradients of the sweep, indexed by node id; populated lazily.
  using GradStore = std::vector<Tensor>;
  using BackwardFn = std::function<void(const Tensor& grad_out, GradStore& grads)>;

  // Appends an op record and returns a tracked tensor sharing `value`'s
  // storage. Called by the op implementations below; not meant for direct
  // use elsewhere.
  Tensor record(Tensor value, BackwardFn backward);

 private:
  struct Node {
    BackwardFn backward;  // null for leaves
    std::vector<int> shape;
    bool leaf = false;
  };
  std::vector<Node> nodes_;
};

// Accumulates `contribution` into the node's slot, allocating zeros of the
// node's shape on first touch. Helper for op backward closures.
void accumulate_grad(Tape::GradStore& grads, const Tensor& parent,
                     const std::function<void(Tensor&)>& add_into);

// ---------------------------------------------------------------------------
// Differentiable operations. Each returns a tracked tensor when any tracked
// input participates (inputs tracked on different tapes are an error) and a
// plain value otherwise.
// ---------------------------------------------------------------------------

// a[m x k] * b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// a[m x n] * x[n] -> [m]
Tensor matvec(const Tensor& a, const Tensor& x);

// x[m]^T * a[m x n] -> [n]
Tensor vecmat(const Tensor& x, const Tensor& a);

Tensor transpose(const Tensor& a);

Tensor sigmoid(const Tensor& t);
Tensor tanh(const Tensor& t);

// Natural log; every input entry must be strictly positive.
Tensor log(const Tensor& t);

// Same-shape elementwise product. No implicit broadcasting.
Tensor elementwise_mul(const Tensor& a, const Tensor& b);

// Elementwise product with an untracked constant factor (dropout masks,
// label weights).
Tensor mul_const(const Tensor& a, const Tensor& factor);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double constant);

// Gradient passes only where lo < value < hi.
Tensor clamp(const Tensor& t, double lo, double hi);

// Max-subtracted softmax along `axis` of a 1-D or 2-D tensor.
Tensor softmax(const Tensor& t, int axis);

// Mean along `axis`; a 1-D input reduces to a scalar.
Tensor mean(const Tensor& t, int axis);

// Sum of all entries -> scalar.
Tensor sum(const Tensor& t);

Tensor concat(const Tensor& a, const Tensor& b, int axis);

struct KMaxResult {
  Tensor values;             // the k largest entries, descending
  std::vector<int> indices;  // original positions; lower index wins ties
};

// k largest entries of a 1-D tensor. 1 <= k <= length.
KMaxResult k_max_pool(const Tensor& v, int k);

// Valid 1-D convolution of seq[c x T] with filters[w x c x f], then
// max-over-time per filter -> [f]. Sequences shorter than w are right-padded
// with zero columns first.
Tensor conv1d_max(const Tensor& seq, const Tensor& filters);

// out[:, t] = matrix[rows[t], :]; gradients scatter back into the selected
// rows, skipping pad_row (pass -1 to keep all rows).
Tensor embed_columns(const Tensor& matrix, const std::vector<int>& rows, int pad_row);

// Gather columns of a 2-D tensor.
Tensor select_columns(const Tensor& m, const std::vector<int>& cols);

// Repeat a vector as `count` identical columns -> [d x count].
Tensor tile_columns(const Tensor& v, int count);

// Right-pad a 2-D tensor with zero columns up to min_time (no-op if wider).
Tensor pad_columns(const Tensor& t, int min_time);

// Stack scalars into a 1-D tensor.
Tensor stack(const std::vector<Tensor>& scalars);

// Dot product of two equal-length 1-D tensors -> scalar.
Tensor dot(const Tensor& a, const Tensor& b);

// Inverted dropout: keeps entries with probability 1-ratio scaled by
// 1/(1-ratio). Identity when train is false or ratio is 0.
Tensor dropout(const Tensor& t, double ratio, Rng& rng, bool train);

}  // namespace cclc
