#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace cclc {

class Tape;
class Rng;

// Dense row-major array of 64-bit reals. Copies are shallow and share
// storage; a tensor that is not tracked on a tape is treated as immutable
// once built, so sharing across threads is safe.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<int> shape);

  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor uniform(std::vector<int> shape, Rng& rng, double lo, double hi);

  bool defined() const { return values_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const;
  std::size_t size() const { return values_ ? values_->size() : 0; }

  double* data() { return values_->data(); }
  const double* data() const { return values_->data(); }

  double& at(int i) { return (*values_)[static_cast<std::size_t>(i)]; }
  double at(int i) const { return (*values_)[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) { return (*values_)[offset(i, j)]; }
  double at(int i, int j) const { return (*values_)[offset(i, j)]; }
  double& at(int i, int j, int k) { return (*values_)[offset(i, j, k)]; }
  double at(int i, int j, int k) const { return (*values_)[offset(i, j, k)]; }

  // Value of a single-element tensor.
  double item() const;

  bool tracked() const { return node_ >= 0; }
  int node() const { return node_; }
  Tape* tape() const { return tape_; }

  // Deep, untracked copy.
  Tensor clone() const;

  bool all_finite() const;

 private:
  std::size_t offset(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
           static_cast<std::size_t>(j);
  }
  std::size_t offset(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(shape_[2]) +
           static_cast<std::size_t>(k);
  }

  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> values_;
  int node_ = -1;
  Tape* tape_ = nullptr;

  friend class Tape;
};

// "3x4" style rendering for error messages.
std::string shape_string(const std::vector<int>& shape);

std::size_t shape_size(const std::vector<int>& shape);

}  // namespace cclc
