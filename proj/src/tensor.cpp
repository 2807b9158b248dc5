#include "cclc/tensor.hpp"

#include <cmath>
#include <sstream>

#include "cclc/error.hpp"
#include "cclc/rng.hpp"

namespace cclc {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int extent : shape) n *= static_cast<std::size_t>(extent);
  return n;
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << 'x';
    out << shape[i];
  }
  if (shape.empty()) out << "scalar";
  return out.str();
}

static void check_shape(const std::vector<int>& shape) {
  for (int extent : shape) {
    if (extent <= 0) {
      throw shape_error("tensor shape has nonpositive extent: " + shape_string(shape));
    }
  }
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_ = std::make_shared<std::vector<double>>(shape_size(shape_), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)) {
  check_shape(shape_);
  if (values.size() != shape_size(shape_)) {
    throw shape_error("tensor value count " + std::to_string(values.size()) +
                      " does not match shape " + shape_string(shape_));
  }
  values_ = std::make_shared<std::vector<double>>(std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::uniform(std::vector<int> shape, Rng& rng, double lo, double hi) {
  Tensor out(std::move(shape));
  for (double& v : *out.values_) v = rng.uniform(lo, hi);
  return out;
}

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw shape_error("axis " + std::to_string(axis) + " out of range for shape " +
                      shape_string(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

double Tensor::item() const {
  if (size() != 1) {
    throw shape_error("item() requires a single-element tensor, got " + shape_string(shape_));
  }
  return (*values_)[0];
}

Tensor Tensor::clone() const {
  if (!defined()) return Tensor();
  return Tensor(shape_, *values_);
}

bool Tensor::all_finite() const {
  if (!defined()) return true;
  for (double v : *values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace cclc
