#pragma once

// Test-only reference implementations, written independently of the library
// kernels and ops they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "cclc/tensor.hpp"

namespace oracles {

// Plain triple loop.
inline cclc::Tensor matmul(const cclc::Tensor& a, const cclc::Tensor& b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  cclc::Tensor c({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
      c.at(i, j) = acc;
    }
  }
  return c;
}

// Direct exp/normalize along a 1-D vector.
inline std::vector<double> softmax(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i]);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

// Sliding-window dot products, then a max per filter.
inline std::vector<double> conv1d_max(const cclc::Tensor& seq, const cclc::Tensor& filters) {
  const int channels = seq.dim(0), time = seq.dim(1);
  const int width = filters.dim(0), nfilters = filters.dim(2);
  std::vector<double> out(static_cast<std::size_t>(nfilters));
  for (int f = 0; f < nfilters; ++f) {
    double best = -std::numeric_limits<double>::infinity();
    for (int t = 0; t + width <= time; ++t) {
      double acc = 0.0;
      for (int w = 0; w < width; ++w) {
        for (int c = 0; c < channels; ++c) acc += filters.at(w, c, f) * seq.at(c, t + w);
      }
      best = std::max(best, acc);
    }
    out[static_cast<std::size_t>(f)] = best;
  }
  return out;
}

// Full sort; returns the k largest values with their original indices,
// lower index first among equals.
inline std::pair<std::vector<double>, std::vector<int>> k_max(const std::vector<double>& v,
                                                              int k) {
  std::vector<int> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return v[static_cast<std::size_t>(a)] > v[static_cast<std::size_t>(b)]; });
  std::vector<double> values;
  std::vector<int> indices;
  for (int j = 0; j < k; ++j) {
    indices.push_back(order[static_cast<std::size_t>(j)]);
    values.push_back(v[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])]);
  }
  return {values, indices};
}

// Definition-level average precision over a ranked binary list.
inline double average_precision(const std::vector<int>& relevance) {
  double hits = 0.0, total = 0.0;
  for (std::size_t r = 0; r < relevance.size(); ++r) {
    if (relevance[r]) {
      hits += 1.0;
      total += hits / static_cast<double>(r + 1);
    }
  }
  return total / hits;
}

// Linear scan for the first relevant position.
inline double reciprocal_rank(const std::vector<int>& relevance) {
  for (std::size_t r = 0; r < relevance.size(); ++r) {
    if (relevance[r]) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

// Central finite differences of `loss_of_params` with respect to every
// coordinate of `param`, perturbing the shared storage in place.
inline std::vector<double> finite_difference(cclc::Tensor& param,
                                             const std::function<double()>& loss_of_params,
                                             double h = 1e-5) {
  std::vector<double> grad(param.size());
  double* values = param.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = loss_of_params();
    values[i] = saved - h;
    const double down = loss_of_params();
    values[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Largest relative error between analytic and numeric gradients, ignoring
// coordinates where both are tiny.
inline double max_relative_error(const std::vector<double>& analytic,
                                 const std::vector<double>& numeric, double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::abs(analytic[i]) + std::abs(numeric[i]);
    if (denom <= floor) continue;
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace oracles
