#include <algorithm>
#include <cmath>

#include "cclc/kernels.hpp"

namespace cclc::kernels::serial {

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      double* dst = &c[i * n + j];
      *dst = accumulate ? *dst + acc : acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      double* dst = &c[i * n + j];
      *dst = accumulate ? *dst + acc : acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      double* dst = &c[i * n + j];
      *dst = accumulate ? *dst + acc : acc;
    }
  }
}

void conv1d_max(const double* seq, int channels, int time, const double* filters, int width,
                int nfilters, double* out_vals, int* out_pos) {
  const int positions = time - width + 1;
  for (int j = 0; j < nfilters; ++j) {
    double best = 0.0;
    int best_pos = 0;
    for (int t = 0; t < positions; ++t) {
      double acc = 0.0;
      for (int w = 0; w < width; ++w) {
        for (int c = 0; c < channels; ++c) {
          acc += filters[(w * channels + c) * nfilters + j] * seq[c * time + t + w];
        }
      }
      if (t == 0 || acc > best) {
        best = acc;
        best_pos = t;
      }
    }
    out_vals[j] = best;
    out_pos[j] = best_pos;
  }
}

void softmax_cols(const double* in, double* out, int rows, int cols) {
  for (int j = 0; j < cols; ++j) {
    double mx = in[j];
    for (int i = 1; i < rows; ++i) mx = std::max(mx, in[i * cols + j]);
    double sum = 0.0;
    for (int i = 0; i < rows; ++i) {
      const double e = std::exp(in[i * cols + j] - mx);
      out[i * cols + j] = e;
      sum += e;
    }
    for (int i = 0; i < rows; ++i) out[i * cols + j] /= sum;
  }
}

void softmax_rows(const double* in, double* out, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const double* row = in + static_cast<std::size_t>(i) * cols;
    double* dst = out + static_cast<std::size_t>(i) * cols;
    double mx = row[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
      dst[j] = std::exp(row[j] - mx);
      sum += dst[j];
    }
    for (int j = 0; j < cols; ++j) dst[j] /= sum;
  }
}

}  // namespace cclc::kernels::serial
