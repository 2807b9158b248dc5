#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cclc/kernels.hpp"

// Each output element is produced by one thread running the exact loop the
// serial reference runs, so results are bitwise identical to kernels::serial
// at any thread count. Reductions across threads are never used.

namespace cclc::kernels {

namespace {
// Below these sizes the fork/join overhead dominates; the loops fall back
// to a single thread via the OpenMP `if` clause.
constexpr long kMatmulParallelFlops = 1L << 15;
constexpr long kConvParallelFlops = 1L << 19;
constexpr long kSoftmaxParallelSlices = 64;

// Callers like the per-question evaluation loop parallelize above the
// kernels; opening nested teams there costs more than it buys.
bool worth_forking(long work, long threshold) {
#ifdef _OPENMP
  if (omp_in_parallel()) return false;
#endif
  return work > threshold;
}
}  // namespace

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  const bool fork = worth_forking(static_cast<long>(m) * k * n, kMatmulParallelFlops);
#pragma omp parallel for schedule(static) if (fork)
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
  const bool fork = worth_forking(static_cast<long>(m) * k * n, kMatmulParallelFlops);
#pragma omp parallel for schedule(static) if (fork)
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
  const bool fork = worth_forking(static_cast<long>(m) * k * n, kMatmulParallelFlops);
#pragma omp parallel for schedule(static) if (fork)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      double* dst = &c[i * n + j];
      *dst = accumulate ? *dst + acc : acc;
    }
  }
}

// Output-stationary and blocked so each filter element is read once per
// position block instead of once per position. Per output element the
// products still accumulate in (t, w, c) order and the position scan still
// runs ascending, so results are bitwise identical to the reference.
void conv1d_max(const double* seq, int channels, int time, const double* filters, int width,
                int nfilters, double* out_vals, int* out_pos) {
  const int positions = time - width + 1;
  constexpr int kPosBlock = 64;
  constexpr int kFilterChunk = 16;
  const int chunks = (nfilters + kFilterChunk - 1) / kFilterChunk;
  const bool fork =
      worth_forking(static_cast<long>(nfilters) * positions * width * channels, kConvParallelFlops);
#pragma omp parallel for schedule(static) if (fork)
  for (int chunk = 0; chunk < chunks; ++chunk) {
    const int j0 = chunk * kFilterChunk;
    const int jn = std::min(nfilters, j0 + kFilterChunk) - j0;
    double acc[kFilterChunk * kPosBlock];

    for (int t0 = 0; t0 < positions; t0 += kPosBlock) {
      const int tn = std::min(kPosBlock, positions - t0);
      std::fill(acc, acc + static_cast<std::ptrdiff_t>(jn) * kPosBlock, 0.0);
      for (int w = 0; w < width; ++w) {
        for (int c = 0; c < channels; ++c) {
          const double* filter_row =
              filters + (static_cast<std::size_t>(w) * channels + c) * nfilters + j0;
          const double* window = seq + static_cast<std::size_t>(c) * time + t0 + w;
          for (int j = 0; j < jn; ++j) {
            const double f = filter_row[j];
            double* slot = acc + static_cast<std::ptrdiff_t>(j) * kPosBlock;
            for (int t = 0; t < tn; ++t) slot[t] += f * window[t];
          }
        }
      }
      for (int j = 0; j < jn; ++j) {
        const double* slot = acc + static_cast<std::ptrdiff_t>(j) * kPosBlock;
        for (int t = 0; t < tn; ++t) {
          if (t0 + t == 0 || slot[t] > out_vals[j0 + j]) {
            out_vals[j0 + j] = slot[t];
            out_pos[j0 + j] = t0 + t;
          }
        }
      }
    }
  }
}

void softmax_cols(const double* in, double* out, int rows, int cols) {
  const bool fork = worth_forking(cols, kSoftmaxParallelSlices);
#pragma omp parallel for schedule(static) if (fork)
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
  const bool fork = worth_forking(rows, kSoftmaxParallelSlices);
#pragma omp parallel for schedule(static) if (fork)
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

}  // namespace cclc::kernels
