#pragma once

#include <cstddef>

namespace cclc::kernels {

// Dense numeric inner loops. The functions in kernels::serial are the
// plain reference implementations; the ones at namespace scope run the
// same arithmetic with OpenMP across independent output elements, so the
// two families agree bitwise. tests/ compares them and tools/bench.cpp
// times them against each other.
//
// Layout conventions, all row-major:
//   matrices  a[m x k]: a[i*k + j]
//   sequences seq[channels x time]: seq[c*time + t]
//   filters   f[width x channels x nfilters]: f[(w*channels + c)*nf + j]
//
// With `accumulate` the destination is added to instead of overwritten.

namespace serial {

// c[m x n] (+)= a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

// c[m x n] (+)= a[m x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

// c[m x n] (+)= a[k x m]^T * b[k x n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);

// Per filter j: out_vals[j] = max over window start t of
// sum_{w,c} filters[w][c][j] * seq[c][t+w]; out_pos[j] = earliest argmax.
// Requires time >= width.
void conv1d_max(const double* seq, int channels, int time, const double* filters, int width,
                int nfilters, double* out_vals, int* out_pos);

// Max-subtracted softmax down each column of in[rows x cols].
void softmax_cols(const double* in, double* out, int rows, int cols);

// Max-subtracted softmax along each row of in[rows x cols].
void softmax_rows(const double* in, double* out, int rows, int cols);

}  // namespace serial

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void conv1d_max(const double* seq, int channels, int time, const double* filters, int width,
                int nfilters, double* out_vals, int* out_pos);
void softmax_cols(const double* in, double* out, int rows, int cols);
void softmax_rows(const double* in, double* out, int rows, int cols);

}  // namespace cclc::kernels
