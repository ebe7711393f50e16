#pragma once

#include <cstddef>

// Internal kernels shared by tensor.cpp and encoder.cpp. Not installed.
namespace hg::detail {

// C (MxN) = A (MxK) * B (KxN), f32 storage, per-element f64 accumulation in
// strict k order (bit-identical between the vector and scalar paths).
void gemm_f64(const float* A, const float* B, float* C, int M, int K, int N);

// C (MxN) = A (MxK) * Bt^T where Bt is (N x K) row-major, i.e. weights stored
// [out][in]. f32 FMA accumulation; Bt is streamed sequentially exactly once
// per 8-row band of A, with deep software prefetch. This is the encoder's
// projection hot path.
void gemm_nt_f32(const float* A, const float* Bt, float* C, int M, int K, int N);

// Per-head output projection in one pass over Wt (d x d, [out][in]):
//   P[h][i][j] = dot(S[i] + h*dh, Wt_row_j + h*dh, dh)
// S is (M x d) with head-blocked columns; P is H blocks of (M x d), each
// head_stride floats apart.
void headwise_project_f32(const float* S, const float* Wt, float* P,
                          int M, int d, int H, size_t head_stride);

}  // namespace hg::detail
