// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Convolution kernels. Two implementations share one contract:
//
//   serial::   direct nested loops, kept as the reference for tests.
//   parallel:: im2col + blocked GEMM, OpenMP-parallel over output rows.
//
// Both are deterministic: every output element is owned by exactly one
// thread and reduced in a fixed order, so results do not depend on the
// thread count.

#pragma once

#include "rucgan/tensor.hpp"

namespace rucgan::kernels {

struct ConvGeometry {
    int stride = 1;
    int pad = 0;
};

/// Output shape for x (N×Cin×H×W) convolved with w (Cout×Cin×kh×kw).
Shape conv2d_output_shape(const Shape& x, const Shape& w, ConvGeometry g);

namespace serial {

/// out = conv(x, w) + bias. `bias` may be null. `out` is overwritten.
void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, ConvGeometry g, Tensor& out);
/// dx += conv_transpose(dout, w).
void conv2d_backward_input(const Tensor& dout, const Tensor& w, ConvGeometry g, Tensor& dx);
/// dw += correlate(x, dout); db += sum(dout) when db is non-null.
void conv2d_backward_weight(const Tensor& x, const Tensor& dout, ConvGeometry g, Tensor& dw, Tensor* db);

/// C(M×N) += A(M×K) · B(K×N), row-major, naive triple loop.
void gemm_acc(int m, int n, int k, const double* a, const double* b, double* c);

}  // namespace serial

namespace parallel {

void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, ConvGeometry g, Tensor& out);
void conv2d_backward_input(const Tensor& dout, const Tensor& w, ConvGeometry g, Tensor& dx);
void conv2d_backward_weight(const Tensor& x, const Tensor& dout, ConvGeometry g, Tensor& dw, Tensor* db);

/// C(M×N) += A(M×K) · B(K×N), row-major.
void gemm_acc(int m, int n, int k, const double* a, const double* b, double* c);
/// C(M×N) += A(M×K) · B(N×K)^T, row-major.
void gemm_abt_acc(int m, int n, int k, const double* a, const double* b, double* c);

}  // namespace parallel

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace rucgan::kernels
