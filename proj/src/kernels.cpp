// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/kernels.hpp"

#include <algorithm>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "rucgan/error.hpp"

namespace rucgan::kernels {

namespace {

struct Dims {
    int n, cin, h, w, cout, kh, kw, ho, wo;
};

Dims conv_dims(const Shape& x, const Shape& w, ConvGeometry g) {
    if (x.size() != 4 || w.size() != 4) {
        throw DimensionError("conv2d expects 4-D input and weight, got " + shape_str(x) + " and " + shape_str(w));
    }
    if (x[1] != w[1]) {
        throw DimensionError("conv2d channel mismatch: input " + shape_str(x) + ", weight " + shape_str(w));
    }
    Dims d{x[0], x[1], x[2], x[3], w[0], w[2], w[3], 0, 0};
    d.ho = (d.h + 2 * g.pad - d.kh) / g.stride + 1;
    d.wo = (d.w + 2 * g.pad - d.kw) / g.stride + 1;
    if (d.ho < 1 || d.wo < 1) {
        throw DimensionError("conv2d output would be empty for input " + shape_str(x));
    }
    return d;
}

// col is (cin*kh*kw) × (ho*wo)
void im2col(const double* x, const Dims& d, ConvGeometry g, double* col) {
    const int rows = d.cin * d.kh * d.kw;
    const int p = d.ho * d.wo;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const int c = r / (d.kh * d.kw);
        const int ky = (r / d.kw) % d.kh;
        const int kx = r % d.kw;
        double* dst = col + static_cast<std::size_t>(r) * p;
        const double* src = x + static_cast<std::size_t>(c) * d.h * d.w;
        for (int oy = 0; oy < d.ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            double* row = dst + static_cast<std::size_t>(oy) * d.wo;
            if (iy < 0 || iy >= d.h) {
                std::fill(row, row + d.wo, 0.0);
                continue;
            }
            const double* srow = src + static_cast<std::size_t>(iy) * d.w;
            for (int ox = 0; ox < d.wo; ++ox) {
                const int ix = ox * g.stride - g.pad + kx;
                row[ox] = (ix >= 0 && ix < d.w) ? srow[ix] : 0.0;
            }
        }
    }
}

// dx += col2im(col); parallel over input channels so each thread owns its slab.
void col2im_acc(const double* col, const Dims& d, ConvGeometry g, double* dx) {
    const int p = d.ho * d.wo;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < d.cin; ++c) {
        double* dst = dx + static_cast<std::size_t>(c) * d.h * d.w;
        for (int ky = 0; ky < d.kh; ++ky) {
            for (int kx = 0; kx < d.kw; ++kx) {
                const int r = (c * d.kh + ky) * d.kw + kx;
                const double* src = col + static_cast<std::size_t>(r) * p;
                for (int oy = 0; oy < d.ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= d.h) {
                        continue;
                    }
                    double* drow = dst + static_cast<std::size_t>(iy) * d.w;
                    const double* srow = src + static_cast<std::size_t>(oy) * d.wo;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < d.w) {
                            drow[ix] += srow[ox];
                        }
                    }
                }
            }
        }
    }
}

constexpr int kColBlock = 512;

}  // namespace

Shape conv2d_output_shape(const Shape& x, const Shape& w, ConvGeometry g) {
    const Dims d = conv_dims(x, w, g);
    return {d.n, d.cout, d.ho, d.wo};
}

int max_threads() {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------

namespace serial {

void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, ConvGeometry g, Tensor& out) {
    const Dims d = conv_dims(x.shape(), w.shape(), g);
    out = Tensor({d.n, d.cout, d.ho, d.wo});
    for (int n = 0; n < d.n; ++n) {
        for (int o = 0; o < d.cout; ++o) {
            for (int oy = 0; oy < d.ho; ++oy) {
                for (int ox = 0; ox < d.wo; ++ox) {
                    double acc = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
                    for (int c = 0; c < d.cin; ++c) {
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iy < 0 || iy >= d.h) {
                                continue;
                            }
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix < 0 || ix >= d.w) {
                                    continue;
                                }
                                acc += w.at(o, c, ky, kx) * x.at(n, c, iy, ix);
                            }
                        }
                    }
                    out.at(n, o, oy, ox) = acc;
                }
            }
        }
    }
}

void conv2d_backward_input(const Tensor& dout, const Tensor& w, ConvGeometry g, Tensor& dx) {
    const Dims d = conv_dims(dx.shape(), w.shape(), g);
    for (int n = 0; n < d.n; ++n) {
        for (int o = 0; o < d.cout; ++o) {
            for (int oy = 0; oy < d.ho; ++oy) {
                for (int ox = 0; ox < d.wo; ++ox) {
                    const double gval = dout.at(n, o, oy, ox);
                    for (int c = 0; c < d.cin; ++c) {
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iy < 0 || iy >= d.h) {
                                continue;
                            }
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix < 0 || ix >= d.w) {
                                    continue;
                                }
                                dx.at(n, c, iy, ix) += gval * w.at(o, c, ky, kx);
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_weight(const Tensor& x, const Tensor& dout, ConvGeometry g, Tensor& dw, Tensor* db) {
    const Dims d = conv_dims(x.shape(), dw.shape(), g);
    for (int n = 0; n < d.n; ++n) {
        for (int o = 0; o < d.cout; ++o) {
            for (int oy = 0; oy < d.ho; ++oy) {
                for (int ox = 0; ox < d.wo; ++ox) {
                    const double gval = dout.at(n, o, oy, ox);
                    if (db) {
                        (*db)[static_cast<std::size_t>(o)] += gval;
                    }
                    for (int c = 0; c < d.cin; ++c) {
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iy < 0 || iy >= d.h) {
                                continue;
                            }
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix < 0 || ix >= d.w) {
                                    continue;
                                }
                                dw.at(o, c, ky, kx) += gval * x.at(n, c, iy, ix);
                            }
                        }
                    }
                }
            }
        }
    }
}

void gemm_acc(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) {
                acc += a[static_cast<std::size_t>(i) * k + p] * b[static_cast<std::size_t>(p) * n + j];
            }
            c[static_cast<std::size_t>(i) * n + j] += acc;
        }
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP im2col + GEMM
// ---------------------------------------------------------------------------

namespace parallel {

void gemm_acc(int m, int n, int k, const double* a, const double* b, double* c) {
    const int row_blocks = (m + 3) / 4;
    for (int j0 = 0; j0 < n; j0 += kColBlock) {
        const int jn = std::min(kColBlock, n - j0);
#pragma omp parallel for schedule(static)
        for (int ib = 0; ib < row_blocks; ++ib) {
            const int i0 = ib * 4;
            const int rows = std::min(4, m - i0);
            double* c0 = c + static_cast<std::size_t>(i0) * n + j0;
            if (rows == 4) {
                double* c1 = c0 + n;
                double* c2 = c1 + n;
                double* c3 = c2 + n;
                const double* a0 = a + static_cast<std::size_t>(i0) * k;
                const double* a1 = a0 + k;
                const double* a2 = a1 + k;
                const double* a3 = a2 + k;
                for (int p = 0; p < k; ++p) {
                    const double* bp = b + static_cast<std::size_t>(p) * n + j0;
                    const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
#pragma omp simd
                    for (int j = 0; j < jn; ++j) {
                        const double bv = bp[j];
                        c0[j] += v0 * bv;
                        c1[j] += v1 * bv;
                        c2[j] += v2 * bv;
                        c3[j] += v3 * bv;
                    }
                }
            } else {
                for (int r = 0; r < rows; ++r) {
                    double* cr = c0 + static_cast<std::size_t>(r) * n;
                    const double* ar = a + static_cast<std::size_t>(i0 + r) * k;
                    for (int p = 0; p < k; ++p) {
                        const double* bp = b + static_cast<std::size_t>(p) * n + j0;
                        const double v = ar[p];
#pragma omp simd
                        for (int j = 0; j < jn; ++j) {
                            cr[j] += v * bp[j];
                        }
                    }
                }
            }
        }
    }
}

void gemm_abt_acc(int m, int n, int k, const double* a, const double* b, double* c) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* ar = a + static_cast<std::size_t>(i) * k;
        double* cr = c + static_cast<std::size_t>(i) * n;
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            const double* b0 = b + static_cast<std::size_t>(j) * k;
            const double* b1 = b0 + k;
            const double* b2 = b1 + k;
            const double* b3 = b2 + k;
            double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
            for (int p = 0; p < k; ++p) {
                const double av = ar[p];
                s0 += av * b0[p];
                s1 += av * b1[p];
                s2 += av * b2[p];
                s3 += av * b3[p];
            }
            cr[j] += s0;
            cr[j + 1] += s1;
            cr[j + 2] += s2;
            cr[j + 3] += s3;
        }
        for (; j < n; ++j) {
            const double* bj = b + static_cast<std::size_t>(j) * k;
            double s = 0;
#pragma omp simd reduction(+ : s)
            for (int p = 0; p < k; ++p) {
                s += ar[p] * bj[p];
            }
            cr[j] += s;
        }
    }
}

void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, ConvGeometry g, Tensor& out) {
    const Dims d = conv_dims(x.shape(), w.shape(), g);
    out = Tensor({d.n, d.cout, d.ho, d.wo});
    const int kk = d.cin * d.kh * d.kw;
    const int p = d.ho * d.wo;
    const bool pointwise = d.kh == 1 && d.kw == 1 && g.stride == 1 && g.pad == 0;
    std::vector<double> col(pointwise ? 0 : static_cast<std::size_t>(kk) * p);
    for (int n = 0; n < d.n; ++n) {
        const double* xn = x.ptr() + static_cast<std::size_t>(n) * d.cin * d.h * d.w;
        double* on = out.ptr() + static_cast<std::size_t>(n) * d.cout * p;
        if (bias) {
            for (int o = 0; o < d.cout; ++o) {
                std::fill(on + static_cast<std::size_t>(o) * p, on + static_cast<std::size_t>(o + 1) * p,
                          (*bias)[static_cast<std::size_t>(o)]);
            }
        }
        const double* src = xn;
        if (!pointwise) {
            im2col(xn, d, g, col.data());
            src = col.data();
        }
        gemm_acc(d.cout, p, kk, w.ptr(), src, on);
    }
}

void conv2d_backward_input(const Tensor& dout, const Tensor& w, ConvGeometry g, Tensor& dx) {
    const Dims d = conv_dims(dx.shape(), w.shape(), g);
    const int kk = d.cin * d.kh * d.kw;
    const int p = d.ho * d.wo;
    // wt is K × Cout
    std::vector<double> wt(static_cast<std::size_t>(kk) * d.cout);
    for (int o = 0; o < d.cout; ++o) {
        for (int r = 0; r < kk; ++r) {
            wt[static_cast<std::size_t>(r) * d.cout + o] = w[static_cast<std::size_t>(o) * kk + r];
        }
    }
    const bool pointwise = d.kh == 1 && d.kw == 1 && g.stride == 1 && g.pad == 0;
    std::vector<double> col(static_cast<std::size_t>(kk) * p);
    for (int n = 0; n < d.n; ++n) {
        const double* gn = dout.ptr() + static_cast<std::size_t>(n) * d.cout * p;
        double* dxn = dx.ptr() + static_cast<std::size_t>(n) * d.cin * d.h * d.w;
        if (pointwise) {
            gemm_acc(kk, p, d.cout, wt.data(), gn, dxn);
            continue;
        }
        std::fill(col.begin(), col.end(), 0.0);
        gemm_acc(kk, p, d.cout, wt.data(), gn, col.data());
        col2im_acc(col.data(), d, g, dxn);
    }
}

void conv2d_backward_weight(const Tensor& x, const Tensor& dout, ConvGeometry g, Tensor& dw, Tensor* db) {
    const Dims d = conv_dims(x.shape(), dw.shape(), g);
    const int kk = d.cin * d.kh * d.kw;
    const int p = d.ho * d.wo;
    const bool pointwise = d.kh == 1 && d.kw == 1 && g.stride == 1 && g.pad == 0;
    std::vector<double> col(pointwise ? 0 : static_cast<std::size_t>(kk) * p);
    for (int n = 0; n < d.n; ++n) {
        const double* xn = x.ptr() + static_cast<std::size_t>(n) * d.cin * d.h * d.w;
        const double* gn = dout.ptr() + static_cast<std::size_t>(n) * d.cout * p;
        const double* src = xn;
        if (!pointwise) {
            im2col(xn, d, g, col.data());
            src = col.data();
        }
        gemm_abt_acc(d.cout, kk, p, gn, src, dw.ptr());
        if (db) {
            for (int o = 0; o < d.cout; ++o) {
                const double* go = gn + static_cast<std::size_t>(o) * p;
                double s = 0.0;
                for (int j = 0; j < p; ++j) {
                    s += go[j];
                }
                (*db)[static_cast<std::size_t>(o)] += s;
            }
        }
    }
}

}  // namespace parallel

}  // namespace rucgan::kernels
