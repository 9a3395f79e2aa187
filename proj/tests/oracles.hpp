// Independent reference implementations used only by tests. These stay
// deliberately naive (plain nested loops, no shared code with the library
// kernels) so they can arbitrate correctness.
#pragma once

#include "hbp/tensor.hpp"

namespace hbp::testing {

// O(mkn) triple loop.
inline Tensor matmul_reference(const Tensor& a, const Tensor& b) {
    const int m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor c({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
            c.at(i, j) = acc;
        }
    }
    return c;
}

// Six nested loops over output position, output channel and kernel window.
inline Tensor conv2d_reference(const Tensor& input, const Tensor& kernels, int stride, int pad) {
    const int h = input.extent(0), w = input.extent(1), cin = input.extent(2);
    const int kh = kernels.extent(0), kw = kernels.extent(1), cout = kernels.extent(3);
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;
    Tensor out({oh, ow, cout});
    for (int oi = 0; oi < oh; ++oi) {
        for (int oj = 0; oj < ow; ++oj) {
            for (int co = 0; co < cout; ++co) {
                double acc = 0.0;
                for (int p = 0; p < kh; ++p) {
                    for (int q = 0; q < kw; ++q) {
                        const int ii = oi * stride - pad + p;
                        const int jj = oj * stride - pad + q;
                        if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                        for (int ci = 0; ci < cin; ++ci) {
                            acc += input.at(ii, jj, ci) * kernels.at(p, q, ci, co);
                        }
                    }
                }
                out.at(oi, oj, co) = acc;
            }
        }
    }
    return out;
}

// Per-coordinate interaction: out[k] = (A[:,k]·x)(B[:,k]·y).
inline Tensor interaction_reference(const Tensor& x, const Tensor& y, const Tensor& A,
                                    const Tensor& B) {
    const int c = A.extent(0), d = A.extent(1);
    Tensor out({d});
    for (int k = 0; k < d; ++k) {
        double ax = 0.0, by = 0.0;
        for (int i = 0; i < c; ++i) {
            ax += A.at(i, k) * x.at(i);
            by += B.at(i, k) * y.at(i);
        }
        out.at(k) = ax * by;
    }
    return out;
}

} // namespace hbp::testing
