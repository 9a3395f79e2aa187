#include "hbp/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace hbp {

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream out;
    out << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ",";
        out << shape[i];
    }
    out << ")";
    return out.str();
}

std::int64_t shape_size(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
}

namespace {

void validate_shape(const std::vector<int>& shape) {
    for (int e : shape) {
        if (e <= 0) {
            throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
        }
    }
}

} // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_size(shape_) != static_cast<std::int64_t>(data_.size())) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    validate_shape(shape);
    if (shape_size(shape) != size()) {
        throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                         " changes element count");
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return hbp::shape_str(shape_); }

// --- raw matmul kernels -----------------------------------------------------

void matmul_into(const double* a, const double* b, double* c, int m, int k, int n) {
    // i-p-j order: the inner loop streams a row of b and of c, which the
    // compiler vectorizes.
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<std::size_t>(i) * n;
        std::memset(crow, 0, sizeof(double) * static_cast<std::size_t>(n));
        const double* arow = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        const double* brow = b + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt_into(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bcol = b + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * bcol[p];
            crow[j] = acc;
        }
    }
}

// --- public ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
    }
    const int m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor c({m, n});
    matmul_into(a.data(), b.data(), c.data(), m, k, n);
    return c;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("hadamard: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor c(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (std::int64_t i = 0; i < a.size(); ++i) pc[i] = pa[i] * pb[i];
    return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor c(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("sub: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor c(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
    return c;
}

Tensor scale(const Tensor& a, double factor) {
    Tensor c(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) c[i] = a[i] * factor;
    return c;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

Tensor maxpool2(const Tensor& x, std::vector<std::int64_t>* argmax_out) {
    if (x.rank() != 3) {
        throw ShapeError("maxpool2: expected rank-3 h×w×c map, got " + x.shape_str());
    }
    const int h = x.extent(0), w = x.extent(1), c = x.extent(2);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("maxpool2: spatial extents must be even, got " + x.shape_str());
    }
    const int oh = h / 2, ow = w / 2;
    Tensor y({oh, ow, c});
    if (argmax_out) argmax_out->assign(static_cast<std::size_t>(y.size()), 0);
    const double* px = x.data();
    double* py = y.data();
    for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
            for (int k = 0; k < c; ++k) {
                double best = -std::numeric_limits<double>::infinity();
                std::int64_t best_idx = 0;
                for (int di = 0; di < 2; ++di) {
                    for (int dj = 0; dj < 2; ++dj) {
                        const std::int64_t idx =
                            ((static_cast<std::int64_t>(2 * i + di) * w) + (2 * j + dj)) * c + k;
                        if (px[idx] > best) {
                            best = px[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::int64_t out_idx = (static_cast<std::int64_t>(i) * ow + j) * c + k;
                py[out_idx] = best;
                if (argmax_out) (*argmax_out)[static_cast<std::size_t>(out_idx)] = best_idx;
            }
        }
    }
    return y;
}

Tensor im2col(const Tensor& input, int kh, int kw, int stride, int pad, int out_h, int out_w) {
    const int h = input.extent(0), w = input.extent(1), cin = input.extent(2);
    const int patch = kh * kw * cin;
    Tensor cols({out_h * out_w, patch});
    const double* src = input.data();
    double* dst = cols.data();
    for (int oi = 0; oi < out_h; ++oi) {
        for (int oj = 0; oj < out_w; ++oj) {
            double* row = dst + (static_cast<std::size_t>(oi) * out_w + oj) * patch;
            for (int p = 0; p < kh; ++p) {
                const int ii = oi * stride - pad + p;
                for (int q = 0; q < kw; ++q) {
                    const int jj = oj * stride - pad + q;
                    double* cell = row + (static_cast<std::size_t>(p) * kw + q) * cin;
                    if (ii < 0 || ii >= h || jj < 0 || jj >= w) {
                        std::memset(cell, 0, sizeof(double) * static_cast<std::size_t>(cin));
                    } else {
                        const double* s = src + (static_cast<std::size_t>(ii) * w + jj) * cin;
                        std::memcpy(cell, s, sizeof(double) * static_cast<std::size_t>(cin));
                    }
                }
            }
        }
    }
    return cols;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad) {
    if (input.rank() != 3 || kernels.rank() != 4) {
        throw ShapeError("conv2d: expected h×w×cin input and kh×kw×cin×cout kernels, got " +
                         input.shape_str() + " and " + kernels.shape_str());
    }
    const int h = input.extent(0), w = input.extent(1), cin = input.extent(2);
    const int kh = kernels.extent(0), kw = kernels.extent(1);
    const int kcin = kernels.extent(2), cout = kernels.extent(3);
    if (kcin != cin) {
        throw ShapeError("conv2d: input channels " + std::to_string(cin) +
                         " do not match kernel channels " + std::to_string(kcin));
    }
    if (kh % 2 == 0 || kw % 2 == 0) {
        throw ShapeError("conv2d: kernel extents must be odd, got " + kernels.shape_str());
    }
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    const int num_h = h + 2 * pad - kh;
    const int num_w = w + 2 * pad - kw;
    if (num_h < 0 || num_w < 0 || num_h % stride != 0 || num_w % stride != 0) {
        throw ShapeError("conv2d: output extent not integral for input " + input.shape_str() +
                         ", kernel " + kernels.shape_str() + ", stride " + std::to_string(stride) +
                         ", pad " + std::to_string(pad));
    }
    const int oh = num_h / stride + 1;
    const int ow = num_w / stride + 1;

    // Patch rows times flattened kernels; kernel layout kh×kw×cin×cout is
    // already (patch, cout) when viewed as a matrix.
    Tensor cols = im2col(input, kh, kw, stride, pad, oh, ow);
    Tensor out({oh, ow, cout});
    matmul_into(cols.data(), kernels.data(), out.data(), oh * ow, kh * kw * cin, cout);
    return out;
}

Tensor sum_over_spatial(const Tensor& x) {
    if (x.rank() != 3) {
        throw ShapeError("sum_over_spatial: expected rank-3 h×w×d map, got " + x.shape_str());
    }
    const int d = x.extent(2);
    Tensor out({d});
    const double* px = x.data();
    const std::int64_t locations = static_cast<std::int64_t>(x.extent(0)) * x.extent(1);
    for (std::int64_t loc = 0; loc < locations; ++loc) {
        const double* row = px + loc * d;
        for (int k = 0; k < d; ++k) out[k] += row[k];
    }
    return out;
}

Tensor sum_rows(const Tensor& x) {
    if (x.rank() != 2) {
        throw ShapeError("sum_rows: expected rank-2 matrix, got " + x.shape_str());
    }
    const int n = x.extent(0), d = x.extent(1);
    Tensor out({d});
    const double* px = x.data();
    for (int i = 0; i < n; ++i) {
        const double* row = px + static_cast<std::size_t>(i) * d;
        for (int k = 0; k < d; ++k) out[k] += row[k];
    }
    return out;
}

double sum_all(const Tensor& x) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
    return acc;
}

double max_rel_error(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_rel_error: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    double max_diff = 0.0;
    double scale = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(a[i] - b[i]));
        scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    }
    if (max_diff == 0.0) return 0.0;
    return scale > 0.0 ? max_diff / scale : std::numeric_limits<double>::infinity();
}

} // namespace hbp
