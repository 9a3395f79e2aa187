#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hbp/errors.hpp"
#include "hbp/rng.hpp"

namespace hbp {

/// Dense n-dimensional array of doubles, row-major with the last axis
/// fastest-varying. For h×w×c feature maps that makes the c-vector at one
/// spatial location a contiguous slice. Shape is fixed at construction;
/// every operation below returns a fresh value, so tensors are safe to
/// share read-only across threads.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    static Tensor uniform(std::vector<int> shape, double lo, double hi, Rng& rng);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double& at(int i, int j, int k) {
        return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    double at(int i, int j, int k) const {
        return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    double& at(int i, int j, int k, int l) {
        return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    double at(int i, int j, int k, int l) const {
        return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    /// Same data, new shape; element counts must agree.
    Tensor reshaped(std::vector<int> shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);
std::int64_t shape_size(const std::vector<int>& shape);

// --- primitive kernels ----------------------------------------------------
// All of these validate shapes and throw ShapeError naming the offenders.
// No broadcasting anywhere: mismatched shapes are bugs, not conveniences.

/// c[i][j] = sum_p a[i][p] * b[p][j]
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise product of identically shaped tensors.
Tensor hadamard(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& x);

/// 2×2 max pooling with stride 2 on an h×w×c map; h and w must be even.
/// argmax_out, when non-null, receives the flat input index of each output
/// cell's winner (ties go to the first-scanned, i.e. lowest, index).
Tensor maxpool2(const Tensor& x, std::vector<std::int64_t>* argmax_out = nullptr);

/// Cross-correlation of an h×w×cin map with kh×kw×cin×cout kernels, zero
/// padded. kh and kw must be odd and the output extents integral.
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad);

/// out[k] = sum_{i,j} x[i][j][k] for a rank-3 h×w×d map.
Tensor sum_over_spatial(const Tensor& x);

/// Row sum of an n×d matrix: out[k] = sum_i x[i][k].
Tensor sum_rows(const Tensor& x);

/// Scalar total of all elements.
double sum_all(const Tensor& x);

/// Largest elementwise |a−b| scaled by the largest magnitude present in
/// either tensor. Comparing whole vectors against one scale avoids blowing
/// up on coordinates that happen to sit near zero.
double max_rel_error(const Tensor& a, const Tensor& b);

// Unchecked inner loops shared by the kernels above and the backward passes.
// c must hold m*n doubles and is overwritten.
void matmul_into(const double* a, const double* b, double* c, int m, int k, int n);
// c += a^T b with a m×k, b m×n, c k×n.
void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n);
// c = a b^T with a m×k, b n×k, c m×n.
void matmul_nt_into(const double* a, const double* b, double* c, int m, int k, int n);

// im2col for conv2d: rows are output locations, columns kh*kw*cin patch
// entries, zeros where the patch hangs off the input.
Tensor im2col(const Tensor& input, int kh, int kw, int stride, int pad, int out_h, int out_w);

} // namespace hbp
