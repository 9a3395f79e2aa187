#include "hbp/pooling.hpp"

#include <cmath>

namespace hbp {

namespace {

void require_map(const Tensor& X, const char* which) {
    if (X.rank() != 3) {
        throw ShapeError(std::string(which) + ": expected h×w×c feature map, got " + X.shape_str());
    }
}

void require_same_map_shape(const Tensor& X, const Tensor& Y, const char* op) {
    if (!X.same_shape(Y)) {
        throw ShapeError(std::string(op) + ": feature maps must share h, w and c, got " +
                         X.shape_str() + " vs " + Y.shape_str());
    }
}

void require_channels(const Tensor& X, int c, const char* op) {
    if (X.extent(2) != c) {
        throw ShapeError(std::string(op) + ": map channels " + std::to_string(X.extent(2)) +
                         " do not match params c=" + std::to_string(c));
    }
}

} // namespace

FbpParams FbpParams::init(int c, int d, int o, Rng& rng) {
    if (c <= 0 || d <= 0 || o <= 0) throw ShapeError("FbpParams: dimensions must be positive");
    FbpParams p;
    p.c = c;
    p.d = d;
    p.o = o;
    const double proj_scale = std::sqrt(6.0 / (c + d));
    const double cls_scale = std::sqrt(6.0 / (d + o));
    p.U = Tensor::uniform({c, d}, -proj_scale, proj_scale, rng);
    p.V = Tensor::uniform({c, d}, -proj_scale, proj_scale, rng);
    p.P = Tensor::uniform({d, o}, -cls_scale, cls_scale, rng);
    return p;
}

void FbpParams::validate() const {
    if (U.shape() != std::vector<int>{c, d} || V.shape() != std::vector<int>{c, d}) {
        throw ShapeError("FbpParams: U and V must both be c×d");
    }
    if (P.shape() != std::vector<int>{d, o}) {
        throw ShapeError("FbpParams: P must be d×o, got " + P.shape_str());
    }
}

HbpParams HbpParams::init(int c, int d, int o, Rng& rng) {
    if (c <= 0 || d <= 0 || o <= 0) throw ShapeError("HbpParams: dimensions must be positive");
    HbpParams p;
    p.c = c;
    p.d = d;
    p.o = o;
    const double proj_scale = std::sqrt(6.0 / (c + d));
    const double cls_scale = std::sqrt(6.0 / (kHbpPairCount * d + o));
    p.U = Tensor::uniform({c, d}, -proj_scale, proj_scale, rng);
    p.V = Tensor::uniform({c, d}, -proj_scale, proj_scale, rng);
    p.S = Tensor::uniform({c, d}, -proj_scale, proj_scale, rng);
    p.P = Tensor::uniform({kHbpPairCount * d, o}, -cls_scale, cls_scale, rng);
    return p;
}

void HbpParams::validate() const {
    const std::vector<int> proj{c, d};
    if (U.shape() != proj || V.shape() != proj || S.shape() != proj) {
        throw ShapeError("HbpParams: U, V and S must all be c×d");
    }
    if (P.shape() != std::vector<int>{kHbpPairCount * d, o}) {
        throw ShapeError("HbpParams: P must be (3d)×o, got " + P.shape_str());
    }
}

Tensor interaction(const Tensor& x, const Tensor& y, const Tensor& A, const Tensor& B) {
    if (x.rank() != 1 || y.rank() != 1) {
        throw ShapeError("interaction: descriptors must be rank-1, got " + x.shape_str() + " and " +
                         y.shape_str());
    }
    if (A.rank() != 2 || B.rank() != 2 || !A.same_shape(B)) {
        throw ShapeError("interaction: projections must be matching c×d matrices, got " +
                         A.shape_str() + " and " + B.shape_str());
    }
    const int c = A.extent(0);
    if (x.extent(0) != c || y.extent(0) != c) {
        throw ShapeError("interaction: descriptor length " + x.shape_str() + "/" + y.shape_str() +
                         " does not match projection rows " + std::to_string(c));
    }
    Tensor px = matmul(x.reshaped({1, c}), A);
    Tensor py = matmul(y.reshaped({1, c}), B);
    return hadamard(px, py).reshaped({A.extent(1)});
}

Tensor normalize_signed_sqrt_l2(const Tensor& v) {
    Tensor s(v.shape());
    for (std::int64_t i = 0; i < v.size(); ++i) {
        s[i] = v[i] >= 0.0 ? std::sqrt(v[i]) : -std::sqrt(-v[i]);
    }
    double norm_sq = 0.0;
    for (std::int64_t i = 0; i < s.size(); ++i) norm_sq += s[i] * s[i];
    const double norm = std::sqrt(norm_sq);
    if (norm == 0.0) return s;
    for (std::int64_t i = 0; i < s.size(); ++i) s[i] /= norm;
    return s;
}

Tensor pooled_interaction(const Tensor& X, const Tensor& Y, const Tensor& U, const Tensor& V) {
    require_map(X, "pooled_interaction");
    require_same_map_shape(X, Y, "pooled_interaction");
    const int locations = X.extent(0) * X.extent(1);
    const int c = X.extent(2);
    if (U.rank() != 2 || U.extent(0) != c || !U.same_shape(V)) {
        throw ShapeError("pooled_interaction: projections " + U.shape_str() + "/" + V.shape_str() +
                         " incompatible with map channels " + std::to_string(c));
    }
    Tensor px = matmul(X.reshaped({locations, c}), U);
    Tensor py = matmul(Y.reshaped({locations, c}), V);
    return sum_rows(hadamard(px, py));
}

namespace {

Tensor classify(const Tensor& pooled, const Tensor& P) {
    const int d = pooled.extent(0);
    if (P.rank() != 2 || P.extent(0) != d) {
        throw ShapeError("classify: pooled vector length " + std::to_string(d) +
                         " does not match P " + P.shape_str());
    }
    return matmul(pooled.reshaped({1, d}), P).reshaped({P.extent(1)});
}

} // namespace

Tensor fbp_forward(const Tensor& X, const FbpParams& params, bool normalize) {
    return cbp_forward(X, X, params, normalize);
}

Tensor cbp_forward(const Tensor& X, const Tensor& Y, const FbpParams& params, bool normalize) {
    params.validate();
    require_map(X, "cbp_forward");
    require_same_map_shape(X, Y, "cbp_forward");
    require_channels(X, params.c, "cbp_forward");
    Tensor pooled = pooled_interaction(X, Y, params.U, params.V);
    if (normalize) pooled = normalize_signed_sqrt_l2(pooled);
    return classify(pooled, params.P);
}

Tensor hbp_forward(const Tensor& X, const Tensor& Y, const Tensor& Z, const HbpParams& params,
                   bool normalize) {
    params.validate();
    require_map(X, "hbp_forward");
    require_same_map_shape(X, Y, "hbp_forward");
    require_same_map_shape(X, Z, "hbp_forward");
    require_channels(X, params.c, "hbp_forward");

    Tensor block_xy = pooled_interaction(X, Y, params.U, params.V);
    Tensor block_xz = pooled_interaction(X, Z, params.U, params.S);
    Tensor block_yz = pooled_interaction(Y, Z, params.V, params.S);
    if (normalize) {
        block_xy = normalize_signed_sqrt_l2(block_xy);
        block_xz = normalize_signed_sqrt_l2(block_xz);
        block_yz = normalize_signed_sqrt_l2(block_yz);
    }

    Tensor joined({kHbpPairCount * params.d});
    for (int k = 0; k < params.d; ++k) {
        joined[k] = block_xy[k];
        joined[params.d + k] = block_xz[k];
        joined[2 * params.d + k] = block_yz[k];
    }
    return classify(joined, params.P);
}

Tensor full_bilinear_oracle(const Tensor& X, const Tensor& Y, const Tensor& U, const Tensor& V,
                            const Tensor& P) {
    require_map(X, "full_bilinear_oracle");
    require_same_map_shape(X, Y, "full_bilinear_oracle");
    const int c = X.extent(2);
    if (U.rank() != 2 || !U.same_shape(V) || U.extent(0) != c) {
        throw ShapeError("full_bilinear_oracle: projections " + U.shape_str() + "/" +
                         V.shape_str() + " incompatible with map channels " + std::to_string(c));
    }
    const int d = U.extent(1);
    if (P.rank() != 2 || P.extent(0) != d) {
        throw ShapeError("full_bilinear_oracle: P " + P.shape_str() + " incompatible with d=" +
                         std::to_string(d));
    }
    if (c > 32 || d > 64) {
        throw ShapeError("full_bilinear_oracle: oracle is capped at c<=32, d<=64, got c=" +
                         std::to_string(c) + ", d=" + std::to_string(d));
    }
    const int o = P.extent(1);
    const int h = X.extent(0), w = X.extent(1);

    Tensor scores({o});
    std::vector<double> W(static_cast<std::size_t>(c) * c);
    for (int j = 0; j < o; ++j) {
        // W_j = sum_k P[k][j] · U[:,k] V[:,k]^T, materialized.
        std::fill(W.begin(), W.end(), 0.0);
        for (int k = 0; k < d; ++k) {
            const double pkj = P.at(k, j);
            if (pkj == 0.0) continue;
            for (int a = 0; a < c; ++a) {
                const double ua = U.at(a, k) * pkj;
                for (int b = 0; b < c; ++b) {
                    W[static_cast<std::size_t>(a) * c + b] += ua * V.at(b, k);
                }
            }
        }
        double zj = 0.0;
        for (int i = 0; i < h; ++i) {
            for (int jj = 0; jj < w; ++jj) {
                const double* x_loc = X.data() + (static_cast<std::size_t>(i) * w + jj) * c;
                const double* y_loc = Y.data() + (static_cast<std::size_t>(i) * w + jj) * c;
                for (int a = 0; a < c; ++a) {
                    const double* wrow = W.data() + static_cast<std::size_t>(a) * c;
                    double acc = 0.0;
                    for (int b = 0; b < c; ++b) acc += wrow[b] * y_loc[b];
                    zj += x_loc[a] * acc;
                }
            }
        }
        scores[j] = zj;
    }
    return scores;
}

double factorization_equivalence_max_err(int n_instances, std::uint64_t seed, double fault_scale) {
    Rng rng(seed);
    double worst = 0.0;
    for (int i = 0; i < n_instances; ++i) {
        const int c = 1 + rng.uniform_int(8);
        const int d = 1 + rng.uniform_int(16);
        const int o = 1 + rng.uniform_int(4);
        const int hw = 1 + rng.uniform_int(4);
        FbpParams params;
        params.c = c;
        params.d = d;
        params.o = o;
        params.U = Tensor::uniform({c, d}, -1.0, 1.0, rng);
        params.V = Tensor::uniform({c, d}, -1.0, 1.0, rng);
        params.P = Tensor::uniform({d, o}, -1.0, 1.0, rng);
        const Tensor X = Tensor::uniform({hw, hw, c}, -1.0, 1.0, rng);
        const Tensor Y = Tensor::uniform({hw, hw, c}, -1.0, 1.0, rng);
        const Tensor reference = full_bilinear_oracle(X, Y, params.U, params.V, params.P);
        if (fault_scale != 1.0) params.U = scale(params.U, fault_scale);
        const Tensor factorized = cbp_forward(X, Y, params, /*normalize=*/false);
        worst = std::max(worst, max_rel_error(factorized, reference));
    }
    return worst;
}

// --- tape builders -----------------------------------------------------------

ValueId pooled_interaction_node(Tape& tape, ValueId x_map, ValueId y_map, ValueId U, ValueId V,
                                bool normalize) {
    const Tensor& X = tape.value(x_map);
    require_map(X, "pooled_interaction_node");
    const int locations = X.extent(0) * X.extent(1);
    const int c = X.extent(2);
    ValueId px = tape.matmul(tape.reshape(x_map, {locations, c}), U);
    ValueId py = tape.matmul(tape.reshape(y_map, {locations, c}), V);
    ValueId pooled = tape.sum_spatial(tape.hadamard(px, py));
    if (normalize) pooled = tape.l2_normalize(tape.signed_sqrt(pooled));
    return pooled;
}

ValueId cbp_head(Tape& tape, ValueId x_map, ValueId y_map, ValueId U, ValueId V, ValueId P,
                 bool normalize) {
    ValueId pooled = pooled_interaction_node(tape, x_map, y_map, U, V, normalize);
    const int d = tape.value(pooled).extent(0);
    ValueId row = tape.reshape(pooled, {1, d});
    ValueId scores = tape.matmul(row, P);
    return tape.reshape(scores, {tape.value(P).extent(1)});
}

ValueId hbp_head(Tape& tape, ValueId x_map, ValueId y_map, ValueId z_map, ValueId U, ValueId V,
                 ValueId S, ValueId P, bool normalize) {
    ValueId block_xy = pooled_interaction_node(tape, x_map, y_map, U, V, normalize);
    ValueId block_xz = pooled_interaction_node(tape, x_map, z_map, U, S, normalize);
    ValueId block_yz = pooled_interaction_node(tape, y_map, z_map, V, S, normalize);
    const std::vector<ValueId> blocks = {block_xy, block_xz, block_yz};
    ValueId joined = tape.concat(blocks);
    const int dim = static_cast<int>(tape.value(joined).size());
    ValueId scores = tape.matmul(tape.reshape(joined, {1, dim}), P);
    return tape.reshape(scores, {tape.value(P).extent(1)});
}

} // namespace hbp
