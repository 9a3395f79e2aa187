#pragma once

#include "hbp/autodiff.hpp"
#include "hbp/rng.hpp"
#include "hbp/tensor.hpp"

namespace hbp {

/// Parameters of a factorized bilinear head over one or two feature maps:
/// projections U, V ∈ c×d and classifier P ∈ d×o. The same struct serves the
/// single-layer head (both projections applied to one map) and the
/// cross-layer head (one projection per map).
struct FbpParams {
    Tensor U;  // c×d
    Tensor V;  // c×d
    Tensor P;  // d×o
    int c = 0;
    int d = 0;
    int o = 0;

    static FbpParams init(int c, int d, int o, Rng& rng);
    void validate() const;
};

/// Parameters of the three-layer hierarchical head: per-layer projections
/// U, V, S ∈ c×d shared across every pair the layer joins, and one
/// classifier P ∈ (3d)×o over the concatenated pair blocks.
struct HbpParams {
    Tensor U;  // c×d, layer x
    Tensor V;  // c×d, layer y
    Tensor S;  // c×d, layer z
    Tensor P;  // (3d)×o
    int c = 0;
    int d = 0;
    int o = 0;

    static HbpParams init(int c, int d, int o, Rng& rng);
    void validate() const;
};

/// Pair block order in every concatenated interaction vector: x∘y first,
/// then x∘z, then y∘z. Checkpoints depend on this order staying fixed.
inline constexpr int kHbpPairCount = 3;

/// Interaction vector of two local descriptors: (Aᵀx) ∘ (Bᵀy).
Tensor interaction(const Tensor& x, const Tensor& y, const Tensor& A, const Tensor& B);

/// Signed square root followed by L2 normalization; the zero vector maps to
/// itself. Applied per pooled block before classification.
Tensor normalize_signed_sqrt_l2(const Tensor& v);

/// Per-location projected interactions of two h×w×c maps, summed over all
/// locations: sum_loc (Uᵀx_loc ∘ Vᵀy_loc), a length-d vector.
Tensor pooled_interaction(const Tensor& X, const Tensor& Y, const Tensor& U, const Tensor& V);

/// Single-layer head: scores Pᵀ·normalize(sum_loc Uᵀx ∘ Vᵀx).
Tensor fbp_forward(const Tensor& X, const FbpParams& params, bool normalize = true);

/// Cross-layer head over two maps of identical shape.
Tensor cbp_forward(const Tensor& X, const Tensor& Y, const FbpParams& params, bool normalize = true);

/// Hierarchical head over three maps: the three pairwise pooled interaction
/// blocks, each normalized independently, concatenated in fixed order and
/// classified by P.
Tensor hbp_forward(const Tensor& X, const Tensor& Y, const Tensor& Z, const HbpParams& params,
                   bool normalize = true);

/// Un-factorized reference: materializes W_j = sum_k P[k][j]·U[:,k]V[:,k]ᵀ
/// and evaluates z_j = sum_loc x_locᵀ W_j y_loc directly. O(o·c²) per
/// location, so inputs are capped at c ≤ 32, d ≤ 64. This is the test
/// oracle for the factorized heads; it must never share their code path.
Tensor full_bilinear_oracle(const Tensor& X, const Tensor& Y, const Tensor& U, const Tensor& V,
                            const Tensor& P);

/// Factorization-equivalence suite: n random instances with c ≤ 8, d ≤ 16,
/// o ≤ 4, h = w ≤ 4, comparing cbp_forward (normalization off) against
/// full_bilinear_oracle. Returns the worst relative error seen.
/// fault_scale multiplies U on the factorized side only; a value other than
/// 1 is the test hook that must make the suite fail.
double factorization_equivalence_max_err(int n_instances, std::uint64_t seed,
                                         double fault_scale = 1.0);

// --- tape builders -----------------------------------------------------------
// Same math as the eager heads, recorded for training. Callers supply leaf
// ids for maps and parameters; the builders add only registered ops, so the
// recorded forward value equals the eager head bit for bit.

/// Pooled, optionally normalized interaction block of two maps.
ValueId pooled_interaction_node(Tape& tape, ValueId x_map, ValueId y_map, ValueId U, ValueId V,
                                bool normalize);

/// FBP/CBP head; for FBP pass the same map id twice.
ValueId cbp_head(Tape& tape, ValueId x_map, ValueId y_map, ValueId U, ValueId V, ValueId P,
                 bool normalize);

/// HBP head over three map ids.
ValueId hbp_head(Tape& tape, ValueId x_map, ValueId y_map, ValueId z_map, ValueId U, ValueId V,
                 ValueId S, ValueId P, bool normalize);

} // namespace hbp
