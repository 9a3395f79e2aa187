#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hbp/pooling.hpp"
#include "oracles.hpp"

using namespace hbp;

namespace {

Tensor row_block(const Tensor& P, int first_row, int rows) {
    const int o = P.extent(1);
    Tensor block({rows, o});
    for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < o; ++j) block.at(r, j) = P.at(first_row + r, j);
    }
    return block;
}

} // namespace

TEST_CASE("interaction examples") {
    const Tensor eye({2, 2}, {1, 0, 0, 1});
    const Tensor x({2}, {1, 2});
    const Tensor y({2}, {3, 4});
    CHECK(interaction(x, y, eye, eye).values() == std::vector<double>{3, 8});

    const Tensor zero({2});
    CHECK(interaction(zero, y, eye, eye).values() == std::vector<double>{0, 0});
    CHECK(interaction(x, zero, eye, eye).values() == std::vector<double>{0, 0});

    CHECK_THROWS_AS(interaction(Tensor({3}), y, eye, eye), ShapeError);
}

TEST_CASE("interaction matches the coordinate-loop reference") {
    Rng rng(31);
    const Tensor A = Tensor::uniform({5, 7}, -1, 1, rng);
    const Tensor B = Tensor::uniform({5, 7}, -1, 1, rng);
    const Tensor x = Tensor::uniform({5}, -1, 1, rng);
    const Tensor y = Tensor::uniform({5}, -1, 1, rng);
    const Tensor got = interaction(x, y, A, B);
    const Tensor want = testing::interaction_reference(x, y, A, B);
    CHECK(max_rel_error(got, want) < 1e-12);
}

TEST_CASE("interaction swap symmetry is exact") {
    Rng rng(37);
    const Tensor A = Tensor::uniform({4, 6}, -1, 1, rng);
    const Tensor B = Tensor::uniform({4, 6}, -1, 1, rng);
    const Tensor x = Tensor::uniform({4}, -1, 1, rng);
    const Tensor y = Tensor::uniform({4}, -1, 1, rng);
    const Tensor xy = interaction(x, y, A, B);
    const Tensor yx = interaction(y, x, B, A);
    for (std::int64_t i = 0; i < xy.size(); ++i) CHECK(xy[i] == yx[i]);
}

TEST_CASE("normalize examples") {
    CHECK(normalize_signed_sqrt_l2(Tensor({4})).values() == std::vector<double>{0, 0, 0, 0});
    CHECK(normalize_signed_sqrt_l2(Tensor({1}, {4.0})).values() == std::vector<double>{1.0});
    const Tensor out = normalize_signed_sqrt_l2(Tensor({2}, {-9.0, 16.0}));
    CHECK(out[0] == doctest::Approx(-0.6).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("fbp_forward examples") {
    FbpParams params;
    params.c = 2;
    params.d = 2;
    params.o = 1;
    params.U = Tensor({2, 2}, {1, 0, 0, 1});
    params.V = Tensor({2, 2}, {1, 0, 0, 1});
    params.P = Tensor({2, 1}, {1, 1});

    const Tensor X({1, 1, 2}, {1, 2});
    CHECK(fbp_forward(X, params, /*normalize=*/false).values() == std::vector<double>{5.0});

    const Tensor zero({2, 3, 2});
    CHECK(fbp_forward(zero, params, /*normalize=*/true).values() == std::vector<double>{0.0});

    CHECK_THROWS_AS(fbp_forward(Tensor({1, 1, 3}), params, true), ShapeError);
}

TEST_CASE("cbp reduces to fbp when both maps coincide") {
    Rng rng(41);
    FbpParams params = FbpParams::init(4, 5, 3, rng);
    const Tensor X = Tensor::uniform({3, 3, 4}, -1, 1, rng);
    const Tensor fbp = fbp_forward(X, params, true);
    const Tensor cbp = cbp_forward(X, X, params, true);
    for (std::int64_t i = 0; i < fbp.size(); ++i) CHECK(fbp[i] == cbp[i]);

    const Tensor zero({3, 3, 4});
    CHECK(cbp_forward(X, zero, params, true).values() == std::vector<double>{0, 0, 0});
    CHECK_THROWS_AS(cbp_forward(X, Tensor({2, 2, 4}), params, true), ShapeError);
}

TEST_CASE("full bilinear oracle hand cases") {
    const Tensor X({1, 1, 1}, {2.0});
    const Tensor Y({1, 1, 1}, {3.0});
    const Tensor U({1, 1}, {1.0});
    const Tensor V({1, 1}, {1.0});
    const Tensor P({1, 1}, {1.0});
    CHECK(full_bilinear_oracle(X, Y, U, V, P).values() == std::vector<double>{6.0});

    Rng rng(43);
    const Tensor X2 = Tensor::uniform({2, 2, 3}, -1, 1, rng);
    const Tensor Y2 = Tensor::uniform({2, 2, 3}, -1, 1, rng);
    const Tensor U2 = Tensor::uniform({3, 4}, -1, 1, rng);
    const Tensor V2 = Tensor::uniform({3, 4}, -1, 1, rng);
    const Tensor Pzero({4, 2});
    CHECK(full_bilinear_oracle(X2, Y2, U2, V2, Pzero).values() == std::vector<double>{0, 0});

    CHECK_THROWS_AS(full_bilinear_oracle(X2, Y2, Tensor::uniform({3, 65}, -1, 1, rng),
                                         Tensor::uniform({3, 65}, -1, 1, rng), Tensor({65, 1})),
                    ShapeError);
}

TEST_CASE("factorized heads agree with the materialized-W oracle") {
    CHECK(factorization_equivalence_max_err(50, 2024) < 1e-9);
}

TEST_CASE("the injected-fault hook breaks the equivalence") {
    CHECK(factorization_equivalence_max_err(10, 2024, 1.0 + 1e-3) > 1e-9);
}

TEST_CASE("pooling commutes with the classifier when normalization is off") {
    Rng rng(47);
    FbpParams params = FbpParams::init(3, 6, 2, rng);
    const Tensor X = Tensor::uniform({4, 2, 3}, -1, 1, rng);
    const Tensor Y = Tensor::uniform({4, 2, 3}, -1, 1, rng);
    // classify the pooled vector
    const Tensor whole = cbp_forward(X, Y, params, /*normalize=*/false);
    // classify every per-location interaction and sum the scores
    Tensor summed({params.o});
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 2; ++j) {
            Tensor x({3}), y({3});
            for (int k = 0; k < 3; ++k) {
                x[k] = X.at(i, j, k);
                y[k] = Y.at(i, j, k);
            }
            const Tensor z = interaction(x, y, params.U, params.V);
            const Tensor s = matmul(z.reshaped({1, params.d}), params.P).reshaped({params.o});
            summed = add(summed, s);
        }
    }
    CHECK(max_rel_error(whole, summed) < 1e-10);
}

TEST_CASE("hbp examples and block decomposition") {
    Rng rng(53);
    const int c = 4, d = 5, o = 3;
    HbpParams params = HbpParams::init(c, d, o, rng);
    const Tensor X = Tensor::uniform({2, 3, c}, -1, 1, rng);
    const Tensor Y = Tensor::uniform({2, 3, c}, -1, 1, rng);
    const Tensor Z = Tensor::uniform({2, 3, c}, -1, 1, rng);

    SUBCASE("all-zero maps give zero scores") {
        const Tensor zero({2, 3, c});
        const Tensor out = hbp_forward(zero, zero, zero, params, true);
        CHECK(out.values() == std::vector<double>(static_cast<std::size_t>(o), 0.0));
    }

    SUBCASE("a zero third map silences the pair blocks that contain it") {
        const Tensor zero({2, 3, c});
        for (bool normalize : {false, true}) {
            const Tensor out = hbp_forward(X, Y, zero, params, normalize);
            Tensor xy = pooled_interaction(X, Y, params.U, params.V);
            if (normalize) xy = normalize_signed_sqrt_l2(xy);
            Tensor padded({3 * d});
            for (int k = 0; k < d; ++k) padded[k] = xy[k];
            const Tensor want = matmul(padded.reshaped({1, 3 * d}), params.P).reshaped({o});
            CHECK(max_rel_error(out, want) < 1e-12);
        }
    }

    SUBCASE("matches three per-pair oracles routed through P row blocks") {
        const Tensor got = hbp_forward(X, Y, Z, params, /*normalize=*/false);
        const Tensor want =
            add(add(full_bilinear_oracle(X, Y, params.U, params.V, row_block(params.P, 0, d)),
                    full_bilinear_oracle(X, Z, params.U, params.S, row_block(params.P, d, d))),
                full_bilinear_oracle(Y, Z, params.V, params.S, row_block(params.P, 2 * d, d)));
        CHECK(max_rel_error(got, want) < 1e-9);
    }

    SUBCASE("P zeroed outside the first block reproduces cbp") {
        HbpParams masked = params;
        for (int r = d; r < 3 * d; ++r) {
            for (int j = 0; j < o; ++j) masked.P.at(r, j) = 0.0;
        }
        FbpParams pair;
        pair.c = c;
        pair.d = d;
        pair.o = o;
        pair.U = params.U;
        pair.V = params.V;
        pair.P = row_block(params.P, 0, d);
        const Tensor got = hbp_forward(X, Y, Z, masked, /*normalize=*/true);
        const Tensor want = cbp_forward(X, Y, pair, /*normalize=*/true);
        CHECK(max_rel_error(got, want) < 1e-12);
    }

    SUBCASE("scaling one map scales exactly the blocks that contain it") {
        const double alpha = 2.75;
        const Tensor Xs = scale(X, alpha);
        const Tensor xy = pooled_interaction(X, Y, params.U, params.V);
        const Tensor xy_s = pooled_interaction(Xs, Y, params.U, params.V);
        CHECK(max_rel_error(xy_s, scale(xy, alpha)) < 1e-12);
        const Tensor yz = pooled_interaction(Y, Z, params.V, params.S);
        const Tensor yz_again = pooled_interaction(Y, Z, params.V, params.S);
        for (std::int64_t i = 0; i < yz.size(); ++i) CHECK(yz[i] == yz_again[i]);
    }

    SUBCASE("output shape is [o] regardless of spatial extent") {
        for (int hw : {1, 2, 4}) {
            Rng r2(99);
            const Tensor A = Tensor::uniform({hw, hw, c}, -1, 1, r2);
            CHECK(hbp_forward(A, A, A, params, true).shape() == std::vector<int>{o});
        }
        CHECK_THROWS_AS(hbp_forward(X, Y, Tensor({1, 1, c}), params, true), ShapeError);
    }
}

TEST_CASE("recorded heads equal the eager heads bit for bit") {
    Rng rng(59);
    const int c = 3, d = 4, o = 2;
    FbpParams fparams = FbpParams::init(c, d, o, rng);
    const Tensor X = Tensor::uniform({2, 2, c}, -1, 1, rng);
    const Tensor Y = Tensor::uniform({2, 2, c}, -1, 1, rng);

    Tape tape;
    const ValueId out = cbp_head(tape, tape.constant(X), tape.constant(Y),
                                 tape.param("U", fparams.U), tape.param("V", fparams.V),
                                 tape.param("P", fparams.P), /*normalize=*/true);
    const Tensor eager = cbp_forward(X, Y, fparams, /*normalize=*/true);
    for (std::int64_t i = 0; i < eager.size(); ++i) CHECK(tape.value(out)[i] == eager[i]);

    HbpParams hparams = HbpParams::init(c, d, o, rng);
    const Tensor Z = Tensor::uniform({2, 2, c}, -1, 1, rng);
    Tape tape2;
    const ValueId out2 = hbp_head(tape2, tape2.constant(X), tape2.constant(Y), tape2.constant(Z),
                                  tape2.param("U", hparams.U), tape2.param("V", hparams.V),
                                  tape2.param("S", hparams.S), tape2.param("P", hparams.P),
                                  /*normalize=*/true);
    const Tensor eager2 = hbp_forward(X, Y, Z, hparams, /*normalize=*/true);
    for (std::int64_t i = 0; i < eager2.size(); ++i) CHECK(tape2.value(out2)[i] == eager2[i]);
}

TEST_CASE("hbp params validate the P block structure") {
    Rng rng(61);
    HbpParams params = HbpParams::init(3, 4, 2, rng);
    params.P = Tensor({4, 2});
    const Tensor X({2, 2, 3});
    CHECK_THROWS_AS(hbp_forward(X, X, X, params, true), ShapeError);
}
