#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hbp/backbone.hpp"
#include "hbp/model.hpp"

using namespace hbp;

TEST_CASE("default desk config produces three 8x8x32 taps") {
    const BackboneConfig config = default_desk_config();
    CHECK(config.tap_channels == 32);
    CHECK(config.tap_resolution() == 8);
    int pools = 0;
    for (const auto& s : config.stem) pools += s.maxpool ? 1 : 0;
    CHECK((config.input_size >> pools) == 8);

    const BackboneConfig again = default_desk_config();
    CHECK(again.input_size == config.input_size);
    CHECK(again.tap_channels == config.tap_channels);
    CHECK(again.seed == config.seed);
    REQUIRE(again.stem.size() == config.stem.size());
    for (std::size_t i = 0; i < config.stem.size(); ++i) {
        CHECK(again.stem[i].channels == config.stem[i].channels);
        CHECK(again.stem[i].maxpool == config.stem[i].maxpool);
    }

    const BackboneParams params = BackboneParams::init(config);
    Rng rng(1);
    const Tensor image = Tensor::uniform({32, 32, 3}, 0, 1, rng);
    const auto taps = backbone_forward(image, config, params);
    for (const Tensor& tap : taps) {
        CHECK(tap.shape() == std::vector<int>{8, 8, 32});
    }
}

TEST_CASE("zero image with zero kernels gives all-zero maps") {
    const BackboneConfig config = default_desk_config();
    BackboneParams params = BackboneParams::init(config);
    for (Tensor& k : params.kernels) k = Tensor::zeros(k.shape());
    const auto taps = backbone_forward(Tensor({32, 32, 3}), config, params);
    for (const Tensor& tap : taps) {
        for (std::int64_t i = 0; i < tap.size(); ++i) CHECK(tap[i] == 0.0);
    }
}

TEST_CASE("input size mismatch is rejected") {
    const BackboneConfig config = default_desk_config();
    const BackboneParams params = BackboneParams::init(config);
    CHECK_THROWS_AS(backbone_forward(Tensor({16, 16, 3}), config, params), ShapeError);
    CHECK_THROWS_AS(backbone_forward(Tensor({32, 32, 1}), config, params), ShapeError);
}

TEST_CASE("recorded forward equals eager forward") {
    const BackboneConfig config = default_desk_config();
    const BackboneParams params = BackboneParams::init(config);
    Rng rng(2);
    const Tensor image = Tensor::uniform({32, 32, 3}, 0, 1, rng);
    const auto eager = backbone_forward(image, config, params);

    Tape tape;
    std::vector<ValueId> kernel_ids;
    const auto names = backbone_param_names(config);
    for (std::size_t i = 0; i < names.size(); ++i) {
        kernel_ids.push_back(tape.param(names[i], params.kernels[i]));
    }
    const auto taps = backbone_forward_node(tape, tape.constant(image), config, kernel_ids);
    for (int t = 0; t < 3; ++t) {
        const Tensor& recorded = tape.value(taps[static_cast<std::size_t>(t)]);
        const Tensor& plain = eager[static_cast<std::size_t>(t)];
        REQUIRE(recorded.shape() == plain.shape());
        for (std::int64_t i = 0; i < plain.size(); ++i) CHECK(recorded[i] == plain[i]);
    }
}

TEST_CASE("conv+relu stem is positively homogeneous") {
    const BackboneConfig config = default_desk_config();
    const BackboneParams params = BackboneParams::init(config);
    Rng rng(3);
    const Tensor image = Tensor::uniform({32, 32, 3}, 0, 0.5, rng);
    const auto base = backbone_forward(image, config, params);
    const auto doubled = backbone_forward(scale(image, 2.0), config, params);
    for (int t = 0; t < 3; ++t) {
        CHECK(max_rel_error(doubled[static_cast<std::size_t>(t)],
                            scale(base[static_cast<std::size_t>(t)], 2.0)) < 1e-12);
    }
}

TEST_CASE("three taps always share shape") {
    BackboneConfig config;
    config.input_size = 16;
    config.stem = {{6, true}};
    config.tap_channels = 5;
    config.seed = 9;
    const BackboneParams params = BackboneParams::init(config);
    Rng rng(4);
    const auto taps = backbone_forward(Tensor::uniform({16, 16, 3}, 0, 1, rng), config, params);
    CHECK(taps[0].shape() == taps[1].shape());
    CHECK(taps[1].shape() == taps[2].shape());
    CHECK(taps[0].shape() == std::vector<int>{8, 8, 5});
}

TEST_CASE("backbone gradients pass gradcheck on a 16x16 input") {
    GradcheckSettings settings;
    const GradcheckReport report = gradcheck_composite(5, /*normalize=*/true, settings, 0);
    if (!report.pass()) MESSAGE(report.summary());
    CHECK(report.pass());
}
