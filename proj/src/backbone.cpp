#include "hbp/backbone.hpp"

#include <cmath>

namespace hbp {

void BackboneConfig::validate() const {
    if (input_size < 4) throw ShapeError("backbone: input_size must be at least 4");
    if (tap_channels <= 0) throw ShapeError("backbone: tap_channels must be positive");
    int res = input_size;
    for (const Stage& s : stem) {
        if (s.channels <= 0) throw ShapeError("backbone: stem channels must be positive");
        if (s.maxpool) {
            if (res % 2 != 0) {
                throw ShapeError("backbone: maxpool stage at odd resolution " + std::to_string(res));
            }
            res /= 2;
        }
    }
    if (res < 1) throw ShapeError("backbone: stem downsamples below 1×1");
}

int BackboneConfig::tap_resolution() const {
    int res = input_size;
    for (const Stage& s : stem) {
        if (s.maxpool) res /= 2;
    }
    return res;
}

std::vector<int> BackboneConfig::stage_inputs() const {
    std::vector<int> inputs;
    int channels = 3;
    for (const Stage& s : stem) {
        inputs.push_back(channels);
        channels = s.channels;
    }
    for (int i = 0; i < 3; ++i) {
        inputs.push_back(channels);
        channels = tap_channels;
    }
    return inputs;
}

BackboneConfig default_desk_config() {
    BackboneConfig config;
    config.input_size = 32;
    config.stem = {{16, true}, {32, true}};
    config.tap_channels = 32;
    config.seed = 0x5eed0fdeULL;
    return config;
}

BackboneParams BackboneParams::init(const BackboneConfig& config) {
    config.validate();
    Rng rng(config.seed);
    BackboneParams params;
    const std::vector<int> inputs = config.stage_inputs();
    for (int i = 0; i < config.stage_count(); ++i) {
        const int cin = inputs[static_cast<std::size_t>(i)];
        const int cout = i < static_cast<int>(config.stem.size())
                             ? config.stem[static_cast<std::size_t>(i)].channels
                             : config.tap_channels;
        const double scale = std::sqrt(6.0 / (9.0 * cin + 9.0 * cout));
        params.kernels.push_back(Tensor::uniform({3, 3, cin, cout}, -scale, scale, rng));
    }
    return params;
}

void BackboneParams::validate(const BackboneConfig& config) const {
    if (static_cast<int>(kernels.size()) != config.stage_count()) {
        throw ShapeError("backbone: expected " + std::to_string(config.stage_count()) +
                         " kernel tensors, got " + std::to_string(kernels.size()));
    }
    const std::vector<int> inputs = config.stage_inputs();
    for (int i = 0; i < config.stage_count(); ++i) {
        const Tensor& k = kernels[static_cast<std::size_t>(i)];
        const int cout = i < static_cast<int>(config.stem.size())
                             ? config.stem[static_cast<std::size_t>(i)].channels
                             : config.tap_channels;
        const std::vector<int> want{3, 3, inputs[static_cast<std::size_t>(i)], cout};
        if (k.shape() != want) {
            throw ShapeError("backbone: stage " + std::to_string(i) + " kernel is " +
                             k.shape_str() + ", expected " + shape_str(want));
        }
    }
}

std::vector<std::string> backbone_param_names(const BackboneConfig& config) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < config.stem.size(); ++i) {
        names.push_back("backbone.stem" + std::to_string(i));
    }
    for (int i = 0; i < 3; ++i) {
        names.push_back("backbone.tap" + std::to_string(i));
    }
    return names;
}

namespace {

void check_image(const Tensor& image, const BackboneConfig& config) {
    if (image.rank() != 3 || image.extent(2) != 3) {
        throw ShapeError("backbone: expected H×W×3 image, got " + image.shape_str());
    }
    if (image.extent(0) != config.input_size || image.extent(1) != config.input_size) {
        throw ShapeError("backbone: image " + image.shape_str() + " does not match input_size " +
                         std::to_string(config.input_size));
    }
}

} // namespace

std::array<Tensor, 3> backbone_forward(const Tensor& image, const BackboneConfig& config,
                                       const BackboneParams& params) {
    config.validate();
    params.validate(config);
    check_image(image, config);

    Tensor x = image;
    std::size_t stage = 0;
    for (const BackboneConfig::Stage& s : config.stem) {
        x = relu(conv2d(x, params.kernels[stage++], 1, 1));
        if (s.maxpool) x = maxpool2(x);
    }
    std::array<Tensor, 3> taps;
    for (int i = 0; i < 3; ++i) {
        x = relu(conv2d(x, params.kernels[stage++], 1, 1));
        taps[static_cast<std::size_t>(i)] = x;
    }
    return taps;
}

std::array<ValueId, 3> backbone_forward_node(Tape& tape, ValueId image,
                                             const BackboneConfig& config,
                                             const std::vector<ValueId>& kernel_ids) {
    if (static_cast<int>(kernel_ids.size()) != config.stage_count()) {
        throw ShapeError("backbone: expected " + std::to_string(config.stage_count()) +
                         " kernel ids, got " + std::to_string(kernel_ids.size()));
    }
    ValueId x = image;
    std::size_t stage = 0;
    for (const BackboneConfig::Stage& s : config.stem) {
        x = tape.relu(tape.conv2d(x, kernel_ids[stage++], 1, 1));
        if (s.maxpool) x = tape.maxpool2(x);
    }
    std::array<ValueId, 3> taps{};
    for (int i = 0; i < 3; ++i) {
        x = tape.relu(tape.conv2d(x, kernel_ids[stage++], 1, 1));
        taps[static_cast<std::size_t>(i)] = x;
    }
    return taps;
}

} // namespace hbp
