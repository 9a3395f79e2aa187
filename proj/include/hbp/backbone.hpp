#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hbp/autodiff.hpp"
#include "hbp/rng.hpp"
#include "hbp/tensor.hpp"

namespace hbp {

/// Architecture of the feature extractor: a stem of conv3×3+ReLU stages
/// (each optionally followed by 2×2 max pooling) and then exactly three
/// consecutive conv3×3+ReLU stages at the final resolution whose outputs
/// are the tapped feature maps. All three taps share h, w and c by
/// construction, which the pairwise pooling heads require.
struct BackboneConfig {
    struct Stage {
        int channels = 0;
        bool maxpool = false;
    };

    int input_size = 32;          // square RGB input
    std::vector<Stage> stem;      // stages before the taps
    int tap_channels = 32;        // channels of each of the three taps
    std::uint64_t seed = 0;       // kernel initialization stream

    void validate() const;
    /// Spatial extent of the tapped maps.
    int tap_resolution() const;
    /// Channel counts entering each stage, stem first, then the three taps.
    std::vector<int> stage_inputs() const;
    int stage_count() const { return static_cast<int>(stem.size()) + 3; }
};

/// The 32×32 RGB → three 8×8×32 taps configuration used throughout the
/// tests and as the CLI default. Fixed so results are reproducible.
BackboneConfig default_desk_config();

/// One conv3×3 kernel tensor per stage (stem stages first, then the three
/// tap stages). No biases anywhere, which keeps conv+ReLU positively
/// homogeneous and the parameter ledger small.
struct BackboneParams {
    std::vector<Tensor> kernels;

    static BackboneParams init(const BackboneConfig& config);
    void validate(const BackboneConfig& config) const;
};

/// Names of the backbone parameters in checkpoint files:
/// "backbone.stem<i>" then "backbone.tap<i>" for i in 0..2.
std::vector<std::string> backbone_param_names(const BackboneConfig& config);

/// Eager forward pass: image H×W×3 with values in [0,1] to the three tapped
/// ReLU outputs.
std::array<Tensor, 3> backbone_forward(const Tensor& image, const BackboneConfig& config,
                                       const BackboneParams& params);

/// Tape-recorded forward pass over the given image and parameter leaf ids
/// (ordered as backbone_param_names). Returns the three tap ids.
std::array<ValueId, 3> backbone_forward_node(Tape& tape, ValueId image,
                                             const BackboneConfig& config,
                                             const std::vector<ValueId>& kernel_ids);

} // namespace hbp
