#pragma once

#include <map>
#include <string>

#include "hbp/backbone.hpp"
#include "hbp/pooling.hpp"

namespace hbp {

enum class Variant { fbp, cbp, hbp };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

/// A trainable classifier: the convolutional feature extractor plus one
/// bilinear head. Which taps feed the head is fixed by the variant:
/// fbp pairs the last tap with itself, cbp crosses the last two taps, and
/// hbp crosses all three pairwise.
struct Model {
    BackboneConfig config;
    BackboneParams backbone;
    Variant variant = Variant::hbp;
    bool normalize = true;
    int c = 0;  // tap channels
    int d = 0;  // projection dimension
    int o = 0;  // classes
    Tensor U, V, S, P;  // S is empty unless variant == hbp

    void validate() const;

    /// Live views of every trainable tensor keyed by checkpoint name.
    /// Head entries are "U", "V", "S", "P"; backbone entries follow
    /// backbone_param_names().
    std::map<std::string, Tensor*> params();
    std::map<std::string, const Tensor*> params() const;
    /// The subset updated during stage-1 training: just the classifier.
    static bool is_classifier_param(const std::string& name) { return name == "P"; }
};

Model init_model(const BackboneConfig& config, Variant variant, int d, int o, bool normalize,
                 std::uint64_t seed);

/// Eager class scores for one image.
Tensor model_scores(const Model& model, const Tensor& image);

/// The three tapped feature maps for one image.
std::array<Tensor, 3> model_feature_maps(const Model& model, const Tensor& image);

/// Head scores from precomputed feature maps (eager).
Tensor head_scores(const Model& model, const std::array<Tensor, 3>& taps);

/// Records image → scores on a tape, creating one differentiable leaf per
/// trainable parameter (named as in params()). Returns the scores id.
ValueId model_scores_node(Tape& tape, const Model& model, const Tensor& image);

// Checkpoints live in the named-tensor container: a "meta" entry encoding
// (format version, variant, c, d, o, normalize flag, backbone layout)
// followed by the parameter tensors under their params() names.
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

/// Finite-difference check of the full backbone+HBP composite at gradcheck
/// scale: 16×16 input, stem (4,pool)(8,pool), 4×4×8 taps, d=3, o=2, one
/// random image, every parameter coordinate checked.
GradcheckReport gradcheck_composite(std::uint64_t seed, bool normalize,
                                    const GradcheckSettings& settings = {}, int threads = 0);

} // namespace hbp
