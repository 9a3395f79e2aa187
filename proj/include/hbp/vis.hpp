#pragma once

#include <string>
#include <vector>

#include "hbp/model.hpp"

namespace hbp {

/// Activation heatmaps for one image. conv_maps holds, per tap feeding the
/// head, the per-location magnitude of feature activations averaged across
/// channels. project_maps holds, per interaction pair, the per-location
/// response of the sum-pooled interaction vector: the dot product of that
/// location's (un-normalized) interaction vector with the pooled one. By
/// bilinearity those responses sum to the squared norm of the pooled
/// vector over the image.
struct VisMaps {
    std::vector<int> tap_indices;     // taps behind conv_maps, 0-based
    std::vector<Tensor> conv_maps;    // h×w each
    std::vector<Tensor> project_maps; // h×w each, one per pair
};

/// Mean |activation| across channels of an h×w×c map.
Tensor conv_response_map(const Tensor& fmap);

/// Per-location dot products with the pooled interaction vector for the
/// pair (X·A, Y·B).
Tensor project_response_map(const Tensor& X, const Tensor& Y, const Tensor& A, const Tensor& B);

VisMaps compute_vis_maps(const Model& model, const Tensor& image);

/// Writes the maps as min-max normalized PGMs under outdir:
/// conv<i>.pgm per tapped layer (i = 1-based tap index) and
/// project<k>.pgm per pair. Returns the written paths.
std::vector<std::string> export_vis_maps(const VisMaps& maps, const std::string& outdir);

} // namespace hbp
