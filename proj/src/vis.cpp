#include "hbp/vis.hpp"

#include <cmath>
#include <filesystem>

#include "hbp/data_io.hpp"

namespace hbp {

Tensor conv_response_map(const Tensor& fmap) {
    if (fmap.rank() != 3) {
        throw ShapeError("conv_response_map: expected h×w×c map, got " + fmap.shape_str());
    }
    const int h = fmap.extent(0), w = fmap.extent(1), c = fmap.extent(2);
    Tensor out({h, w});
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double* loc = fmap.data() + (static_cast<std::size_t>(i) * w + j) * c;
            double acc = 0.0;
            for (int k = 0; k < c; ++k) acc += std::abs(loc[k]);
            out.at(i, j) = acc / c;
        }
    }
    return out;
}

Tensor project_response_map(const Tensor& X, const Tensor& Y, const Tensor& A, const Tensor& B) {
    if (X.rank() != 3 || !X.same_shape(Y)) {
        throw ShapeError("project_response_map: maps must share shape, got " + X.shape_str() +
                         " vs " + Y.shape_str());
    }
    const int h = X.extent(0), w = X.extent(1), c = X.extent(2);
    const int locations = h * w;
    const int d = A.extent(1);
    Tensor px = matmul(X.reshaped({locations, c}), A);
    Tensor py = matmul(Y.reshaped({locations, c}), B);
    Tensor z = hadamard(px, py);       // per-location interaction vectors
    Tensor pooled = sum_rows(z);       // their sum over the image
    Tensor out({h, w});
    for (int loc = 0; loc < locations; ++loc) {
        const double* zrow = z.data() + static_cast<std::size_t>(loc) * d;
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += zrow[k] * pooled[k];
        out[loc] = acc;
    }
    return out;
}

VisMaps compute_vis_maps(const Model& model, const Tensor& image) {
    model.validate();
    const std::array<Tensor, 3> taps = model_feature_maps(model, image);
    VisMaps maps;
    switch (model.variant) {
        case Variant::fbp:
            maps.tap_indices = {2};
            maps.conv_maps.push_back(conv_response_map(taps[2]));
            maps.project_maps.push_back(project_response_map(taps[2], taps[2], model.U, model.V));
            break;
        case Variant::cbp:
            maps.tap_indices = {1, 2};
            maps.conv_maps.push_back(conv_response_map(taps[1]));
            maps.conv_maps.push_back(conv_response_map(taps[2]));
            maps.project_maps.push_back(project_response_map(taps[1], taps[2], model.U, model.V));
            break;
        case Variant::hbp:
            maps.tap_indices = {0, 1, 2};
            for (int i = 0; i < 3; ++i) {
                maps.conv_maps.push_back(conv_response_map(taps[static_cast<std::size_t>(i)]));
            }
            maps.project_maps.push_back(project_response_map(taps[0], taps[1], model.U, model.V));
            maps.project_maps.push_back(project_response_map(taps[0], taps[2], model.U, model.S));
            maps.project_maps.push_back(project_response_map(taps[1], taps[2], model.V, model.S));
            break;
    }
    return maps;
}

std::vector<std::string> export_vis_maps(const VisMaps& maps, const std::string& outdir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(outdir, ec);
    if (ec) throw IoError("cannot create output directory '" + outdir + "': " + ec.message());
    std::vector<std::string> written;
    for (std::size_t i = 0; i < maps.conv_maps.size(); ++i) {
        const std::string path =
            (fs::path(outdir) / ("conv" + std::to_string(maps.tap_indices[i] + 1) + ".pgm")).string();
        save_pgm(path, maps.conv_maps[i]);
        written.push_back(path);
    }
    for (std::size_t i = 0; i < maps.project_maps.size(); ++i) {
        const std::string path =
            (fs::path(outdir) / ("project" + std::to_string(i + 1) + ".pgm")).string();
        save_pgm(path, maps.project_maps[i]);
        written.push_back(path);
    }
    return written;
}

} // namespace hbp
