#include "hbp/model.hpp"

#include <cmath>

#include "hbp/data_io.hpp"

namespace hbp {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::fbp: return "fbp";
        case Variant::cbp: return "cbp";
        case Variant::hbp: return "hbp";
    }
    throw Error("unreachable variant");
}

Variant parse_variant(const std::string& name) {
    if (name == "fbp") return Variant::fbp;
    if (name == "cbp") return Variant::cbp;
    if (name == "hbp") return Variant::hbp;
    throw ConfigError("unknown variant '" + name + "', expected fbp, cbp or hbp");
}

void Model::validate() const {
    config.validate();
    backbone.validate(config);
    if (c != config.tap_channels) {
        throw ShapeError("model: head c=" + std::to_string(c) + " does not match tap channels " +
                         std::to_string(config.tap_channels));
    }
    const std::vector<int> proj{c, d};
    if (U.shape() != proj || V.shape() != proj) {
        throw ShapeError("model: U and V must be c×d");
    }
    if (variant == Variant::hbp) {
        if (S.shape() != proj) throw ShapeError("model: S must be c×d for the hbp variant");
        if (P.shape() != std::vector<int>{kHbpPairCount * d, o}) {
            throw ShapeError("model: P must be (3d)×o for the hbp variant, got " + P.shape_str());
        }
    } else {
        if (!S.empty()) throw ShapeError("model: S must be empty for fbp/cbp variants");
        if (P.shape() != std::vector<int>{d, o}) {
            throw ShapeError("model: P must be d×o, got " + P.shape_str());
        }
    }
}

std::map<std::string, Tensor*> Model::params() {
    std::map<std::string, Tensor*> out;
    const std::vector<std::string> names = backbone_param_names(config);
    for (std::size_t i = 0; i < names.size(); ++i) {
        out.emplace(names[i], &backbone.kernels[i]);
    }
    out.emplace("U", &U);
    out.emplace("V", &V);
    if (variant == Variant::hbp) out.emplace("S", &S);
    out.emplace("P", &P);
    return out;
}

std::map<std::string, const Tensor*> Model::params() const {
    std::map<std::string, const Tensor*> out;
    for (const auto& [name, t] : const_cast<Model*>(this)->params()) out.emplace(name, t);
    return out;
}

Model init_model(const BackboneConfig& config, Variant variant, int d, int o, bool normalize,
                 std::uint64_t seed) {
    config.validate();
    Model model;
    model.config = config;
    model.config.seed = seed;
    model.backbone = BackboneParams::init(model.config);
    model.variant = variant;
    model.normalize = normalize;
    model.c = config.tap_channels;
    model.d = d;
    model.o = o;
    Rng rng(seed ^ 0x8bad5eedULL);
    if (variant == Variant::hbp) {
        HbpParams head = HbpParams::init(model.c, d, o, rng);
        model.U = std::move(head.U);
        model.V = std::move(head.V);
        model.S = std::move(head.S);
        model.P = std::move(head.P);
    } else {
        FbpParams head = FbpParams::init(model.c, d, o, rng);
        model.U = std::move(head.U);
        model.V = std::move(head.V);
        model.P = std::move(head.P);
    }
    return model;
}

std::array<Tensor, 3> model_feature_maps(const Model& model, const Tensor& image) {
    return backbone_forward(image, model.config, model.backbone);
}

Tensor head_scores(const Model& model, const std::array<Tensor, 3>& taps) {
    switch (model.variant) {
        case Variant::fbp: {
            FbpParams p{model.U, model.V, model.P, model.c, model.d, model.o};
            return fbp_forward(taps[2], p, model.normalize);
        }
        case Variant::cbp: {
            FbpParams p{model.U, model.V, model.P, model.c, model.d, model.o};
            return cbp_forward(taps[1], taps[2], p, model.normalize);
        }
        case Variant::hbp: {
            HbpParams p{model.U, model.V, model.S, model.P, model.c, model.d, model.o};
            return hbp_forward(taps[0], taps[1], taps[2], p, model.normalize);
        }
    }
    throw Error("unreachable variant");
}

Tensor model_scores(const Model& model, const Tensor& image) {
    return head_scores(model, model_feature_maps(model, image));
}

ValueId model_scores_node(Tape& tape, const Model& model, const Tensor& image) {
    ValueId img = tape.constant(image);
    std::vector<ValueId> kernel_ids;
    const std::vector<std::string> names = backbone_param_names(model.config);
    for (std::size_t i = 0; i < names.size(); ++i) {
        kernel_ids.push_back(tape.param(names[i], model.backbone.kernels[i]));
    }
    const std::array<ValueId, 3> taps = backbone_forward_node(tape, img, model.config, kernel_ids);
    const ValueId U = tape.param("U", model.U);
    const ValueId V = tape.param("V", model.V);
    const ValueId P = tape.param("P", model.P);
    switch (model.variant) {
        case Variant::fbp:
            return cbp_head(tape, taps[2], taps[2], U, V, P, model.normalize);
        case Variant::cbp:
            return cbp_head(tape, taps[1], taps[2], U, V, P, model.normalize);
        case Variant::hbp: {
            const ValueId S = tape.param("S", model.S);
            return hbp_head(tape, taps[0], taps[1], taps[2], U, V, S, P, model.normalize);
        }
    }
    throw Error("unreachable variant");
}

// --- checkpoints ---------------------------------------------------------------

namespace {

constexpr double kMetaFormat = 1.0;

} // namespace

void save_model(const std::string& path, const Model& model) {
    model.validate();
    std::vector<double> meta;
    meta.push_back(kMetaFormat);
    meta.push_back(static_cast<double>(static_cast<int>(model.variant)));
    meta.push_back(model.c);
    meta.push_back(model.d);
    meta.push_back(model.o);
    meta.push_back(model.normalize ? 1.0 : 0.0);
    meta.push_back(model.config.input_size);
    meta.push_back(model.config.tap_channels);
    meta.push_back(static_cast<double>(model.config.stem.size()));
    for (const auto& stage : model.config.stem) {
        meta.push_back(stage.channels);
        meta.push_back(stage.maxpool ? 1.0 : 0.0);
    }
    NamedTensors entries;
    entries.emplace_back("meta", Tensor({static_cast<int>(meta.size())}, meta));
    for (const auto& [name, t] : model.params()) {
        entries.emplace_back(name, *t);
    }
    write_tensors(path, entries);
}

GradcheckReport gradcheck_composite(std::uint64_t seed, bool normalize,
                                    const GradcheckSettings& settings, int threads) {
    BackboneConfig config;
    config.input_size = 16;
    config.stem = {{4, true}, {8, true}};
    config.tap_channels = 8;
    config.seed = seed;
    const Model base = init_model(config, Variant::hbp, /*d=*/3, /*o=*/2, normalize, seed);
    Rng rng(seed ^ 0x1fa6e5ULL);
    const Tensor image = Tensor::uniform({16, 16, 3}, 0.0, 1.0, rng);

    std::map<std::string, Tensor> params;
    for (const auto& [name, t] : base.params()) params.emplace(name, *t);

    const TapeFn build = [base, image](Tape& tape, const std::map<std::string, Tensor>& p) {
        Model m = base;
        auto slots = m.params();
        for (const auto& [name, t] : p) *slots.at(name) = t;
        return model_scores_node(tape, m, image);
    };
    return gradcheck(build, params, settings, threads);
}

Model load_model(const std::string& path) {
    const NamedTensors entries = read_tensors(path);
    const Tensor& meta = find_tensor(entries, "meta");
    if (meta.rank() != 1 || meta.size() < 9 || meta[0] != kMetaFormat) {
        throw IoError("checkpoint '" + path + "': unrecognized meta entry");
    }
    Model model;
    model.variant = static_cast<Variant>(static_cast<int>(meta[1]));
    model.c = static_cast<int>(meta[2]);
    model.d = static_cast<int>(meta[3]);
    model.o = static_cast<int>(meta[4]);
    model.normalize = meta[5] != 0.0;
    model.config.input_size = static_cast<int>(meta[6]);
    model.config.tap_channels = static_cast<int>(meta[7]);
    const int n_stem = static_cast<int>(meta[8]);
    if (meta.size() != 9 + 2 * n_stem) {
        throw IoError("checkpoint '" + path + "': meta entry length mismatch");
    }
    for (int i = 0; i < n_stem; ++i) {
        model.config.stem.push_back(
            {static_cast<int>(meta[9 + 2 * i]), meta[10 + 2 * i] != 0.0});
    }
    for (const std::string& name : backbone_param_names(model.config)) {
        model.backbone.kernels.push_back(find_tensor(entries, name));
    }
    model.U = find_tensor(entries, "U");
    model.V = find_tensor(entries, "V");
    if (model.variant == Variant::hbp) model.S = find_tensor(entries, "S");
    model.P = find_tensor(entries, "P");
    model.validate();
    return model;
}

} // namespace hbp
