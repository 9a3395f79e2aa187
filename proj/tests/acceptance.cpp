// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fails. Criteria 5 and 6 train real models and dominate the runtime; pass
// a list of criterion numbers to run a subset, e.g. `hbp_acceptance 5 6`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hbp/config.hpp"
#include "hbp/data_io.hpp"
#include "hbp/model.hpp"
#include "hbp/pooling.hpp"
#include "hbp/trainer.hpp"
#include "hbp/vis.hpp"

using namespace hbp;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Tensor row_block(const Tensor& P, int first_row, int rows) {
    const int o = P.extent(1);
    Tensor block({rows, o});
    for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < o; ++j) block.at(r, j) = P.at(first_row + r, j);
    }
    return block;
}

// --- criterion 1 ---------------------------------------------------------

bool factorization_equivalence(std::string& detail) {
    const double t0 = now_seconds();
    const double err = factorization_equivalence_max_err(100, 20240501);
    const double elapsed = now_seconds() - t0;
    std::ostringstream out;
    out << "max_rel_err=" << err << " over 100 instances in " << elapsed << "s";
    detail = out.str();
    return err <= 1e-9 && elapsed < 5.0;
}

// --- criterion 2 ---------------------------------------------------------

bool hbp_block_decomposition(std::string& detail) {
    Rng rng(424242);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int c = 1 + rng.uniform_int(8);
        const int d = 1 + rng.uniform_int(16);
        const int o = 1 + rng.uniform_int(4);
        const int hw = 1 + rng.uniform_int(4);
        HbpParams params;
        params.c = c;
        params.d = d;
        params.o = o;
        params.U = Tensor::uniform({c, d}, -1, 1, rng);
        params.V = Tensor::uniform({c, d}, -1, 1, rng);
        params.S = Tensor::uniform({c, d}, -1, 1, rng);
        params.P = Tensor::uniform({3 * d, o}, -1, 1, rng);
        const Tensor X = Tensor::uniform({hw, hw, c}, -1, 1, rng);
        const Tensor Y = Tensor::uniform({hw, hw, c}, -1, 1, rng);
        const Tensor Z = Tensor::uniform({hw, hw, c}, -1, 1, rng);
        const Tensor got = hbp_forward(X, Y, Z, params, /*normalize=*/false);
        const Tensor want =
            add(add(full_bilinear_oracle(X, Y, params.U, params.V, row_block(params.P, 0, d)),
                    full_bilinear_oracle(X, Z, params.U, params.S, row_block(params.P, d, d))),
                full_bilinear_oracle(Y, Z, params.V, params.S, row_block(params.P, 2 * d, d)));
        worst = std::max(worst, max_rel_error(got, want));
    }
    std::ostringstream out;
    out << "max_rel_err=" << worst << " over 50 instances";
    detail = out.str();
    return worst <= 1e-9;
}

// --- criterion 3 ---------------------------------------------------------

bool gradient_suite(std::string& detail) {
    const double t0 = now_seconds();
    double worst = 0.0;
    for (const std::string& name : registered_op_names()) {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const GradcheckReport report = gradcheck_op(name, seed);
            for (const auto& p : report.params) worst = std::max(worst, p.max_rel_err);
            if (!report.pass()) {
                detail = "op '" + name + "' failed at seed " + std::to_string(seed) + "\n" +
                         report.summary();
                return false;
            }
        }
    }
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const GradcheckReport report = gradcheck_composite(seed, /*normalize=*/true, {}, 0);
        for (const auto& p : report.params) worst = std::max(worst, p.max_rel_err);
        if (!report.pass()) {
            detail = "backbone+hbp composite failed at seed " + std::to_string(seed) + "\n" +
                     report.summary();
            return false;
        }
    }
    const double elapsed = now_seconds() - t0;
    std::ostringstream out;
    out << "15 ops + composite, 20 seeds each, max_rel_err=" << worst << " in " << elapsed << "s";
    detail = out.str();
    return elapsed < 60.0;
}

// --- criterion 4 ---------------------------------------------------------

bool reduction_identities(std::string& detail) {
    Rng rng(515151);
    const int c = 6, d = 8, o = 3;
    FbpParams fparams = FbpParams::init(c, d, o, rng);
    const Tensor X = Tensor::uniform({3, 3, c}, -1, 1, rng);

    const Tensor a = cbp_forward(X, X, fparams, true);
    const Tensor b = fbp_forward(X, fparams, true);
    for (std::int64_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) {
            detail = "CBP(X,X) != FBP(X)";
            return false;
        }
    }

    const Tensor zero({3, 3, c});
    HbpParams hparams = HbpParams::init(c, d, o, rng);
    for (const Tensor& scores :
         {fbp_forward(zero, fparams, true), cbp_forward(zero, zero, fparams, true),
          hbp_forward(zero, zero, zero, hparams, true)}) {
        for (std::int64_t i = 0; i < scores.size(); ++i) {
            if (std::abs(scores[i]) > 1e-12) {
                detail = "zero input did not annihilate a head";
                return false;
            }
        }
    }

    const Tensor x = Tensor::uniform({c}, -1, 1, rng);
    const Tensor y = Tensor::uniform({c}, -1, 1, rng);
    const Tensor A = Tensor::uniform({c, d}, -1, 1, rng);
    const Tensor B = Tensor::uniform({c, d}, -1, 1, rng);
    const Tensor xy = interaction(x, y, A, B);
    const Tensor yx = interaction(y, x, B, A);
    for (std::int64_t i = 0; i < xy.size(); ++i) {
        if (xy[i] != yx[i]) {
            detail = "interaction swap symmetry violated";
            return false;
        }
    }
    detail = "CBP(X,X)==FBP(X) exact; zero annihilation <=1e-12; swap symmetry exact";
    return true;
}

// --- criteria 5 and 6: desk-scale trends -----------------------------------

struct TrendRun {
    Variant variant;
    int d;
    std::uint64_t seed;
    double test_acc;
};

double run_trend_model(Variant variant, int d, std::uint64_t seed, const Dataset& data) {
    CliConfig config;  // library defaults: the documented desk-scale setup
    config.train.variant = variant;
    config.train.d = d;
    config.train.seed = seed;
    Model model = init_model(config.backbone, variant, d, data.num_classes,
                             config.train.normalize, seed);
    const TrainReport report = train_two_stage(data, model, config.train, "", 0);
    return report.epochs.back().test_acc;
}

double linear_baseline(const Dataset& data, std::uint64_t seed) {
    // Multinomial logistic regression on raw pixels.
    auto [train_set, test_set] = split_train_test(data, 0.8, seed);
    const int dim = static_cast<int>(train_set.samples[0].image.size());
    const int o = data.num_classes;
    Rng rng(seed);
    Tensor W = Tensor::uniform({dim, o}, -0.01, 0.01, rng);
    SgdState state;
    std::map<std::string, Tensor*> params{{"W", &W}};
    for (int epoch = 0; epoch < 30; ++epoch) {
        const double lr = annealed_lr(0.05, 0.5, 10, epoch);
        for (const Sample& sample : train_set.samples) {
            Tape tape;
            ValueId scores = tape.reshape(
                tape.matmul(tape.constant(sample.image.reshaped({1, dim})), tape.param("W", W)),
                {o});
            const Gradients grads = tape.backward(tape.softmax_cross_entropy(scores, sample.label));
            sgd_step(params, grads, state, lr, 0.9, 5e-4);
        }
    }
    std::size_t hits = 0;
    for (const Sample& sample : test_set.samples) {
        const Tensor scores = matmul(sample.image.reshaped({1, dim}), W);
        int best = 0;
        for (int j = 1; j < o; ++j) {
            if (scores[j] > scores[best]) best = j;
        }
        hits += best == sample.label ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(test_set.samples.size());
}

constexpr int kTrendSeeds = 5;

bool desk_scale_trend(std::string& detail) {
    const double t0 = now_seconds();
    CliConfig defaults;
    double fbp_sum = 0.0, cbp_sum = 0.0, hbp_sum = 0.0, linear_sum = 0.0;
    std::ostringstream log;
    for (std::uint64_t seed = 1; seed <= kTrendSeeds; ++seed) {
        SyntheticSpec spec = defaults.data;
        spec.seed = seed;
        const Dataset data = generate_synthetic(spec);
        const double f = run_trend_model(Variant::fbp, defaults.train.d, seed, data);
        const double c = run_trend_model(Variant::cbp, defaults.train.d, seed, data);
        const double h = run_trend_model(Variant::hbp, defaults.train.d, seed, data);
        const double lin = linear_baseline(data, seed);
        fbp_sum += f;
        cbp_sum += c;
        hbp_sum += h;
        linear_sum += lin;
        log << "  seed " << seed << ": fbp=" << f << " cbp=" << c << " hbp=" << h
            << " linear=" << lin << "\n";
    }
    const double fbp = fbp_sum / kTrendSeeds;
    const double cbp = cbp_sum / kTrendSeeds;
    const double hbp = hbp_sum / kTrendSeeds;
    const double lin = linear_sum / kTrendSeeds;
    const double elapsed = now_seconds() - t0;
    std::ostringstream out;
    out << "mean over " << kTrendSeeds << " seeds: fbp=" << fbp << " cbp=" << cbp
        << " hbp=" << hbp << " linear_baseline=" << lin << " (" << elapsed << "s)\n"
        << log.str();
    detail = out.str();
    const bool ordering = hbp >= cbp && cbp >= fbp - 0.02 && hbp >= fbp + 0.02;
    const bool above_chance = fbp >= 0.1875 && cbp >= 0.1875 && hbp >= 0.1875;
    const bool beats_linear = hbp > lin;
    return ordering && above_chance && beats_linear && elapsed < 1800.0;
}

bool dimension_monotonicity(std::string& detail) {
    const double t0 = now_seconds();
    CliConfig defaults;
    std::vector<double> means;
    std::ostringstream log;
    for (const int d : {8, 32, 128}) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= kTrendSeeds; ++seed) {
            SyntheticSpec spec = defaults.data;
            spec.seed = seed;
            const Dataset data = generate_synthetic(spec);
            sum += run_trend_model(Variant::hbp, d, seed, data);
        }
        means.push_back(sum / kTrendSeeds);
        log << "  d=" << d << ": mean=" << means.back() << "\n";
    }
    const double elapsed = now_seconds() - t0;
    detail = "hbp accuracy by projection dimension (" + std::to_string(elapsed) + "s)\n" + log.str();
    return means[1] >= means[0] - 0.02 && means[2] >= means[1] - 0.02;
}

// --- criterion 7 ---------------------------------------------------------

bool optimizer_arithmetic(std::string& detail) {
    Tensor theta({1}, {0.0});
    std::map<std::string, Tensor*> params{{"w", &theta}};
    Gradients grads;
    grads.by_name.emplace("w", Tensor({1}, {1.0}));
    SgdState state;
    sgd_step(params, grads, state, 0.1, 0.9, 0.0);
    const double theta1 = theta[0];
    sgd_step(params, grads, state, 0.1, 0.9, 0.0);
    const double v2 = state.velocity.at("w")[0];
    const double theta2 = theta[0];
    const bool recurrence = std::abs(theta1 - (-0.1)) < 1e-15 && std::abs(v2 - (-0.19)) < 1e-15 &&
                            std::abs(theta2 - (-0.29)) < 1e-15;
    bool schedule = true;
    for (int e = 0; e < 50; ++e) {
        if (annealed_lr(1e-3, 0.5, 10, e) != 1e-3 * std::pow(0.5, e / 10)) schedule = false;
    }
    std::ostringstream out;
    out << "theta1=" << theta1 << " v2=" << v2 << " theta2=" << theta2
        << (schedule ? "; annealing exact" : "; annealing WRONG");
    detail = out.str();
    return recurrence && schedule;
}

// --- criterion 8 ---------------------------------------------------------

bool reproducibility(std::string& detail) {
    SyntheticSpec spec;
    spec.classes = 4;
    spec.palette_a = 2;
    spec.palette_b = 2;
    spec.image_size = 16;
    spec.samples_per_class = 8;
    spec.seed = 21;
    BackboneConfig backbone;
    backbone.input_size = 16;
    backbone.stem = {{6, true}, {8, true}};
    backbone.tap_channels = 8;
    backbone.seed = 21;
    TrainConfig config;
    config.batch_size = 8;
    config.d = 6;
    config.seed = 21;
    config.epochs_stage1 = 2;
    config.epochs_stage2 = 2;

    const Dataset data = generate_synthetic(spec);
    std::vector<std::string> csvs;
    for (int run = 0; run < 2; ++run) {
        Model model = init_model(backbone, config.variant, config.d, data.num_classes,
                                 config.normalize, config.seed);
        // different thread counts must not change the numbers
        const TrainReport report = train_two_stage(data, model, config, "", run == 0 ? 1 : 2);
        csvs.push_back(report.csv());
    }
    detail = csvs[0] == csvs[1] ? "two runs, byte-identical CSV ("
                                : "CSV MISMATCH (";
    detail += std::to_string(csvs[0].size()) + " bytes)";
    return csvs[0] == csvs[1];
}

// --- criterion 9 ---------------------------------------------------------

bool file_format_round_trip(std::string& detail) {
    const std::string path = "acceptance_roundtrip.hbpt";
    Rng rng(99);
    NamedTensors entries;
    entries.emplace_back("a", Tensor::uniform({3, 5, 2}, -1000, 1000, rng));
    entries.emplace_back("b", Tensor::uniform({17}, -1, 1, rng));
    write_tensors(path, entries);
    const NamedTensors back = read_tensors(path);
    if (back.size() != entries.size()) {
        detail = "entry count changed";
        return false;
    }
    for (std::size_t e = 0; e < entries.size(); ++e) {
        if (back[e].first != entries[e].first ||
            back[e].second.shape() != entries[e].second.shape()) {
            detail = "name or shape changed";
            return false;
        }
        for (std::int64_t i = 0; i < entries[e].second.size(); ++i) {
            const double want = entries[e].second[i];
            if (std::abs(back[e].second[i] - want) > 1e-6 * std::max(1.0, std::abs(want))) {
                detail = "value drift beyond 32-bit precision";
                return false;
            }
        }
    }
    // corrupt the magic in place
    {
        std::FILE* f = std::fopen(path.c_str(), "r+b");
        std::fputc('X', f);
        std::fclose(f);
    }
    try {
        read_tensors(path);
        detail = "corrupted magic was accepted";
        return false;
    } catch (const IoError&) {
    }
    std::remove(path.c_str());
    detail = "shapes exact, values <=1e-6 rel, corrupted magic rejected";
    return true;
}

// --- criterion 10 --------------------------------------------------------

bool visualization_identity(std::string& detail) {
    BackboneConfig backbone;
    backbone.input_size = 16;
    backbone.stem = {{6, true}, {8, true}};
    backbone.tap_channels = 8;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        backbone.seed = seed;
        const Model model = init_model(backbone, Variant::hbp, 6, 4, true, seed);
        Rng rng(seed * 17);
        const Tensor image = Tensor::uniform({16, 16, 3}, 0, 1, rng);
        const VisMaps maps = compute_vis_maps(model, image);
        const auto taps = model_feature_maps(model, image);
        const Tensor* pairs[3][2] = {{&taps[0], &taps[1]}, {&taps[0], &taps[2]}, {&taps[1], &taps[2]}};
        const Tensor* projs[3][2] = {{&model.U, &model.V}, {&model.U, &model.S}, {&model.V, &model.S}};
        for (int p = 0; p < 3; ++p) {
            const Tensor pooled =
                pooled_interaction(*pairs[p][0], *pairs[p][1], *projs[p][0], *projs[p][1]);
            double norm_sq = 0.0;
            for (std::int64_t i = 0; i < pooled.size(); ++i) norm_sq += pooled[i] * pooled[i];
            const double total = sum_all(maps.project_maps[static_cast<std::size_t>(p)]);
            const double rel = std::abs(total - norm_sq) / (std::abs(norm_sq) + 1e-300);
            worst = std::max(worst, rel);
        }
    }
    std::ostringstream out;
    out << "sum(project map) vs ||pooled||^2: max_rel_err=" << worst << " over 10 inputs";
    detail = out.str();
    return worst <= 1e-6;
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    struct Criterion {
        int id;
        const char* name;
        std::function<bool(std::string&)> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "factorization equivalence oracle", factorization_equivalence},
        {2, "hbp block decomposition", hbp_block_decomposition},
        {3, "gradient suite", gradient_suite},
        {4, "reduction identities", reduction_identities},
        {5, "desk-scale accuracy trend", desk_scale_trend},
        {6, "projection dimension monotonicity", dimension_monotonicity},
        {7, "optimizer arithmetic", optimizer_arithmetic},
        {8, "reproducibility", reproducibility},
        {9, "tensor file round trip", file_format_round_trip},
        {10, "visualization identity", visualization_identity},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        if (!only.empty() && !only.count(criterion.id)) continue;
        std::string detail;
        bool ok = false;
        const double t0 = now_seconds();
        try {
            ok = criterion.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double elapsed = now_seconds() - t0;
        std::printf("[%s] criterion %2d: %s (%.1fs)\n    %s\n", ok ? "PASS" : "FAIL", criterion.id,
                    criterion.name, elapsed, detail.c_str());
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    if (failures) std::printf("%d criterion(s) FAILED\n", failures);
    return failures ? 1 : 0;
}
