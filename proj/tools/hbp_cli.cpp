// Command-line front end: synthetic data generation, two-stage training,
// evaluation, head-only pooling, gradient and factorization checks, and
// activation-map export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hbp/config.hpp"
#include "hbp/data_io.hpp"
#include "hbp/model.hpp"
#include "hbp/pooling.hpp"
#include "hbp/trainer.hpp"
#include "hbp/vis.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitIo = 3;

struct CommonFlags {
    std::string config_path;
    CLI::Option* opt_seed = nullptr;
    CLI::Option* opt_d = nullptr;
    CLI::Option* opt_variant = nullptr;
    CLI::Option* opt_no_normalize = nullptr;
    CLI::Option* opt_threads = nullptr;
    std::uint64_t seed = 0;
    int d = 0;
    std::string variant;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key = value config file");
    flags.opt_seed = cmd->add_option("--seed", flags.seed, "random seed");
    flags.opt_d = cmd->add_option("--d", flags.d, "projection dimension");
    flags.opt_variant =
        cmd->add_option("--variant", flags.variant, "head variant: fbp, cbp or hbp");
    flags.opt_no_normalize =
        cmd->add_flag("--no-normalize", "disable signed-sqrt + L2 normalization");
    flags.opt_threads = cmd->add_option("--threads", flags.threads, "worker threads (0 = all)");
}

hbp::CliConfig merge_config(const CommonFlags& flags) {
    hbp::CliConfig config;
    if (!flags.config_path.empty()) config.load_file(flags.config_path);
    if (*flags.opt_seed) config.set("seed", std::to_string(flags.seed));
    if (*flags.opt_d) config.set("d", std::to_string(flags.d));
    if (*flags.opt_variant) config.set("variant", flags.variant);
    if (*flags.opt_no_normalize) config.set("normalize", "false");
    if (*flags.opt_threads) config.set("threads", std::to_string(flags.threads));
    return config;
}

hbp::Dataset load_dataset_arg(const std::string& data_path) {
    fs::path p(data_path);
    if (fs::is_directory(p)) p /= "manifest.txt";
    return hbp::load_dataset(p.string());
}

std::string scores_csv(const hbp::Tensor& scores) {
    std::string line;
    char buf[64];
    for (std::int64_t i = 0; i < scores.size(); ++i) {
        if (i) line += ",";
        std::snprintf(buf, sizeof(buf), "%.17g", scores[i]);
        line += buf;
    }
    return line;
}

int cmd_gen_data(const hbp::CliConfig& config, const std::string& out_dir) {
    config.data.validate();
    const hbp::Dataset dataset = hbp::generate_synthetic(config.data);
    hbp::save_dataset(out_dir, dataset);
    std::cout << "wrote " << dataset.samples.size() << " samples (" << dataset.num_classes
              << " classes) to " << out_dir << "\n";
    return kExitOk;
}

int cmd_train(const hbp::CliConfig& config, const std::string& data_path,
              const std::string& out_dir) {
    config.train.validate();
    const hbp::Dataset dataset = load_dataset_arg(data_path);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw hbp::IoError("cannot create output directory '" + out_dir + "'");

    hbp::BackboneConfig backbone = config.backbone;
    hbp::Model model = hbp::init_model(backbone, config.train.variant, config.train.d,
                                       dataset.num_classes, config.train.normalize,
                                       config.train.seed);
    const std::string checkpoint = (fs::path(out_dir) / "checkpoint.hbpt").string();
    hbp::TrainReport report =
        hbp::train_two_stage(dataset, model, config.train, checkpoint, config.threads);

    const std::string csv_path = (fs::path(out_dir) / "report.csv").string();
    std::ofstream csv(csv_path);
    if (!csv) throw hbp::IoError("cannot write '" + csv_path + "'");
    csv << report.csv();

    std::ofstream summary(fs::path(out_dir) / "summary.txt");
    summary << "variant: " << hbp::variant_name(config.train.variant) << "\n"
            << "d: " << config.train.d << "\n"
            << "seed: " << config.train.seed << "\n"
            << "epochs: " << report.epochs.size() - 1 << "\n"
            << "final train acc: " << report.epochs.back().train_acc << "\n"
            << "final test acc: " << report.epochs.back().test_acc << "\n"
            << "wall seconds: " << report.wall_seconds << "\n"
            << (report.aborted ? "ABORTED on non-finite loss; last good params kept\n" : "");

    std::cout << "final_test_acc," << report.epochs.back().test_acc << "\n";
    std::cout << "checkpoint," << checkpoint << "\n";
    if (report.aborted) {
        std::cerr << "training aborted on non-finite loss; last good checkpoint retained\n";
        return kExitNumeric;
    }
    return kExitOk;
}

int cmd_eval(const hbp::CliConfig& config, const std::string& data_path,
             const std::string& checkpoint, const std::string& split) {
    hbp::Dataset dataset = load_dataset_arg(data_path);
    if (split != "all") {
        auto [train_set, test_set] = hbp::split_train_test(dataset, 0.8, config.train.seed);
        dataset = split == "train" ? std::move(train_set) : std::move(test_set);
    }
    const hbp::Model model = hbp::load_model(checkpoint);
    const double acc = hbp::evaluate(dataset, model, config.threads);
    std::printf("accuracy,%.17g\n", acc);
    return kExitOk;
}

int cmd_pool(const hbp::CliConfig& config, const std::string& input_path,
             const std::string& checkpoint, bool no_normalize) {
    hbp::Model model = hbp::load_model(checkpoint);
    if (no_normalize) model.normalize = false;
    const hbp::NamedTensors entries = hbp::read_tensors(input_path);
    const hbp::Tensor& X = hbp::find_tensor(entries, "X");
    std::array<hbp::Tensor, 3> taps = {X, X, X};
    switch (model.variant) {
        case hbp::Variant::fbp:
            taps[2] = X;
            break;
        case hbp::Variant::cbp:
            taps[1] = X;
            taps[2] = hbp::find_tensor(entries, "Y");
            break;
        case hbp::Variant::hbp:
            taps[0] = X;
            taps[1] = hbp::find_tensor(entries, "Y");
            taps[2] = hbp::find_tensor(entries, "Z");
            break;
    }
    const hbp::Tensor scores = hbp::head_scores(model, taps);
    std::cout << scores_csv(scores) << "\n";
    return kExitOk;
}

int cmd_oracle_check(const hbp::CliConfig& config, int n, bool inject_fault) {
    const double fault = inject_fault ? 1.0 + 1e-3 : 1.0;
    const double err =
        hbp::factorization_equivalence_max_err(n, config.train.seed, fault);
    std::printf("instances,%d\nmax_rel_err,%.3e\n", n, err);
    if (err > 1e-9) {
        std::cerr << "factorization equivalence FAILED (max relative error " << err << ")\n";
        return kExitNumeric;
    }
    return kExitOk;
}

int cmd_gradcheck(const hbp::CliConfig& config, const std::string& op, int seeds, double tolerance,
                  double epsilon) {
    hbp::GradcheckSettings settings;
    settings.tolerance = tolerance;
    settings.epsilon = epsilon;
    bool all_pass = true;

    auto run_named = [&](const std::string& name) {
        double worst = 0.0;
        std::int64_t skipped = 0;
        bool pass = true;
        for (int s = 0; s < seeds; ++s) {
            const hbp::GradcheckReport report =
                hbp::gradcheck_op(name, config.train.seed + static_cast<std::uint64_t>(s), settings);
            for (const auto& p : report.params) {
                worst = std::max(worst, p.max_rel_err);
                skipped += p.skipped;
                pass = pass && p.pass;
            }
        }
        std::printf("%-24s %s  max_rel_err=%.3e  skipped=%lld\n", name.c_str(),
                    pass ? "ok  " : "FAIL", worst, static_cast<long long>(skipped));
        all_pass = all_pass && pass;
    };

    if (!op.empty() && op != "all" && op != "composite") {
        run_named(op);
    } else {
        if (op != "composite") {
            for (const std::string& name : hbp::registered_op_names()) run_named(name);
        }
        if (op.empty() || op == "all" || op == "composite") {
            const hbp::GradcheckReport report = hbp::gradcheck_composite(
                config.train.seed, config.train.normalize, settings, config.threads);
            double worst = 0.0;
            std::int64_t skipped = 0;
            for (const auto& p : report.params) {
                worst = std::max(worst, p.max_rel_err);
                skipped += p.skipped;
            }
            std::printf("%-24s %s  max_rel_err=%.3e  skipped=%lld\n", "backbone+hbp",
                        report.pass() ? "ok  " : "FAIL", worst, static_cast<long long>(skipped));
            all_pass = all_pass && report.pass();
        }
    }
    if (!all_pass) {
        std::cerr << "gradient check FAILED at tolerance " << tolerance << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}

int cmd_vis(const hbp::CliConfig& config, const std::string& checkpoint, const std::string& image_path,
            const std::string& out_dir) {
    (void)config;
    const hbp::Model model = hbp::load_model(checkpoint);
    const hbp::Tensor image = hbp::load_ppm(image_path);
    const hbp::VisMaps maps = hbp::compute_vis_maps(model, image);
    const std::vector<std::string> written = hbp::export_vis_maps(maps, out_dir);
    for (const std::string& path : written) std::cout << path << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"factorized / cross-layer / hierarchical bilinear pooling toolkit"};
    app.require_subcommand(1);

    CommonFlags gen_flags;
    std::string gen_out;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_common(gen, gen_flags);
    gen->add_option("--out", gen_out, "output directory")->required();

    CommonFlags train_flags;
    std::string train_data, train_out = "out";
    CLI::Option* opt_e1;
    CLI::Option* opt_e2;
    int train_e1 = 0, train_e2 = 0;
    CLI::App* train = app.add_subcommand("train", "two-stage training run");
    add_common(train, train_flags);
    train->add_option("--data", train_data, "dataset directory or manifest")->required();
    train->add_option("--out", train_out, "output directory");
    opt_e1 = train->add_option("--epochs-stage1", train_e1, "classifier-only epochs");
    opt_e2 = train->add_option("--epochs-stage2", train_e2, "fine-tuning epochs");

    CommonFlags eval_flags;
    std::string eval_data, eval_checkpoint, eval_split = "all";
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, eval_flags);
    eval->add_option("--data", eval_data, "dataset directory or manifest")->required();
    eval->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->required();
    eval->add_option("--split", eval_split, "all, train or test (seeded 80/20 split)")
        ->check(CLI::IsMember({"all", "train", "test"}));

    CommonFlags pool_flags;
    std::string pool_input, pool_checkpoint;
    CLI::App* pool = app.add_subcommand("pool", "score precomputed feature maps");
    add_common(pool, pool_flags);
    pool->add_option("--input", pool_input, "tensor file with entries X[,Y[,Z]]")->required();
    pool->add_option("--checkpoint", pool_checkpoint, "model checkpoint")->required();

    CommonFlags oracle_flags;
    int oracle_n = 100;
    bool oracle_fault = false;
    CLI::App* oracle = app.add_subcommand("oracle-check", "factorized vs full bilinear equivalence");
    add_common(oracle, oracle_flags);
    oracle->add_option("--n", oracle_n, "number of random instances");
    oracle->add_flag("--inject-fault", oracle_fault,
                     "perturb U on the factorized side (must fail)");

    CommonFlags grad_flags;
    std::string grad_op;
    int grad_seeds = 20;
    double grad_tol = 1e-5, grad_eps = 1e-5;
    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    add_common(grad, grad_flags);
    grad->add_option("--op", grad_op, "single op name, 'all', or 'composite'");
    grad->add_option("--seeds", grad_seeds, "random seeds per op");
    grad->add_option("--tolerance", grad_tol, "max relative error");
    grad->add_option("--epsilon", grad_eps, "finite-difference step");

    CommonFlags vis_flags;
    std::string vis_checkpoint, vis_image, vis_out = "vis";
    CLI::App* vis = app.add_subcommand("vis", "export activation heatmaps");
    add_common(vis, vis_flags);
    vis->add_option("--checkpoint", vis_checkpoint, "model checkpoint")->required();
    vis->add_option("--image", vis_image, "input PPM image")->required();
    vis->add_option("--out", vis_out, "output directory");

    CommonFlags dump_flags;
    CLI::App* dump = app.add_subcommand("dump-config", "print the effective configuration");
    add_common(dump, dump_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) return cmd_gen_data(merge_config(gen_flags), gen_out);
        if (*train) {
            hbp::CliConfig config = merge_config(train_flags);
            if (*opt_e1) config.train.epochs_stage1 = train_e1;
            if (*opt_e2) config.train.epochs_stage2 = train_e2;
            return cmd_train(config, train_data, train_out);
        }
        if (*eval) return cmd_eval(merge_config(eval_flags), eval_data, eval_checkpoint, eval_split);
        if (*pool) {
            return cmd_pool(merge_config(pool_flags), pool_input, pool_checkpoint,
                            *pool_flags.opt_no_normalize > 0);
        }
        if (*oracle) return cmd_oracle_check(merge_config(oracle_flags), oracle_n, oracle_fault);
        if (*grad) {
            return cmd_gradcheck(merge_config(grad_flags), grad_op, grad_seeds, grad_tol, grad_eps);
        }
        if (*vis) return cmd_vis(merge_config(vis_flags), vis_checkpoint, vis_image, vis_out);
        if (*dump) {
            std::cout << merge_config(dump_flags).dump();
            return kExitOk;
        }
    } catch (const hbp::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const hbp::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const hbp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
