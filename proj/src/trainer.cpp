#include "hbp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hbp/parallel.hpp"

namespace hbp {

void TrainConfig::validate() const {
    if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be non-negative");
    if (anneal_factor <= 0.0 || anneal_factor > 1.0) {
        throw ConfigError("train: anneal_factor must be in (0,1]");
    }
    if (anneal_every <= 0) throw ConfigError("train: anneal_every must be positive");
    if (epochs_stage1 < 0 || epochs_stage2 < 0) throw ConfigError("train: epoch counts must be >= 0");
    if (d <= 0) throw ConfigError("train: d must be positive");
}

double annealed_lr(double base_lr, double factor, int every, int epoch) {
    return base_lr * std::pow(factor, epoch / every);
}

void sgd_step(std::map<std::string, Tensor*>& params, const Gradients& grads, SgdState& state,
              double lr, double momentum, double weight_decay) {
    for (auto& [name, theta] : params) {
        if (!grads.contains(name)) continue;
        const Tensor& g = grads.at(name);
        if (!g.same_shape(*theta)) {
            throw ShapeError("sgd: gradient shape " + g.shape_str() + " does not match parameter '" +
                             name + "' " + theta->shape_str());
        }
        if (!g.all_finite()) {
            throw NumericError("sgd: non-finite gradient for parameter '" + name + "'");
        }
        auto it = state.velocity.find(name);
        if (it == state.velocity.end()) {
            it = state.velocity.emplace(name, Tensor::zeros(theta->shape())).first;
        }
        Tensor& v = it->second;
        for (std::int64_t i = 0; i < v.size(); ++i) {
            v[i] = momentum * v[i] - lr * (g[i] + weight_decay * (*theta)[i]);
            (*theta)[i] += v[i];
        }
    }
}

namespace {

int argmax_lowest(const Tensor& scores) {
    int best = 0;
    for (std::int64_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = static_cast<int>(i);
    }
    return best;
}

Tensor flip_horizontal(const Tensor& image) {
    const int h = image.extent(0), w = image.extent(1), c = image.extent(2);
    Tensor out(image.shape());
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double* src = image.data() + (static_cast<std::size_t>(i) * w + j) * c;
            double* dst = out.data() + (static_cast<std::size_t>(i) * w + (w - 1 - j)) * c;
            for (int k = 0; k < c; ++k) dst[k] = src[k];
        }
    }
    return out;
}

// Pooled, normalized head input vector: everything the classifier P
// consumes. Frozen during stage 1, so it is computed once per sample
// there. Mirrors the head kernels exactly.
Tensor head_features(const Model& model, const std::array<Tensor, 3>& taps) {
    switch (model.variant) {
        case Variant::fbp: {
            Tensor pooled = pooled_interaction(taps[2], taps[2], model.U, model.V);
            return model.normalize ? normalize_signed_sqrt_l2(pooled) : pooled;
        }
        case Variant::cbp: {
            Tensor pooled = pooled_interaction(taps[1], taps[2], model.U, model.V);
            return model.normalize ? normalize_signed_sqrt_l2(pooled) : pooled;
        }
        case Variant::hbp: {
            Tensor xy = pooled_interaction(taps[0], taps[1], model.U, model.V);
            Tensor xz = pooled_interaction(taps[0], taps[2], model.U, model.S);
            Tensor yz = pooled_interaction(taps[1], taps[2], model.V, model.S);
            if (model.normalize) {
                xy = normalize_signed_sqrt_l2(xy);
                xz = normalize_signed_sqrt_l2(xz);
                yz = normalize_signed_sqrt_l2(yz);
            }
            Tensor joined({model.d * kHbpPairCount});
            for (int k = 0; k < model.d; ++k) {
                joined[k] = xy[k];
                joined[model.d + k] = xz[k];
                joined[2 * model.d + k] = yz[k];
            }
            return joined;
        }
    }
    throw Error("unreachable variant");
}

struct SampleEval {
    double loss = 0.0;
    bool correct = false;
};

SampleEval eval_features(const Tensor& features, const Tensor& P, int label) {
    Tape tape;
    ValueId scores = tape.reshape(
        tape.matmul(tape.constant(features.reshaped({1, features.extent(0)})), tape.constant(P)),
        {P.extent(1)});
    SampleEval out;
    out.correct = argmax_lowest(tape.value(scores)) == label;
    out.loss = tape.value(tape.softmax_cross_entropy(scores, label))[0];
    return out;
}

struct ParamSnapshot {
    std::map<std::string, Tensor> values;

    static ParamSnapshot capture(Model& model) {
        ParamSnapshot snap;
        for (const auto& [name, t] : model.params()) snap.values.emplace(name, *t);
        return snap;
    }
    void restore(Model& model) const {
        auto params = model.params();
        for (const auto& [name, t] : values) *params.at(name) = t;
    }
};

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

} // namespace

double evaluate(const Dataset& dataset, const Model& model, int threads) {
    if (dataset.samples.empty()) throw Error("evaluate: dataset is empty");
    std::vector<unsigned char> correct(dataset.samples.size(), 0);
    parallel_for(dataset.samples.size(), threads, [&](std::size_t i) {
        const Sample& sample = dataset.samples[i];
        if (sample.label < 0 || sample.label >= model.o) {
            throw Error("evaluate: label " + std::to_string(sample.label) + " out of range");
        }
        const Tensor scores = model_scores(model, sample.image);
        correct[i] = argmax_lowest(scores) == sample.label ? 1 : 0;
    });
    std::size_t hits = 0;
    for (unsigned char c : correct) hits += c;
    return static_cast<double>(hits) / static_cast<double>(dataset.samples.size());
}

std::string TrainReport::csv() const {
    std::ostringstream out;
    out << "epoch,loss,train_acc,test_acc,lr\n";
    char buf[160];
    for (const EpochStats& e : epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.loss,
                      e.train_acc, e.test_acc, e.lr);
        out << buf;
    }
    return out.str();
}

TrainReport train_two_stage(const Dataset& dataset, Model& model, const TrainConfig& config,
                            const std::string& checkpoint_path, int threads) {
    config.validate();
    model.validate();
    if (dataset.samples.empty()) throw Error("train: dataset is empty");
    if (model.variant != config.variant || model.d != config.d ||
        model.normalize != config.normalize) {
        throw ConfigError("train: model was built with a different variant/d/normalize than the config");
    }
    const auto t_start = std::chrono::steady_clock::now();

    auto [train_set, test_set] = split_train_test(dataset, 0.8, config.seed);
    if (train_set.samples.empty()) throw Error("train: empty training split");
    // A tiny dataset can leave the test split empty; fall back to the train
    // split so the report columns stay meaningful.
    const Dataset& eval_set = test_set.samples.empty() ? train_set : test_set;

    TrainReport report;
    Rng rng(config.seed ^ 0x7261696e5eedULL);

    // Feature caches for the classifier-only stage; they also make the
    // epoch-0 evaluation cheap.
    const std::size_t n_train = train_set.samples.size();
    const std::size_t n_test = eval_set.samples.size();
    std::vector<Tensor> train_features(n_train), test_features(n_test);
    parallel_for(n_train, threads, [&](std::size_t i) {
        train_features[i] = head_features(model, model_feature_maps(model, train_set.samples[i].image));
    });
    parallel_for(n_test, threads, [&](std::size_t i) {
        test_features[i] = head_features(model, model_feature_maps(model, eval_set.samples[i].image));
    });

    auto eval_cached = [&](const std::vector<Tensor>& features, const Dataset& set, double* loss_out) {
        std::vector<SampleEval> evals(features.size());
        parallel_for(features.size(), threads, [&](std::size_t i) {
            evals[i] = eval_features(features[i], model.P, set.samples[i].label);
        });
        double loss = 0.0;
        std::size_t hits = 0;
        for (const SampleEval& e : evals) {
            loss += e.loss;
            hits += e.correct ? 1 : 0;
        }
        if (loss_out) *loss_out = loss / static_cast<double>(features.size());
        return static_cast<double>(hits) / static_cast<double>(features.size());
    };

    {
        EpochStats initial;
        initial.epoch = 0;
        initial.train_acc = eval_cached(train_features, train_set, &initial.loss);
        initial.test_acc = eval_cached(test_features, eval_set, nullptr);
        initial.lr = config.lr;
        report.epochs.push_back(initial);
    }

    int epoch_counter = 0;
    ParamSnapshot last_good = ParamSnapshot::capture(model);

    // --- stage 1: classifier only, frozen features ---
    {
        SgdState state;
        auto p_only = model.params();
        for (auto it = p_only.begin(); it != p_only.end();) {
            it = Model::is_classifier_param(it->first) ? std::next(it) : p_only.erase(it);
        }
        Rng shuffle_rng = rng.fork(1);
        for (int epoch = 0; epoch < config.epochs_stage1 && !report.aborted; ++epoch) {
            const double lr = annealed_lr(config.lr, config.anneal_factor, config.anneal_every, epoch);
            const std::vector<std::size_t> order = shuffled_indices(n_train, shuffle_rng);
            double loss_sum = 0.0;
            std::size_t hits = 0;
            for (std::size_t begin = 0; begin < n_train; begin += config.batch_size) {
                const std::size_t end = std::min(n_train, begin + config.batch_size);
                std::vector<Gradients> grads(end - begin);
                std::vector<SampleEval> evals(end - begin);
                parallel_for(end - begin, threads, [&](std::size_t bi) {
                    const Sample& sample = train_set.samples[order[begin + bi]];
                    const Tensor& features = train_features[order[begin + bi]];
                    Tape tape;
                    ValueId scores = tape.reshape(
                        tape.matmul(tape.constant(features.reshaped({1, features.extent(0)})),
                                    tape.param("P", model.P)),
                        {model.o});
                    evals[bi].correct = argmax_lowest(tape.value(scores)) == sample.label;
                    ValueId loss = tape.softmax_cross_entropy(scores, sample.label);
                    evals[bi].loss = tape.value(loss)[0];
                    grads[bi] = tape.backward(loss);
                });
                double batch_loss = 0.0;
                for (const SampleEval& e : evals) {
                    batch_loss += e.loss;
                    hits += e.correct ? 1 : 0;
                }
                loss_sum += batch_loss;
                if (!std::isfinite(batch_loss)) {
                    last_good.restore(model);
                    report.aborted = true;
                    break;
                }
                Gradients batch_grads;
                for (const Gradients& g : grads) accumulate(batch_grads, g);
                scale_in_place(batch_grads, 1.0 / static_cast<double>(end - begin));
                sgd_step(p_only, batch_grads, state, lr, config.momentum, config.weight_decay);
            }
            if (report.aborted) break;
            EpochStats stats;
            stats.epoch = ++epoch_counter;
            stats.loss = loss_sum / static_cast<double>(n_train);
            stats.train_acc = static_cast<double>(hits) / static_cast<double>(n_train);
            stats.test_acc = eval_cached(test_features, eval_set, nullptr);
            stats.lr = lr;
            report.epochs.push_back(stats);
            last_good = ParamSnapshot::capture(model);
        }
    }

    // --- stage 2: fine-tune everything, flip augmentation ---
    if (!report.aborted) {
        SgdState state;
        auto all_params = model.params();
        Rng shuffle_rng = rng.fork(2);
        Rng flip_rng = rng.fork(3);
        for (int epoch = 0; epoch < config.epochs_stage2 && !report.aborted; ++epoch) {
            const double lr = annealed_lr(config.lr, config.anneal_factor, config.anneal_every, epoch);
            const std::vector<std::size_t> order = shuffled_indices(n_train, shuffle_rng);
            std::vector<unsigned char> flips(n_train);
            for (std::size_t i = 0; i < n_train; ++i) flips[i] = flip_rng.bernoulli(0.5) ? 1 : 0;
            double loss_sum = 0.0;
            std::size_t hits = 0;
            for (std::size_t begin = 0; begin < n_train; begin += config.batch_size) {
                const std::size_t end = std::min(n_train, begin + config.batch_size);
                std::vector<Gradients> grads(end - begin);
                std::vector<SampleEval> evals(end - begin);
                parallel_for(end - begin, threads, [&](std::size_t bi) {
                    const Sample& sample = train_set.samples[order[begin + bi]];
                    const Tensor image =
                        flips[begin + bi] ? flip_horizontal(sample.image) : sample.image;
                    Tape tape;
                    ValueId scores = model_scores_node(tape, model, image);
                    evals[bi].correct = argmax_lowest(tape.value(scores)) == sample.label;
                    ValueId loss = tape.softmax_cross_entropy(scores, sample.label);
                    evals[bi].loss = tape.value(loss)[0];
                    grads[bi] = tape.backward(loss);
                });
                double batch_loss = 0.0;
                for (const SampleEval& e : evals) {
                    batch_loss += e.loss;
                    hits += e.correct ? 1 : 0;
                }
                loss_sum += batch_loss;
                if (!std::isfinite(batch_loss)) {
                    last_good.restore(model);
                    report.aborted = true;
                    break;
                }
                Gradients batch_grads;
                for (const Gradients& g : grads) accumulate(batch_grads, g);
                scale_in_place(batch_grads, 1.0 / static_cast<double>(end - begin));
                sgd_step(all_params, batch_grads, state, lr, config.momentum, config.weight_decay);
            }
            if (report.aborted) break;
            EpochStats stats;
            stats.epoch = ++epoch_counter;
            stats.loss = loss_sum / static_cast<double>(n_train);
            stats.train_acc = static_cast<double>(hits) / static_cast<double>(n_train);
            stats.test_acc = evaluate(eval_set, model, threads);
            stats.lr = lr;
            report.epochs.push_back(stats);
            last_good = ParamSnapshot::capture(model);
        }
    }

    if (!checkpoint_path.empty()) {
        save_model(checkpoint_path, model);
        report.checkpoint_path = checkpoint_path;
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

} // namespace hbp
