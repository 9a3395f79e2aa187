#pragma once

#include <map>
#include <string>
#include <vector>

#include "hbp/data_io.hpp"
#include "hbp/model.hpp"

namespace hbp {

struct TrainConfig {
    int batch_size = 16;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double lr = 1e-3;
    double anneal_factor = 0.5;
    int anneal_every = 10;      // epochs between learning-rate halvings
    int epochs_stage1 = 15;     // classifier-only epochs
    int epochs_stage2 = 10;     // full fine-tuning epochs
    std::uint64_t seed = 1;
    bool normalize = true;
    int d = 64;
    Variant variant = Variant::hbp;

    void validate() const;
};

/// Effective learning rate at a stage-local epoch index (0-based):
/// lr · factor^⌊epoch/every⌋.
double annealed_lr(double base_lr, double factor, int every, int epoch);

struct EpochStats {
    int epoch = 0;        // 0 is the pre-training evaluation
    double loss = 0.0;    // mean softmax cross-entropy over the train pass
    double train_acc = 0.0;
    double test_acc = 0.0;
    double lr = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::string checkpoint_path;
    double wall_seconds = 0.0;
    bool aborted = false;  // non-finite loss; params rolled back to last good epoch

    /// CSV with header "epoch,loss,train_acc,test_acc,lr", one row per
    /// epoch entry. Deterministic formatting; contains no wall-clock.
    std::string csv() const;
};

/// Momentum state per parameter, created zero on first use.
struct SgdState {
    std::map<std::string, Tensor> velocity;
};

/// v ← momentum·v − lr·(g + weight_decay·θ);  θ ← θ + v.
/// Throws NumericError on non-finite gradients, naming the parameter.
void sgd_step(std::map<std::string, Tensor*>& params, const Gradients& grads, SgdState& state,
              double lr, double momentum, double weight_decay);

/// Fraction of samples whose argmax score equals the label; score ties
/// resolve to the lowest class index.
double evaluate(const Dataset& dataset, const Model& model, int threads = 0);

/// Two-stage optimization: stage 1 fits only the classifier P on frozen
/// features, stage 2 fine-tunes every parameter with horizontal-flip
/// augmentation. The dataset is split 80/20 stratified from config.seed.
/// Row 0 of the report is the pre-training evaluation. When
/// checkpoint_path is non-empty the final (or last good, on abort)
/// parameters are saved there.
TrainReport train_two_stage(const Dataset& dataset, Model& model, const TrainConfig& config,
                            const std::string& checkpoint_path = "", int threads = 0);

} // namespace hbp
