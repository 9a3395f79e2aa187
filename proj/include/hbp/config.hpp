#pragma once

#include <string>

#include "hbp/backbone.hpp"
#include "hbp/data_io.hpp"
#include "hbp/trainer.hpp"

namespace hbp {

/// Effective tool configuration: training hyperparameters, synthetic data
/// spec and backbone layout, merged from documented defaults, an optional
/// line-oriented "key = value" config file, and command-line overrides
/// (strongest last). Unknown keys are errors. dump() emits the full
/// key set in a form load() accepts, so dump→load is the identity.
struct CliConfig {
    TrainConfig train;
    SyntheticSpec data;
    BackboneConfig backbone;
    int threads = 0;  // 0 = hardware concurrency

    CliConfig();

    /// Applies one "key = value" assignment.
    void set(const std::string& key, const std::string& value);
    /// Reads a config file; '#' starts a comment, blank lines are skipped.
    void load_file(const std::string& path);
    std::string dump() const;

    /// Cross-field checks (classes vs palettes, positive extents).
    void validate() const;
};

} // namespace hbp
