#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hbp/tensor.hpp"

namespace hbp {

// --- named-tensor container ---------------------------------------------------
// Byte layout, all integers little-endian u32, values little-endian IEEE-754
// binary32 row-major:
//   magic "HBPT" | version | entry count |
//   per entry: name length | name bytes | rank | extents... | values...
// Storage is 32-bit on disk while the library computes in 64-bit, so a
// round trip is exact in shape and ~1e-7 relative in value.

inline constexpr char kTensorFileMagic[4] = {'H', 'B', 'P', 'T'};
inline constexpr std::uint32_t kTensorFileVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Writes entries in the given order. Duplicate names are rejected.
void write_tensors(const std::string& path, const NamedTensors& entries);

/// Reads a container back, preserving entry order. Bad magic, unsupported
/// version, duplicate names and truncated payloads are distinct IoErrors;
/// nothing partial is ever returned.
NamedTensors read_tensors(const std::string& path);

const Tensor& find_tensor(const NamedTensors& entries, const std::string& name);
bool has_tensor(const NamedTensors& entries, const std::string& name);

// --- images -------------------------------------------------------------------

/// Loads a binary 8-bit PPM (P6) as H×W×3 with values scaled to [0,1].
Tensor load_ppm(const std::string& path);

/// Writes an H×W×3 tensor clamped to [0,1] as binary 8-bit PPM.
void save_ppm(const std::string& path, const Tensor& image);

/// Writes an h×w map as binary 8-bit PGM (P5), min-max normalized to
/// 0..255. A constant map has no dynamic range and is written all-zero.
void save_pgm(const std::string& path, const Tensor& map);

// --- synthetic dataset ----------------------------------------------------------

struct Sample {
    Tensor image;  // H×W×3 in [0,1]
    int label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    int num_classes = 0;
};

/// Generator spec. Class identity is the PAIR of latent part attributes:
/// one patch carries a pattern from palette A, a second spatially separate
/// patch carries a pattern from palette B, both at randomized positions,
/// and label = a·palette_b + b. Recognition therefore requires detecting
/// the conjunction of two localized textures, not any single cue.
struct SyntheticSpec {
    int classes = 16;
    int image_size = 32;
    int palette_a = 4;
    int palette_b = 4;
    double noise_std = 0.06;
    int samples_per_class = 100;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Deterministic in spec (same spec, same bytes). Emits exactly
/// samples_per_class samples per class, ordered by class then index.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Stratified split: per class, the first ceil(fraction·n) generated
/// samples train and the rest test, after a seed-derived per-class shuffle.
std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double train_fraction,
                                             std::uint64_t seed);

/// Writes PPMs under dir/images/ plus dir/manifest.txt with one
/// "<relative path>,<label>" line per sample.
void save_dataset(const std::string& dir, const Dataset& dataset);

/// Loads a dataset from a manifest file (paths resolved relative to the
/// manifest's directory).
Dataset load_dataset(const std::string& manifest_path);

} // namespace hbp
