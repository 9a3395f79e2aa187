#include "hbp/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hbp/rng.hpp"

namespace hbp {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(v & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff),
    };
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) throw IoError("tensor file truncated while reading " + what);
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

float get_f32(std::istream& in, const std::string& what) {
    return std::bit_cast<float>(get_u32(in, what));
}

} // namespace

void write_tensors(const std::string& path, const NamedTensors& entries) {
    std::set<std::string> seen;
    for (const auto& [name, t] : entries) {
        (void)t;
        if (!seen.insert(name).second) {
            throw IoError("tensor file: duplicate entry name '" + name + "'");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(kTensorFileMagic, 4);
    put_u32(out, kTensorFileVersion);
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (int axis = 0; axis < t.rank(); ++axis) {
            put_u32(out, static_cast<std::uint32_t>(t.extent(axis)));
        }
        for (std::int64_t i = 0; i < t.size(); ++i) {
            put_f32(out, static_cast<float>(t[i]));
        }
    }
    if (!out) throw IoError("write failed on '" + path + "'");
}

NamedTensors read_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kTensorFileMagic, 4) != 0) {
        throw IoError("tensor file '" + path + "': bad magic, expected HBPT");
    }
    const std::uint32_t version = get_u32(in, "version");
    if (version != kTensorFileVersion) {
        throw IoError("tensor file '" + path + "': unsupported version " + std::to_string(version));
    }
    const std::uint32_t count = get_u32(in, "entry count");
    NamedTensors entries;
    std::set<std::string> seen;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint32_t name_len = get_u32(in, "name length");
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!in) throw IoError("tensor file truncated while reading entry name");
        if (!seen.insert(name).second) {
            throw IoError("tensor file '" + path + "': duplicate entry name '" + name + "'");
        }
        const std::uint32_t rank = get_u32(in, "rank");
        if (rank > 8) throw IoError("tensor file '" + path + "': implausible rank");
        std::vector<int> shape;
        std::int64_t total = 1;
        for (std::uint32_t axis = 0; axis < rank; ++axis) {
            const std::uint32_t extent = get_u32(in, "extent");
            shape.push_back(static_cast<int>(extent));
            total *= extent;
        }
        std::vector<double> data(static_cast<std::size_t>(total));
        for (std::int64_t i = 0; i < total; ++i) {
            data[static_cast<std::size_t>(i)] = get_f32(in, "values");
        }
        entries.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return entries;
}

const Tensor& find_tensor(const NamedTensors& entries, const std::string& name) {
    for (const auto& [n, t] : entries) {
        if (n == name) return t;
    }
    throw IoError("tensor file has no entry named '" + name + "'");
}

bool has_tensor(const NamedTensors& entries, const std::string& name) {
    for (const auto& [n, t] : entries) {
        (void)t;
        if (n == name) return true;
    }
    return false;
}

// --- images -------------------------------------------------------------------

namespace {

// Reads one PNM header token, skipping whitespace and '#' comments.
std::string pnm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

} // namespace

Tensor load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    const std::string magic = pnm_token(in);
    if (magic != "P6") {
        throw IoError("'" + path + "': not a binary PPM (P6), magic was '" + magic + "'");
    }
    const int w = std::stoi(pnm_token(in));
    const int h = std::stoi(pnm_token(in));
    const int maxval = std::stoi(pnm_token(in));
    if (w <= 0 || h <= 0) throw IoError("'" + path + "': bad PPM dimensions");
    if (maxval != 255) throw IoError("'" + path + "': only 8-bit PPM supported");
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw IoError("'" + path + "': truncated PPM payload");
    Tensor image({h, w, 3});
    for (std::size_t i = 0; i < raw.size(); ++i) {
        image[static_cast<std::int64_t>(i)] = raw[i] / 255.0;
    }
    return image;
}

void save_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.extent(2) != 3) {
        throw ShapeError("save_ppm: expected H×W×3 image, got " + image.shape_str());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "P6\n" << image.extent(1) << " " << image.extent(0) << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(image.size()));
    for (std::int64_t i = 0; i < image.size(); ++i) {
        const double v = std::clamp(image[i], 0.0, 1.0);
        raw[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed on '" + path + "'");
}

void save_pgm(const std::string& path, const Tensor& map) {
    if (map.rank() != 2) {
        throw ShapeError("save_pgm: expected h×w map, got " + map.shape_str());
    }
    double lo = map[0], hi = map[0];
    for (std::int64_t i = 1; i < map.size(); ++i) {
        lo = std::min(lo, map[i]);
        hi = std::max(hi, map[i]);
    }
    const double range = hi - lo;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "P5\n" << map.extent(1) << " " << map.extent(0) << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(map.size()));
    if (range > 0.0) {
        for (std::int64_t i = 0; i < map.size(); ++i) {
            raw[static_cast<std::size_t>(i)] =
                static_cast<unsigned char>(std::lround((map[i] - lo) / range * 255.0));
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed on '" + path + "'");
}

// --- synthetic dataset ----------------------------------------------------------

void SyntheticSpec::validate() const {
    if (palette_a <= 0 || palette_b <= 0) {
        throw ConfigError("synthetic: palette sizes must be positive");
    }
    if (classes != palette_a * palette_b) {
        throw ConfigError("synthetic: classes (" + std::to_string(classes) +
                          ") must equal palette_a × palette_b (" +
                          std::to_string(palette_a * palette_b) + ")");
    }
    if (image_size < 16) throw ConfigError("synthetic: image_size must be at least 16");
    if (samples_per_class <= 0) throw ConfigError("synthetic: samples_per_class must be positive");
    if (noise_std < 0.0) throw ConfigError("synthetic: noise_std must be non-negative");
}

namespace {

// Oriented sine stripes in global image coordinates; the phase therefore
// shifts with patch position, so no fixed pixel template identifies a
// pattern. Channel weighting separates the two palettes: palette A
// modulates red+green, palette B modulates blue+green.
void render_patch(Tensor& image, int top, int left, int patch, int pattern, int palette,
                  bool palette_a) {
    const double angle = 3.14159265358979323846 * pattern / palette;
    const double ci = std::cos(angle), cj = std::sin(angle);
    const double period = 4.0;
    for (int i = top; i < top + patch; ++i) {
        for (int j = left; j < left + patch; ++j) {
            const double s = std::sin(2.0 * 3.14159265358979323846 * (ci * i + cj * j) / period);
            double* px = image.data() + (static_cast<std::size_t>(i) * image.extent(1) + j) * 3;
            if (palette_a) {
                px[0] = 0.5 + 0.4 * s;
                px[1] = 0.5 + 0.15 * s;
                px[2] = 0.35;
            } else {
                px[0] = 0.35;
                px[1] = 0.5 + 0.15 * s;
                px[2] = 0.5 + 0.4 * s;
            }
        }
    }
}

} // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int size = spec.image_size;
    const int patch = 3 * size / 8;
    // Patch A lives in the top band, patch B in the bottom band; the bands
    // cannot overlap, and both patches slide freely sideways.
    const int band = size / 8;
    const int col_range = size - patch + 1;

    Dataset dataset;
    dataset.num_classes = spec.classes;
    dataset.samples.reserve(static_cast<std::size_t>(spec.classes) * spec.samples_per_class);
    for (int a = 0; a < spec.palette_a; ++a) {
        for (int b = 0; b < spec.palette_b; ++b) {
            const int label = a * spec.palette_b + b;
            for (int s = 0; s < spec.samples_per_class; ++s) {
                Tensor image = Tensor::full({size, size, 3}, 0.5);
                const int a_top = rng.uniform_int(band + 1);
                const int a_left = rng.uniform_int(col_range);
                const int b_top = size / 2 + rng.uniform_int(band + 1);
                const int b_left = rng.uniform_int(col_range);
                render_patch(image, a_top, a_left, patch, a, spec.palette_a, true);
                render_patch(image, b_top, b_left, patch, b, spec.palette_b, false);
                if (spec.noise_std > 0.0) {
                    for (std::int64_t i = 0; i < image.size(); ++i) {
                        image[i] += rng.normal(0.0, spec.noise_std);
                    }
                }
                for (std::int64_t i = 0; i < image.size(); ++i) {
                    image[i] = std::clamp(image[i], 0.0, 1.0);
                }
                dataset.samples.push_back({std::move(image), label});
            }
        }
    }
    return dataset;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& dataset, double train_fraction,
                                             std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction > 1.0) {
        throw ConfigError("split: train_fraction must be in (0,1]");
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.num_classes));
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        by_class.at(static_cast<std::size_t>(dataset.samples[i].label)).push_back(i);
    }
    Dataset train, test;
    train.num_classes = test.num_classes = dataset.num_classes;
    Rng rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
    for (auto& indices : by_class) {
        // Fisher-Yates with the shared stream keeps the split a pure
        // function of (dataset order, seed).
        for (std::size_t i = indices.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)));
            std::swap(indices[i - 1], indices[j]);
        }
        const std::size_t n_train =
            static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(indices.size())));
        for (std::size_t i = 0; i < indices.size(); ++i) {
            (i < n_train ? train : test).samples.push_back(dataset.samples[indices[i]]);
        }
    }
    return {std::move(train), std::move(test)};
}

void save_dataset(const std::string& dir, const Dataset& dataset) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "images", ec);
    if (ec) throw IoError("cannot create dataset directory '" + dir + "': " + ec.message());
    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw IoError("cannot open manifest for writing under '" + dir + "'");
    char name[64];
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        std::snprintf(name, sizeof(name), "images/img_%05zu.ppm", i);
        save_ppm((fs::path(dir) / name).string(), dataset.samples[i].image);
        manifest << name << "," << dataset.samples[i].label << "\n";
    }
    if (!manifest) throw IoError("write failed on manifest under '" + dir + "'");
}

Dataset load_dataset(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream manifest(manifest_path);
    if (!manifest) throw IoError("cannot open manifest '" + manifest_path + "'");
    const fs::path base = fs::path(manifest_path).parent_path();
    Dataset dataset;
    std::string line;
    int max_label = -1;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const std::size_t comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw IoError("manifest '" + manifest_path + "': malformed line '" + line + "'");
        }
        const std::string rel = line.substr(0, comma);
        const int label = std::stoi(line.substr(comma + 1));
        if (label < 0) throw IoError("manifest '" + manifest_path + "': negative label");
        dataset.samples.push_back({load_ppm((base / rel).string()), label});
        max_label = std::max(max_label, label);
    }
    dataset.num_classes = max_label + 1;
    if (dataset.samples.empty()) {
        throw IoError("manifest '" + manifest_path + "' lists no samples");
    }
    return dataset;
}

} // namespace hbp
