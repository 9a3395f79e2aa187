#include "hbp/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace hbp {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    std::size_t end = s.find_last_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: key '" + key + "' expects true/false, got '" + value + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + value +
                          "'");
    }
}

// "16p,32p" — channel counts, trailing 'p' marks a maxpool after the stage.
std::vector<BackboneConfig::Stage> parse_stem(const std::string& value) {
    std::vector<BackboneConfig::Stage> stem;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("config: empty stem stage in '" + value + "'");
        bool pool = false;
        if (item.back() == 'p') {
            pool = true;
            item.pop_back();
        }
        stem.push_back({parse_int("stem", item), pool});
    }
    if (stem.empty()) throw ConfigError("config: stem must list at least one stage");
    return stem;
}

std::string stem_to_string(const std::vector<BackboneConfig::Stage>& stem) {
    std::string out;
    for (std::size_t i = 0; i < stem.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(stem[i].channels);
        if (stem[i].maxpool) out += "p";
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

CliConfig::CliConfig() {
    backbone = default_desk_config();
    // data and train carry their own defaults
}

void CliConfig::set(const std::string& key, const std::string& value) {
    if (key == "variant") {
        train.variant = parse_variant(value);
    } else if (key == "d") {
        train.d = parse_int(key, value);
    } else if (key == "normalize") {
        train.normalize = parse_bool(key, value);
    } else if (key == "seed") {
        train.seed = parse_u64(key, value);
        data.seed = train.seed;
    } else if (key == "batch_size") {
        train.batch_size = parse_int(key, value);
    } else if (key == "momentum") {
        train.momentum = parse_double(key, value);
    } else if (key == "weight_decay") {
        train.weight_decay = parse_double(key, value);
    } else if (key == "lr") {
        train.lr = parse_double(key, value);
    } else if (key == "anneal_factor") {
        train.anneal_factor = parse_double(key, value);
    } else if (key == "anneal_every") {
        train.anneal_every = parse_int(key, value);
    } else if (key == "epochs_stage1") {
        train.epochs_stage1 = parse_int(key, value);
    } else if (key == "epochs_stage2") {
        train.epochs_stage2 = parse_int(key, value);
    } else if (key == "classes") {
        data.classes = parse_int(key, value);
    } else if (key == "image_size") {
        data.image_size = parse_int(key, value);
        backbone.input_size = data.image_size;
    } else if (key == "palette_a") {
        data.palette_a = parse_int(key, value);
    } else if (key == "palette_b") {
        data.palette_b = parse_int(key, value);
    } else if (key == "noise_std") {
        data.noise_std = parse_double(key, value);
    } else if (key == "samples_per_class") {
        data.samples_per_class = parse_int(key, value);
    } else if (key == "input_size") {
        backbone.input_size = parse_int(key, value);
    } else if (key == "stem") {
        backbone.stem = parse_stem(value);
    } else if (key == "tap_channels") {
        backbone.tap_channels = parse_int(key, value);
    } else if (key == "threads") {
        threads = parse_int(key, value);
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

void CliConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        }
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::string CliConfig::dump() const {
    std::ostringstream out;
    out << "variant = " << variant_name(train.variant) << "\n";
    out << "d = " << train.d << "\n";
    out << "normalize = " << (train.normalize ? "true" : "false") << "\n";
    out << "seed = " << train.seed << "\n";
    out << "batch_size = " << train.batch_size << "\n";
    out << "momentum = " << format_double(train.momentum) << "\n";
    out << "weight_decay = " << format_double(train.weight_decay) << "\n";
    out << "lr = " << format_double(train.lr) << "\n";
    out << "anneal_factor = " << format_double(train.anneal_factor) << "\n";
    out << "anneal_every = " << train.anneal_every << "\n";
    out << "epochs_stage1 = " << train.epochs_stage1 << "\n";
    out << "epochs_stage2 = " << train.epochs_stage2 << "\n";
    out << "classes = " << data.classes << "\n";
    out << "image_size = " << data.image_size << "\n";
    out << "palette_a = " << data.palette_a << "\n";
    out << "palette_b = " << data.palette_b << "\n";
    out << "noise_std = " << format_double(data.noise_std) << "\n";
    out << "samples_per_class = " << data.samples_per_class << "\n";
    out << "input_size = " << backbone.input_size << "\n";
    out << "stem = " << stem_to_string(backbone.stem) << "\n";
    out << "tap_channels = " << backbone.tap_channels << "\n";
    out << "threads = " << threads << "\n";
    return out.str();
}

void CliConfig::validate() const {
    train.validate();
    data.validate();
    backbone.validate();
    if (backbone.input_size != data.image_size) {
        throw ConfigError("config: backbone input_size (" + std::to_string(backbone.input_size) +
                          ") must match image_size (" + std::to_string(data.image_size) + ")");
    }
}

} // namespace hbp
