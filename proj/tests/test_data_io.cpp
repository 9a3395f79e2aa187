#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hbp/data_io.hpp"

using namespace hbp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("hbp_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("tensor file round trip") {
    TempDir dir;
    const std::string path = dir.file("t.hbpt");
    const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    write_tensors(path, {{"weights", t}});
    const NamedTensors back = read_tensors(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].first == "weights");
    CHECK(back[0].second.shape() == t.shape());
    CHECK(back[0].second.values() == t.values());
}

TEST_CASE("empty entry list is a valid file") {
    TempDir dir;
    const std::string path = dir.file("empty.hbpt");
    write_tensors(path, {});
    CHECK(read_tensors(path).empty());
}

TEST_CASE("values survive within 32-bit precision") {
    TempDir dir;
    Rng rng(71);
    const Tensor t = Tensor::uniform({4, 4, 4}, -1000.0, 1000.0, rng);
    const std::string path = dir.file("vals.hbpt");
    write_tensors(path, {{"x", t}});
    const Tensor& back = read_tensors(path)[0].second;
    REQUIRE(back.shape() == t.shape());
    for (std::int64_t i = 0; i < t.size(); ++i) {
        CHECK(std::abs(back[i] - t[i]) <= 1e-6 * std::max(1.0, std::abs(t[i])));
    }
}

TEST_CASE("corrupt and malformed files raise distinct errors") {
    TempDir dir;
    const std::string path = dir.file("bad.hbpt");
    write_tensors(path, {{"x", Tensor({2}, {1, 2})}});

    SUBCASE("corrupted magic is rejected without partial result") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('Z');
        f.close();
        try {
            read_tensors(path);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("magic") != std::string::npos);
        }
    }

    SUBCASE("truncated payload is detected") {
        const auto size = fs::file_size(path);
        fs::resize_file(path, size - 3);
        try {
            read_tensors(path);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("truncated") != std::string::npos);
        }
    }

    SUBCASE("duplicate names are rejected on write and read") {
        CHECK_THROWS_AS(write_tensors(dir.file("dup.hbpt"),
                                      {{"x", Tensor({1}, {1})}, {"x", Tensor({1}, {2})}}),
                        IoError);
        // Forge a duplicate on disk: entry count 2, same payload twice.
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        const std::string entry = bytes.substr(12);
        bytes[8] = 2;  // entry count, little-endian low byte
        bytes += entry;
        std::ofstream out(dir.file("dup2.hbpt"), std::ios::binary);
        out << bytes;
        out.close();
        try {
            read_tensors(dir.file("dup2.hbpt"));
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
        }
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_tensors(dir.file("nope.hbpt")), IoError);
    }
}

TEST_CASE("ppm load and save") {
    TempDir dir;

    SUBCASE("1x1 white pixel loads as ones") {
        const std::string path = dir.file("white.ppm");
        std::ofstream out(path, std::ios::binary);
        out << "P6\n1 1\n255\n";
        out.put(static_cast<char>(255));
        out.put(static_cast<char>(255));
        out.put(static_cast<char>(255));
        out.close();
        const Tensor img = load_ppm(path);
        CHECK(img.shape() == std::vector<int>{1, 1, 3});
        CHECK(img.values() == std::vector<double>{1, 1, 1});
    }

    SUBCASE("non-P6 magic is rejected") {
        const std::string path = dir.file("gray.pgm");
        std::ofstream out(path, std::ios::binary);
        out << "P5\n1 1\n255\n";
        out.put(static_cast<char>(128));
        out.close();
        CHECK_THROWS_AS(load_ppm(path), IoError);
    }

    SUBCASE("round trip through the P6 writer stays within 8-bit quantization") {
        Rng rng(73);
        const Tensor img = Tensor::uniform({5, 7, 3}, 0.0, 1.0, rng);
        const std::string path = dir.file("rt.ppm");
        save_ppm(path, img);
        const Tensor back = load_ppm(path);
        REQUIRE(back.shape() == img.shape());
        for (std::int64_t i = 0; i < img.size(); ++i) {
            CHECK(std::abs(back[i] - img[i]) <= 1.0 / 255.0);
        }
    }
}

TEST_CASE("pgm export") {
    TempDir dir;

    SUBCASE("constant map is written all-zero") {
        const std::string path = dir.file("flat.pgm");
        save_pgm(path, Tensor::full({2, 2}, 7.0));
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const std::string payload = bytes.substr(bytes.size() - 4);
        for (char c : payload) CHECK(c == 0);
    }

    SUBCASE("min-max normalization hits 0 and 255") {
        const std::string path = dir.file("ramp.pgm");
        save_pgm(path, Tensor({1, 3}, {-1.0, 0.0, 1.0}));
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const std::string payload = bytes.substr(bytes.size() - 3);
        CHECK(static_cast<unsigned char>(payload[0]) == 0);
        CHECK(static_cast<unsigned char>(payload[1]) == 128);
        CHECK(static_cast<unsigned char>(payload[2]) == 255);
    }
}

TEST_CASE("synthetic generation invariants") {
    SyntheticSpec spec;
    spec.classes = 4;
    spec.palette_a = 2;
    spec.palette_b = 2;
    spec.samples_per_class = 3;
    spec.noise_std = 0.0;
    spec.seed = 5;

    SUBCASE("wrong class count is rejected") {
        SyntheticSpec bad = spec;
        bad.classes = 5;
        CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
    }

    SUBCASE("classes are exactly balanced and labels dense") {
        const Dataset data = generate_synthetic(spec);
        REQUIRE(data.samples.size() == 12);
        std::vector<int> counts(4, 0);
        for (const Sample& s : data.samples) counts.at(static_cast<std::size_t>(s.label))++;
        for (int c : counts) CHECK(c == 3);
    }

    SUBCASE("one noiseless sample per class gives pairwise distinct images") {
        SyntheticSpec one = spec;
        one.samples_per_class = 1;
        const Dataset data = generate_synthetic(one);
        REQUIRE(data.samples.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = i + 1; j < 4; ++j) {
                CHECK(data.samples[i].image.values() != data.samples[j].image.values());
            }
        }
    }

    SUBCASE("same seed twice gives bit-identical datasets") {
        const Dataset a = generate_synthetic(spec);
        const Dataset b = generate_synthetic(spec);
        REQUIRE(a.samples.size() == b.samples.size());
        for (std::size_t i = 0; i < a.samples.size(); ++i) {
            CHECK(a.samples[i].label == b.samples[i].label);
            CHECK(a.samples[i].image.values() == b.samples[i].image.values());
        }
    }

    SUBCASE("different seeds differ") {
        SyntheticSpec other = spec;
        other.seed = 6;
        const Dataset a = generate_synthetic(spec);
        const Dataset b = generate_synthetic(other);
        CHECK(a.samples[0].image.values() != b.samples[0].image.values());
    }
}

TEST_CASE("stratified split") {
    SyntheticSpec spec;
    spec.classes = 4;
    spec.palette_a = 2;
    spec.palette_b = 2;
    spec.samples_per_class = 10;
    spec.seed = 7;
    const Dataset data = generate_synthetic(spec);
    const auto [train, test] = split_train_test(data, 0.8, 42);
    CHECK(train.samples.size() == 32);
    CHECK(test.samples.size() == 8);
    std::vector<int> train_counts(4, 0), test_counts(4, 0);
    for (const Sample& s : train.samples) train_counts.at(static_cast<std::size_t>(s.label))++;
    for (const Sample& s : test.samples) test_counts.at(static_cast<std::size_t>(s.label))++;
    for (int c : train_counts) CHECK(c == 8);
    for (int c : test_counts) CHECK(c == 2);

    const auto [train2, test2] = split_train_test(data, 0.8, 42);
    for (std::size_t i = 0; i < train.samples.size(); ++i) {
        CHECK(train.samples[i].image.values() == train2.samples[i].image.values());
    }
}

TEST_CASE("dataset saves and loads through the manifest") {
    TempDir dir;
    SyntheticSpec spec;
    spec.classes = 4;
    spec.palette_a = 2;
    spec.palette_b = 2;
    spec.samples_per_class = 2;
    spec.seed = 11;
    const Dataset data = generate_synthetic(spec);
    save_dataset(dir.file("ds"), data);
    const Dataset back = load_dataset(dir.file("ds") + "/manifest.txt");
    REQUIRE(back.samples.size() == data.samples.size());
    CHECK(back.num_classes == data.num_classes);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        CHECK(back.samples[i].label == data.samples[i].label);
        // 8-bit on disk
        for (std::int64_t p = 0; p < data.samples[i].image.size(); ++p) {
            CHECK(std::abs(back.samples[i].image[p] - data.samples[i].image[p]) <= 1.0 / 255.0);
        }
    }
    CHECK_THROWS_AS(load_dataset(dir.file("missing/manifest.txt")), IoError);
}
