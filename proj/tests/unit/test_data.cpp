#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include "ain/data.hpp"
#include "ain/errors.hpp"
#include "ain/serialize.hpp"
#include "reference.hpp"

using namespace ain;
namespace fs = std::filesystem;

namespace {

// Two records laid out by hand: label byte, then red, green and blue planes.
std::vector<unsigned char> handmade_records() {
    std::vector<unsigned char> bytes(2 * 3073);
    for (int r = 0; r < 2; ++r) {
        unsigned char* rec = bytes.data() + r * 3073;
        rec[0] = static_cast<unsigned char>(r == 0 ? 3 : 9);
        for (int plane = 0; plane < 3; ++plane)
            for (int i = 0; i < 1024; ++i) rec[1 + plane * 1024 + i] = static_cast<unsigned char>((i + 50 * plane + r) % 256);
    }
    return bytes;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Sample image(std::size_t h, std::size_t w, std::mt19937_64& rng, std::size_t label = 0) {
    return {ref::random<float>({h, w, 3}, rng, 0, 1), label};
}

}  // namespace

TEST(Cifar, DecodesHandmadeRecords) {
    const auto dir = ref::temp_dir("cifar_layout");
    write_bytes(dir / "b.bin", handmade_records());
    const auto samples = read_cifar10_batch(dir / "b.bin");
    ASSERT_EQ(samples.size(), 2u);
    EXPECT_EQ(samples[0].features.shape(), (Shape{32, 32, 3}));
    EXPECT_EQ(samples[0].label, 3u);
    EXPECT_EQ(samples[1].label, 9u);
    // Pixel (row 2, col 5) is plane index 69.
    EXPECT_FLOAT_EQ(samples[0].features.at(2, 5, 0), 69.0f / 255.0f);
    EXPECT_FLOAT_EQ(samples[0].features.at(2, 5, 1), 119.0f / 255.0f);
    EXPECT_FLOAT_EQ(samples[1].features.at(2, 5, 2), 170.0f / 255.0f);
    EXPECT_EQ(read_cifar10_batch(dir / "b.bin", 1).size(), 1u);
}

TEST(Cifar, RoundTripIsExact) {
    const auto dir = ref::temp_dir("cifar_roundtrip");
    write_bytes(dir / "a.bin", handmade_records());
    const auto first = read_cifar10_batch(dir / "a.bin");
    write_cifar10_batch(dir / "b.bin", first);
    const auto second = read_cifar10_batch(dir / "b.bin");
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(first[i].features, second[i].features);
        EXPECT_EQ(first[i].label, second[i].label);
    }
    std::ifstream a(dir / "a.bin", std::ios::binary), b(dir / "b.bin", std::ios::binary);
    EXPECT_TRUE(std::equal(std::istreambuf_iterator<char>(a), {}, std::istreambuf_iterator<char>(b), {}));
}

TEST(Cifar, TruncatedFileReportsOffset) {
    const auto dir = ref::temp_dir("cifar_truncated");
    auto bytes = handmade_records();
    bytes.resize(3073 + 100);
    write_bytes(dir / "t.bin", bytes);
    try {
        read_cifar10_batch(dir / "t.bin");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("3073"), std::string::npos) << e.what();
    }
}

TEST(Cifar, BadLabelIsFormatError) {
    const auto dir = ref::temp_dir("cifar_label");
    auto bytes = handmade_records();
    bytes[3073] = 12;
    write_bytes(dir / "l.bin", bytes);
    EXPECT_THROW(read_cifar10_batch(dir / "l.bin"), FormatError);
}

TEST(Cifar, StandardizedChannelsHaveUnitSpread) {
    std::mt19937_64 rng(1);
    std::vector<Sample> s;
    for (int i = 0; i < 20; ++i) s.push_back(image(32, 32, rng));
    const auto stats = channel_stats(s);
    standardize(s, stats);
    const auto after = channel_stats(s);
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_NEAR(after.mean[c], 0.0, 1e-4);
        EXPECT_NEAR(after.stddev[c], 1.0, 1e-4);
    }
}

TEST(Augment, FlipIsInvolution) {
    std::mt19937_64 rng(2);
    const auto s = image(7, 5, rng, 4);
    EXPECT_EQ(shift_flip(shift_flip(s, 0, 0, true), 0, 0, true).features, s.features);
    EXPECT_EQ(shift_flip(s, 0, 0, false).features, s.features);
}

TEST(Augment, ShiftMovesPixelsAndZeroFills) {
    std::mt19937_64 rng(3);
    const auto s = image(6, 6, rng);
    const auto moved = shift_flip(s, 2, -1, false);
    EXPECT_EQ(moved.features.at(2, 0, 1), s.features.at(0, 1, 1));
    EXPECT_EQ(moved.features.at(0, 0, 0), 0.0f);
    EXPECT_EQ(moved.features.at(3, 5, 2), 0.0f);
    const auto mirrored = shift_flip(s, 0, 0, true);
    EXPECT_EQ(mirrored.features.at(1, 0, 2), s.features.at(1, 5, 2));
}

TEST(Augment, KeepsExtentsAndLabels) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto s = image(24 + i % 17, 30 + i % 9, rng, static_cast<std::size_t>(i % 7));
        const auto a = augment(s, rng);
        EXPECT_EQ(a.features.shape(), s.features.shape());
        EXPECT_EQ(a.label, s.label);
    }
}

TEST(Resize, MaxsideExamples) {
    EXPECT_EQ(maxside_extents(350, 350, 224), (std::pair<std::size_t, std::size_t>{224, 224}));
    EXPECT_EQ(maxside_extents(640, 480, 224), (std::pair<std::size_t, std::size_t>{224, 168}));
    EXPECT_EQ(maxside_extents(268, 400, 224), (std::pair<std::size_t, std::size_t>{150, 224}));
    std::mt19937_64 rng(5);
    EXPECT_EQ(resize_maxside(image(64, 48, rng), 32).features.shape(), (Shape{32, 24, 3}));
}

TEST(Resize, ZeroExtentIsDomainError) {
    EXPECT_THROW(maxside_extents(0, 10, 224), DomainError);
    EXPECT_THROW(resize_bilinear(Tensor<float>({4, 4, 1}), 0, 3), DomainError);
}

TEST(Resize, WrapProducesSquare) {
    std::mt19937_64 rng(6);
    const auto r = resize_wrap(image(40, 25, rng, 2), 32);
    EXPECT_EQ(r.features.shape(), (Shape{32, 32, 3}));
    EXPECT_EQ(r.label, 2u);
}

TEST(Resize, ConstantImageStaysConstantAndIdentityIsExact) {
    const Tensor<float> flat({9, 13, 2}, 0.25f);
    const auto resized = resize_bilinear(flat, 20, 7);
    for (float v : resized.data()) EXPECT_FLOAT_EQ(v, 0.25f);
    std::mt19937_64 rng(7);
    const auto s = ref::random<float>({5, 6, 3}, rng);
    EXPECT_EQ(resize_bilinear(s, 5, 6), s);
}

TEST(Synth, DeterministicGivenSeed) {
    const auto a = synth_varsize(11, 16, 4), b = synth_varsize(11, 16, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].features, b[i].features);
        EXPECT_EQ(a[i].label, b[i].label);
    }
    const auto c = synth_varsize(12, 16, 4);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) differs = differs || !(a[i].features == c[i].features);
    EXPECT_TRUE(differs);
}

TEST(Synth, MixedShapesWithinRange) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = synth_varsize(seed, 8, 4);
        std::set<Shape> shapes;
        for (const auto& x : s) {
            shapes.insert(x.features.shape());
            EXPECT_GE(x.features.dim(0), 24u);
            EXPECT_LE(x.features.dim(0), 64u);
            EXPECT_GE(x.features.dim(1), 24u);
            EXPECT_LE(x.features.dim(1), 64u);
            EXPECT_EQ(x.features.dim(2), 3u);
        }
        EXPECT_GE(shapes.size(), 2u) << "seed " << seed;
    }
}

TEST(Synth, LabelsBalanced) {
    const auto s = synth_varsize(3, 1000, 4, {24, 32, 3, 0.05f});
    std::map<std::size_t, int> counts;
    for (const auto& x : s) ++counts[x.label];
    ASSERT_EQ(counts.size(), 4u);
    for (const auto& [label, n] : counts) EXPECT_NEAR(n, 250, 25);
}

TEST(Synth, FeatureFramesShape) {
    const auto s = synth_feature_frames(1, 12, 30);
    for (const auto& x : s) {
        EXPECT_EQ(x.features.rank(), 2u);
        EXPECT_EQ(x.features.dim(1), 40u);
        EXPECT_GE(x.features.dim(0), 80u);
        EXPECT_LE(x.features.dim(0), 110u);
        EXPECT_LT(x.label, 30u);
    }
}

TEST(Buckets, GroupsByShape) {
    std::mt19937_64 rng(8);
    std::vector<Sample> s{image(32, 32, rng), image(48, 40, rng), image(32, 32, rng), image(48, 40, rng),
                          image(32, 32, rng)};
    const auto b = bucket_batches(s, 4);
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[0].indices.size(), 3u);
    EXPECT_EQ(b[0].shape, (Shape{32, 32, 3}));
    EXPECT_EQ(b[1].indices.size(), 2u);
    EXPECT_EQ(b[1].shape, (Shape{48, 40, 3}));
}

TEST(Buckets, UniformShapesBatchOrdinarily) {
    std::mt19937_64 rng(9);
    std::vector<Sample> s;
    for (int i = 0; i < 10; ++i) s.push_back(image(8, 8, rng));
    const auto b = bucket_batches(s, 4);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[0].indices, (std::vector<std::size_t>{0, 1, 2, 3}));
    EXPECT_EQ(b[2].indices, (std::vector<std::size_t>{8, 9}));
}

TEST(Buckets, EmptyInputGivesEmptySchedule) {
    EXPECT_TRUE(bucket_batches({}, 4).empty());
    EXPECT_THROW(bucket_batches({}, 0), ConfigError);
}

TEST(Buckets, ShuffledScheduleIsAnExactPartition) {
    const auto s = synth_varsize(5, 200, 4, {24, 28, 3, 0.05f});
    std::mt19937_64 rng(10);
    const auto b = bucket_batches(s, 16, &rng);
    std::vector<int> seen(s.size(), 0);
    for (const auto& bucket : b) {
        EXPECT_LE(bucket.indices.size(), 16u);
        for (std::size_t i : bucket.indices) {
            ++seen[i];
            EXPECT_EQ(s[i].features.shape(), bucket.shape);
        }
    }
    for (int n : seen) EXPECT_EQ(n, 1);
}

TEST(Frames, CountFromDuration) {
    EXPECT_EQ(frame_count(1.0), 100u);
    EXPECT_EQ(frame_count(0.9), 90u);
    EXPECT_THROW(frame_count(0.0), DomainError);
}

TEST(Frames, CsvRoundTripAndShapes) {
    const auto dir = ref::temp_dir("frames");
    std::mt19937_64 rng(11);
    for (double seconds : {1.0, 0.9}) {
        const auto frames = ref::random<float>({frame_count(seconds), 40}, rng);
        write_feature_frames_csv(dir / "f.csv", frames);
        const auto back = read_feature_frames_csv(dir / "f.csv");
        EXPECT_EQ(back.shape(), (Shape{frame_count(seconds), 40}));
        EXPECT_EQ(back, frames);
    }
}

TEST(Frames, WrongColumnCountNamesFile) {
    const auto dir = ref::temp_dir("frames_bad");
    {
        std::ofstream out(dir / "narrow.csv");
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 39; ++c) out << (c ? "," : "") << 0.5;
            out << '\n';
        }
    }
    try {
        read_feature_frames_csv(dir / "narrow.csv");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("narrow.csv"), std::string::npos) << e.what();
    }
}

TEST(Frames, LoadsClassDirectories) {
    const auto root = ref::temp_dir("frames_tree");
    std::mt19937_64 rng(12);
    for (const char* cls : {"yes", "no", "up"}) {
        fs::create_directories(root / cls);
        for (int i = 0; i < 2; ++i)
            write_feature_frames_csv(root / cls / ("u" + std::to_string(i) + ".csv"),
                                     ref::random<float>({static_cast<std::size_t>(90 + 10 * i), 40}, rng));
    }
    std::vector<std::string> names;
    const auto ds = load_feature_frames(root, 40, &names);
    EXPECT_EQ(names, (std::vector<std::string>{"no", "up", "yes"}));
    EXPECT_EQ(ds.num_classes, 3u);
    EXPECT_EQ(ds.samples.size(), 6u);
}

TEST(Dataset, SaveLoadRoundTrip) {
    const auto dir = ref::temp_dir("dataset");
    const auto s = synth_varsize(2, 6, 3);
    save_dataset(dir, s, 3);
    EXPECT_TRUE(fs::exists(dir / "index.json"));
    const auto back = load_dataset(dir);
    EXPECT_EQ(back.num_classes, 3u);
    ASSERT_EQ(back.samples.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(back.samples[i].features, s[i].features);
        EXPECT_EQ(back.samples[i].label, s[i].label);
    }
}

TEST(Dataset, HoldoutSplitIsDeterministicPartition) {
    const auto s = synth_varsize(4, 50, 5, {24, 26, 3, 0.05f});
    const auto [a, b] = split_holdout(s, 0.2, 9);
    const auto [c, d] = split_holdout(s, 0.2, 9);
    EXPECT_EQ(a.size() + b.size(), 50u);
    EXPECT_EQ(b.size(), 10u);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i].features, d[i].features);
}
