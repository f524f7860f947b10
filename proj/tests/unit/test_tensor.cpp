#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "ain/errors.hpp"
#include "ain/serialize.hpp"
#include "ain/tensor.hpp"
#include "reference.hpp"

using namespace ain;

TEST(Tensor, ShapeAndDataLengthAgree) {
    Tensor<float> t({2, 3, 4});
    EXPECT_EQ(t.size(), 24u);
    EXPECT_EQ(t.rank(), 3u);
    EXPECT_EQ(t.at(1, 2, 3), 0.0f);
    t.at(1, 2, 3) = 5.0f;
    EXPECT_EQ(t[23], 5.0f);
}

TEST(Tensor, RejectsZeroExtent) { EXPECT_THROW(Tensor<float>({3, 0, 2}), DomainError); }

TEST(Tensor, RejectsMismatchedData) {
    EXPECT_THROW(Tensor<double>({2, 2}, std::vector<double>{1, 2, 3}), ConfigError);
}

TEST(Tensor, ReshapeKeepsElements) {
    Tensor<float> t({2, 3}, {1, 2, 3, 4, 5, 6});
    const auto r = t.reshaped({3, 2});
    EXPECT_EQ(r.at(2, 1), 6.0f);
    EXPECT_THROW(t.reshaped({4, 2}), ConfigError);
}

TEST(Tensor, PrecisionTags) {
    EXPECT_EQ(Tensor<float>::precision, Precision::Standard);
    EXPECT_EQ(Tensor<double>::precision, Precision::Extended);
}

TEST(Serialize, RoundTripIsBitIdentical) {
    std::mt19937_64 rng(7);
    for (const Shape& shape : {Shape{5}, Shape{2, 3}, Shape{2, 4, 3, 5}}) {
        const auto f = ref::random<float>(shape, rng);
        const auto d = ref::random<double>(shape, rng);
        std::stringstream a, b;
        write_tensor(a, f);
        write_tensor(b, d);
        EXPECT_EQ(read_tensor<float>(a), f);
        EXPECT_EQ(read_tensor<double>(b), d);
    }
}

TEST(Serialize, HeaderLayout) {
    Tensor<float> t({2, 3}, {1, 2, 3, 4, 5, 6});
    std::stringstream s;
    write_tensor(s, t);
    const std::string bytes = s.str();
    ASSERT_EQ(bytes.size(), 16u + 2 * 8 + 6 * 4);
    EXPECT_EQ(bytes.substr(0, 4), "AINT");
    std::uint32_t rank, type;
    std::memcpy(&rank, bytes.data() + 4, 4);
    std::memcpy(&type, bytes.data() + 8, 4);
    EXPECT_EQ(rank, 2u);
    EXPECT_EQ(type, 1u);
    std::uint64_t e0, e1;
    std::memcpy(&e0, bytes.data() + 16, 8);
    std::memcpy(&e1, bytes.data() + 24, 8);
    EXPECT_EQ(e0, 2u);
    EXPECT_EQ(e1, 3u);
    float last;
    std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
    EXPECT_EQ(last, 6.0f);
}

TEST(Serialize, ConvertsElementType) {
    Tensor<double> d({3}, {0.5, -1.25, 3.0});
    std::stringstream s;
    write_tensor(s, d);
    const auto f = read_tensor<float>(s);
    EXPECT_EQ(f.at(1), -1.25f);
}

TEST(Serialize, RejectsBadMagicAndTruncation) {
    std::stringstream bad("XXXX0000000000000000");
    EXPECT_THROW(read_tensor<float>(bad), FormatError);

    Tensor<float> t({4, 4});
    std::stringstream s;
    write_tensor(s, t);
    std::string bytes = s.str();
    bytes.resize(bytes.size() - 3);
    std::stringstream cut(bytes);
    EXPECT_THROW(read_tensor<float>(cut), FormatError);
}

TEST(Serialize, FileRoundTrip) {
    const auto dir = ref::temp_dir("serialize");
    std::mt19937_64 rng(3);
    const auto t = ref::random<float>({3, 5, 2}, rng);
    save_tensor(dir / "t.aint", t);
    EXPECT_EQ(load_tensor<float>(dir / "t.aint"), t);
    EXPECT_THROW(load_tensor<float>(dir / "missing.aint"), FormatError);
}
