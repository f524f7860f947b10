#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ain/tensor.hpp"

namespace ain {

/// Labeled example: an (H, W, C) image or an (L, F) feature-frame matrix.
struct Sample {
    Tensor<float> features;
    std::size_t label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t num_classes = 0;
};

// CIFAR-10 binary batches: 10,000 records of 1 label byte followed by 3,072
// pixel bytes (1,024 red, 1,024 green, 1,024 blue; each plane row-major 32x32).

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

/// Decodes one batch file into (32, 32, 3) samples scaled to [0, 1].
/// `max_records` > 0 stops early.
std::vector<Sample> read_cifar10_batch(const std::filesystem::path& path, std::size_t max_records = 0);

/// Inverse of read_cifar10_batch; pixel values are rounded to bytes.
void write_cifar10_batch(const std::filesystem::path& path, std::span<const Sample> samples);

struct ChannelStats {
    std::vector<float> mean;
    std::vector<float> stddev;
};

ChannelStats channel_stats(std::span<const Sample> samples);
void standardize(std::vector<Sample>& samples, const ChannelStats& stats);

struct CifarOptions {
    std::size_t max_train = 0;  // 0 keeps all 50,000
    std::size_t max_test = 0;   // 0 keeps all 10,000
    bool standardize = true;    // per-channel, with statistics from the training split
};

struct CifarSplit {
    std::vector<Sample> train;
    std::vector<Sample> test;
    ChannelStats stats;
};

/// Reads data_batch_1..5.bin and test_batch.bin from `dir`.
CifarSplit load_cifar10(const std::filesystem::path& dir, const CifarOptions& options = {});
bool cifar10_available(const std::filesystem::path& dir);

// Augmentation: mirroring and shifting.

/// Deterministic form: optional horizontal mirror, then a shift by (dy, dx)
/// with zero fill. Extents are unchanged.
Sample shift_flip(const Sample& sample, std::ptrdiff_t dy, std::ptrdiff_t dx, bool flip);

struct AugmentOptions {
    double flip_probability = 0.5;
    std::size_t pad = 4;  // for a 32-pixel side; scaled proportionally for other sizes
};

/// Random mirror plus pad-and-crop: equivalent to a shift drawn uniformly from
/// [-pad, pad] per axis.
Sample augment(const Sample& sample, std::mt19937_64& rng, const AugmentOptions& options = {});

// Resizing policies for size-distinct image corpora.

/// Bilinear resample of an (H, W, C) image using pixel-centre alignment.
Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t out_h, std::size_t out_w);

/// Extents with the larger side scaled to `target` and aspect kept (rounded).
std::pair<std::size_t, std::size_t> maxside_extents(std::size_t h, std::size_t w, std::size_t target);

/// Resample to target x target, discarding aspect ratio.
Sample resize_wrap(const Sample& sample, std::size_t target);
/// Resample so the larger side equals `target`.
Sample resize_maxside(const Sample& sample, std::size_t target);

// Synthetic desk-scale data.

struct SynthImageOptions {
    std::size_t min_extent = 24;
    std::size_t max_extent = 64;
    std::size_t channels = 3;
    float noise = 0.05f;
};

/// Images of varying extents; class k shows a bar at angle k*pi/num_classes
/// (with jitter) over a random background. Labels are balanced and the output
/// is a pure function of the arguments.
std::vector<Sample> synth_varsize(std::uint64_t seed, std::size_t n, std::size_t num_classes,
                                  const SynthImageOptions& options = {});

struct SynthFrameOptions {
    std::size_t min_frames = 80;
    std::size_t max_frames = 110;
    std::size_t features = 40;
    float noise = 0.1f;
};

/// (L, F) feature frames whose spectral peak sweeps along a class-specific path.
std::vector<Sample> synth_feature_frames(std::uint64_t seed, std::size_t n, std::size_t num_classes,
                                         const SynthFrameOptions& options = {});

// Feature-frame files: CSV, one row per frame, `features` values per row.

/// Frames produced by a `seconds`-long recording at the given frame shift.
std::size_t frame_count(double seconds, double shift_ms = 10.0);

Tensor<float> read_feature_frames_csv(const std::filesystem::path& path, std::size_t features = 40);
void write_feature_frames_csv(const std::filesystem::path& path, const Tensor<float>& frames);

/// Loads `root/<class>/*.csv`; classes are the sorted subdirectory names.
Dataset load_feature_frames(const std::filesystem::path& root, std::size_t features = 40,
                            std::vector<std::string>* class_names = nullptr);

// Shape bucketing for size-distinct data.

struct ShapeBucket {
    Shape shape;
    std::vector<std::size_t> indices;
};

/// Splits the epoch into micro-batches of identical-shape samples, each of at
/// most `batch_size`. With `rng` the sample order is shuffled first and the
/// micro-batch order afterwards; without it grouping follows input order.
std::vector<ShapeBucket> bucket_batches(std::span<const Sample> samples, std::size_t batch_size,
                                        std::mt19937_64* rng = nullptr);

/// Stacks the selected same-shape samples into an (N, ...) tensor.
Tensor<float> stack_features(std::span<const Sample> samples, std::span<const std::size_t> indices);
std::vector<std::size_t> gather_labels(std::span<const Sample> samples, std::span<const std::size_t> indices);

/// Deterministic split: the last `fraction` of a seeded permutation is held out.
std::pair<std::vector<Sample>, std::vector<Sample>> split_holdout(std::vector<Sample> samples, double fraction,
                                                                  std::uint64_t seed);

// Persistence: one tensor file per sample plus index.json.

void save_dataset(const std::filesystem::path& dir, std::span<const Sample> samples, std::size_t num_classes);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace ain
