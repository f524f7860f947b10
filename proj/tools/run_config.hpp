#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ain/data.hpp"
#include "ain/nets.hpp"
#include "ain/train.hpp"

namespace ain::cli {

/// Where samples come from. `kind` selects which fields are read:
///   cifar10        path, max_train, max_test, standardize
///   synth-varsize  seed, train, test, num_classes, min_extent, max_extent
///   synth-frames   seed, train, test, num_classes, min_frames, max_frames, features
///   dataset        path, test_path (saved with `synth-data`)
///   frames         path, test_path (class subdirectories of CSV files), features
/// Image data may additionally be resized with resize = "wrap" | "maxside".
struct DatasetConfig {
    std::string kind = "synth-varsize";
    std::filesystem::path path;
    std::filesystem::path test_path;
    std::size_t max_train = 0;
    std::size_t max_test = 0;
    bool standardize = true;
    std::uint64_t seed = 0;
    std::size_t train = 512;
    std::size_t test = 128;
    std::size_t num_classes = 4;
    std::size_t min_extent = 24;
    std::size_t max_extent = 64;
    std::size_t min_frames = 80;
    std::size_t max_frames = 110;
    std::size_t features = 40;
    double test_fraction = 0.2;  // dataset/frames without test_path
    std::string resize = "none";
    std::size_t target = 32;
};

struct RunConfig {
    std::string name = "run";
    NetworkSpec network;
    DatasetConfig dataset;
    OptimizerConfig optimizer = OptimizerConfig::make_sgd(0.1);
    ScheduleConfig schedule;
    std::uint64_t seed = 0;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    std::size_t micro_batch = 0;
    bool augment = false;
    /// Fraction of the training split held out for per-epoch evaluation and
    /// scheduling; 0 evaluates on the test split instead.
    double validation_fraction = 0.1;
    std::size_t checkpoint_every = 1;
    std::filesystem::path output_dir = "runs";
    nlohmann::json source;  // the config as resolved, for the run directory
};

/// Parses and validates a run config; relative paths resolve against
/// `base_dir`. Errors are ConfigErrors naming the offending field.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

struct LoadedData {
    std::vector<Sample> train;
    std::vector<Sample> test;
    std::size_t num_classes = 0;
};

LoadedData load_data(const DatasetConfig& config);

/// Applies the configured resize policy to image samples.
void apply_resize(std::vector<Sample>& samples, const std::string& policy, std::size_t target);

/// Independent random stream for one component of a run.
std::mt19937_64 component_rng(std::uint64_t seed, std::uint32_t component);

/// 16 hex digits of FNV-1a over the compact JSON dump.
std::string config_hash(const nlohmann::json& j);

}  // namespace ain::cli
