#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ain::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // a check failed or the run aborted
inline constexpr int kExitConfig = 2;   // bad arguments, config or inputs

struct Io {
    std::ostream& out;
    std::ostream& err;
};

struct TrainArgs {
    std::filesystem::path config;
    std::filesystem::path run_dir;  // empty: <output root>/<name>-<hash>-<timestamp>
    bool resume = false;
    std::optional<std::size_t> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> batch_size;
    std::filesystem::path output_dir;
};

struct EvalArgs {
    std::filesystem::path checkpoint;
    std::filesystem::path config;   // dataset from a run config
    std::filesystem::path dataset;  // or a saved dataset directory
    std::string split = "test";
    std::filesystem::path out;
};

struct GradcheckArgs {
    std::uint64_t seed = 0;
    std::size_t seeds = 1;
    double tolerance = 1e-4;
    double step = 1e-5;
    bool tiny = true;
    bool speech = false;
    bool refine = true;
    std::filesystem::path report;  // empty: gradcheck.csv in a fresh run directory
};

struct ExportArgs {
    std::filesystem::path checkpoint;
    std::filesystem::path image;
    std::filesystem::path out;
};

struct SynthArgs {
    std::string kind = "varsize";
    std::size_t n = 512;
    std::size_t classes = 4;
    std::uint64_t seed = 0;
    std::size_t min_extent = 24;
    std::size_t max_extent = 64;
    std::string resize = "none";
    std::size_t target = 32;
    std::string format = "tensors";  // or csv, for frames
    std::filesystem::path out;
};

struct BenchArgs {
    std::vector<std::size_t> sizes{32, 64};
    std::size_t channels = 64;
    std::size_t batch = 1;
    std::size_t repeats = 5;
    std::uint64_t seed = 0;
    std::filesystem::path out;
};

int cmd_train(const TrainArgs& args, Io io);
int cmd_eval(const EvalArgs& args, Io io);
int cmd_gradcheck(const GradcheckArgs& args, Io io);
int cmd_export_attention(const ExportArgs& args, Io io);
int cmd_synth_data(const SynthArgs& args, Io io);
int cmd_bench(const BenchArgs& args, Io io);

/// Parses argv, applies AIN_THREADS, dispatches, and maps exceptions to exit codes.
int run(int argc, const char* const* argv, Io io);

/// AIN_OUT_DIR if set, otherwise `fallback`.
std::filesystem::path output_root(const std::filesystem::path& fallback);

/// Creates <root>/<stem>-<hash>-<YYYYmmdd-HHMMSS>, adding a suffix on collision.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& stem,
                                   const std::string& hash);

}  // namespace ain::cli
