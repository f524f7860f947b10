#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ain/data.hpp"
#include "ain/nets.hpp"

namespace ain {

// Optimizers.

struct SgdConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerConfig {
    enum class Kind { Sgd, Adam };
    Kind kind = Kind::Sgd;
    SgdConfig sgd;
    AdamConfig adam;

    static OptimizerConfig make_sgd(double lr, double momentum = 0.9, double weight_decay = 1e-4);
    static OptimizerConfig make_adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    double lr() const { return kind == Kind::Sgd ? sgd.lr : adam.lr; }
    void validate() const;
};

nlohmann::json to_json(const OptimizerConfig& c);
OptimizerConfig optimizer_config_from_json(const nlohmann::json& j);

/// Updates a fixed parameter list from its accumulated gradients.
///   SGD:  v <- mu v + g + lambda theta;  theta <- theta - lr v
///   Adam: bias-corrected first/second moments.
/// A non-finite gradient aborts the step before any parameter changes.
template <typename T>
class Optimizer {
public:
    Optimizer(OptimizerConfig config, std::vector<Parameter<T>> params);

    void step();
    void zero_grad();

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    std::size_t steps() const { return t_; }
    const OptimizerConfig& config() const { return config_; }
    const std::vector<Parameter<T>>& params() const { return params_; }

    /// Per-parameter slots (SGD: velocity; Adam: first then second moment),
    /// each congruent with its parameter.
    std::vector<Tensor<T>>& first() { return first_; }
    std::vector<Tensor<T>>& second() { return second_; }
    void set_steps(std::size_t t) { t_ = t; }

private:
    OptimizerConfig config_;
    std::vector<Parameter<T>> params_;
    std::vector<Tensor<T>> first_;
    std::vector<Tensor<T>> second_;
    double lr_;
    std::size_t t_ = 0;
};

// Learning-rate schedules.

struct ScheduleConfig {
    enum class Kind { Constant, StepAt, Plateau };
    Kind kind = Kind::Constant;
    std::vector<std::size_t> epochs;  // StepAt milestones, strictly increasing
    double factor = 0.1;
    std::size_t patience = 5;              // Plateau
    std::string metric = "eval_loss";      // Plateau: eval_loss or train_loss
    double threshold = 1e-6;               // Plateau: minimum absolute improvement

    static ScheduleConfig constant();
    static ScheduleConfig step_at(std::vector<std::size_t> epochs, double factor);
    static ScheduleConfig plateau(std::size_t patience, double factor, std::string metric = "eval_loss");

    void validate() const;
};

nlohmann::json to_json(const ScheduleConfig& c);
ScheduleConfig schedule_config_from_json(const nlohmann::json& j);

/// Epochs are counted from 0. update(e, metric) is called once at the end of
/// epoch e and returns the rate for epoch e + 1.
class LrSchedule {
public:
    LrSchedule(ScheduleConfig config, double initial_lr);

    double lr() const { return lr_; }
    double update(std::size_t epoch, double metric);
    /// StepAt closed form: initial_lr * factor^(milestones <= epoch).
    double lr_for_epoch(std::size_t epoch) const;

    const ScheduleConfig& config() const { return config_; }
    nlohmann::json state() const;
    void load_state(const nlohmann::json& j);

private:
    ScheduleConfig config_;
    double initial_;
    double lr_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t stale_ = 0;
};

// Training loop.

struct EvalResult {
    double loss = 0;
    double error = 0;
    std::size_t count = 0;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0;
    double eval_loss = 0;
    double error = 0;
    double lr = 0;
    double seconds = 0;
    double train_error = 0;
};

struct TrainOptions {
    std::size_t batch_size = 64;  // nominal batch: gradients are averaged over this many samples
    std::size_t micro_batch = 0;  // forward/backward chunk; 0 means batch_size
    bool augment = false;
    AugmentOptions augmentation;
};

/// One optimizer step over the given micro-batches: gradients of the summed
/// per-sample loss are accumulated and divided by the total sample count.
/// Returns the summed loss. `micro_batches` hold indices into `samples`.
template <typename T>
double accumulate_step(Network<T>& net, Optimizer<T>& opt, std::span<const Sample> samples,
                       const std::vector<std::vector<std::size_t>>& micro_batches, std::size_t* correct = nullptr);

struct EpochResult {
    double loss = 0;   // mean per sample
    double error = 0;  // training error under the training-mode forward
    std::size_t steps = 0;
};

/// Shuffles, buckets by shape, and steps once per nominal batch.
template <typename T>
EpochResult train_epoch(Network<T>& net, Optimizer<T>& opt, std::span<const Sample> samples,
                        const TrainOptions& options, std::mt19937_64& rng);

/// Inference-mode loss and top-1 error; no augmentation, no randomness.
template <typename T>
EvalResult evaluate(Network<T>& net, std::span<const Sample> samples, std::size_t batch_size = 128);

/// Appends one row per epoch: epoch,train_loss,eval_loss,error,lr,seconds.
class MetricsLog {
public:
    explicit MetricsLog(std::filesystem::path path, bool append = false);
    void write(const EpochMetrics& m);
    const std::filesystem::path& path() const { return path_; }

    static std::vector<EpochMetrics> read(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
};

struct FitOptions {
    std::size_t epochs = 1;
    std::size_t start_epoch = 0;
    TrainOptions train;
    std::size_t eval_batch = 128;
    std::uint64_t seed = 0;  // per-epoch data streams derive from it
    /// Called after every epoch with whether eval_loss reached a new best.
    std::function<void(const EpochMetrics&, bool best)> on_epoch;
    std::function<void(const std::string&)> log;
};

/// Runs epochs [start_epoch, epochs): train, evaluate, log, schedule.
template <typename T>
std::vector<EpochMetrics> fit(Network<T>& net, Optimizer<T>& opt, LrSchedule& schedule,
                              std::span<const Sample> train, std::span<const Sample> eval, const FitOptions& options,
                              MetricsLog* metrics = nullptr);

/// Data stream for a given epoch; independent of how many epochs ran before.
std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch);

}  // namespace ain
