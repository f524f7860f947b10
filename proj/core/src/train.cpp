#include "ain/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "ain/errors.hpp"

namespace ain {

OptimizerConfig OptimizerConfig::make_sgd(double lr, double momentum, double weight_decay) {
    OptimizerConfig c;
    c.kind = Kind::Sgd;
    c.sgd = {lr, momentum, weight_decay};
    return c;
}

OptimizerConfig OptimizerConfig::make_adam(double lr, double beta1, double beta2, double eps) {
    OptimizerConfig c;
    c.kind = Kind::Adam;
    c.adam = {lr, beta1, beta2, eps};
    return c;
}

void OptimizerConfig::validate() const {
    if (kind == Kind::Sgd) {
        if (!(sgd.lr >= 0)) throw ConfigError("optimizer.lr must be non-negative");
        if (!(sgd.momentum >= 0 && sgd.momentum < 1)) throw ConfigError("optimizer.momentum must be in [0, 1)");
        if (!(sgd.weight_decay >= 0)) throw ConfigError("optimizer.weight_decay must be non-negative");
    } else {
        if (!(adam.lr >= 0)) throw ConfigError("optimizer.lr must be non-negative");
        if (!(adam.beta1 > 0 && adam.beta1 < 1)) throw ConfigError("optimizer.beta1 must be in (0, 1)");
        if (!(adam.beta2 > 0 && adam.beta2 < 1)) throw ConfigError("optimizer.beta2 must be in (0, 1)");
        if (!(adam.eps > 0)) throw ConfigError("optimizer.eps must be positive");
    }
}

nlohmann::json to_json(const OptimizerConfig& c) {
    if (c.kind == OptimizerConfig::Kind::Sgd)
        return {{"kind", "sgd"}, {"lr", c.sgd.lr}, {"momentum", c.sgd.momentum}, {"weight_decay", c.sgd.weight_decay}};
    return {{"kind", "adam"}, {"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}};
}

namespace {

template <typename V>
V field_or(const nlohmann::json& j, const char* key, V fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<V>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

}  // namespace

OptimizerConfig optimizer_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("optimizer: expected an object");
    const std::string kind = field_or<std::string>(j, "kind", "sgd", "optimizer");
    OptimizerConfig c;
    if (kind == "sgd") {
        c = OptimizerConfig::make_sgd(field_or(j, "lr", 0.1, "optimizer"), field_or(j, "momentum", 0.9, "optimizer"),
                                      field_or(j, "weight_decay", 1e-4, "optimizer"));
    } else if (kind == "adam") {
        c = OptimizerConfig::make_adam(field_or(j, "lr", 1e-3, "optimizer"), field_or(j, "beta1", 0.9, "optimizer"),
                                       field_or(j, "beta2", 0.999, "optimizer"), field_or(j, "eps", 1e-8, "optimizer"));
    } else {
        throw ConfigError("optimizer.kind: unknown optimizer '" + kind + "' (expected sgd or adam)");
    }
    c.validate();
    return c;
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config, std::vector<Parameter<T>> params)
    : config_(config), params_(std::move(params)), lr_(config.lr()) {
    config_.validate();
    for (const auto& p : params_) {
        first_.push_back(Tensor<T>::zeros_like(p.value()));
        if (config_.kind == OptimizerConfig::Kind::Adam) second_.push_back(Tensor<T>::zeros_like(p.value()));
    }
}

template <typename T>
void Optimizer<T>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template <typename T>
void Optimizer<T>::step() {
    for (auto& p : params_)
        if (!p.grad().all_finite()) throw NonFiniteError("non-finite gradient in parameter " + p.name());
    ++t_;
    if (config_.kind == OptimizerConfig::Kind::Sgd) {
        const T mu = static_cast<T>(config_.sgd.momentum);
        const T decay = static_cast<T>(config_.sgd.weight_decay);
        const T lr = static_cast<T>(lr_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            T* theta = params_[i].value().raw();
            const T* g = params_[i].grad().raw();
            T* v = first_[i].raw();
            for (std::size_t k = 0; k < first_[i].size(); ++k) {
                v[k] = mu * v[k] + g[k] + decay * theta[k];
                theta[k] -= lr * v[k];
            }
        }
        return;
    }
    const auto& a = config_.adam;
    const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(a.beta1), b2 = static_cast<T>(a.beta2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        T* theta = params_[i].value().raw();
        const T* g = params_[i].grad().raw();
        T* m = first_[i].raw();
        T* v = second_[i].raw();
        for (std::size_t k = 0; k < first_[i].size(); ++k) {
            m[k] = b1 * m[k] + (1 - b1) * g[k];
            v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            theta[k] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + a.eps));
        }
    }
}

ScheduleConfig ScheduleConfig::constant() { return {}; }

ScheduleConfig ScheduleConfig::step_at(std::vector<std::size_t> epochs, double factor) {
    ScheduleConfig c;
    c.kind = Kind::StepAt;
    c.epochs = std::move(epochs);
    c.factor = factor;
    return c;
}

ScheduleConfig ScheduleConfig::plateau(std::size_t patience, double factor, std::string metric) {
    ScheduleConfig c;
    c.kind = Kind::Plateau;
    c.patience = patience;
    c.factor = factor;
    c.metric = std::move(metric);
    return c;
}

void ScheduleConfig::validate() const {
    if (kind == Kind::Constant) return;
    if (!(factor > 0 && factor < 1)) throw ConfigError("schedule.factor must be in (0, 1)");
    if (kind == Kind::StepAt) {
        for (std::size_t i = 1; i < epochs.size(); ++i)
            if (epochs[i] <= epochs[i - 1]) throw ConfigError("schedule.epochs must be strictly increasing");
    } else {
        if (patience == 0) throw ConfigError("schedule.patience must be positive");
        if (metric != "eval_loss" && metric != "train_loss")
            throw ConfigError("schedule.metric must be eval_loss or train_loss");
        if (!(threshold >= 0)) throw ConfigError("schedule.threshold must be non-negative");
    }
}

nlohmann::json to_json(const ScheduleConfig& c) {
    switch (c.kind) {
        case ScheduleConfig::Kind::Constant:
            return {{"kind", "constant"}};
        case ScheduleConfig::Kind::StepAt:
            return {{"kind", "step"}, {"epochs", c.epochs}, {"factor", c.factor}};
        case ScheduleConfig::Kind::Plateau:
            return {{"kind", "plateau"},
                    {"patience", c.patience},
                    {"factor", c.factor},
                    {"metric", c.metric},
                    {"threshold", c.threshold}};
    }
    return {};
}

ScheduleConfig schedule_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("schedule: expected an object");
    const std::string kind = field_or<std::string>(j, "kind", "constant", "schedule");
    ScheduleConfig c;
    if (kind == "constant") {
        c = ScheduleConfig::constant();
    } else if (kind == "step") {
        if (!j.contains("epochs")) throw ConfigError("schedule.epochs: required for kind 'step'");
        c = ScheduleConfig::step_at(field_or<std::vector<std::size_t>>(j, "epochs", {}, "schedule"),
                                    field_or(j, "factor", 0.1, "schedule"));
    } else if (kind == "plateau") {
        c = ScheduleConfig::plateau(field_or<std::size_t>(j, "patience", 5, "schedule"),
                                    field_or(j, "factor", 1.0 / std::sqrt(10.0), "schedule"),
                                    field_or<std::string>(j, "metric", "eval_loss", "schedule"));
        c.threshold = field_or(j, "threshold", 1e-6, "schedule");
    } else {
        throw ConfigError("schedule.kind: unknown schedule '" + kind + "' (expected constant, step or plateau)");
    }
    c.validate();
    return c;
}

LrSchedule::LrSchedule(ScheduleConfig config, double initial_lr)
    : config_(std::move(config)), initial_(initial_lr), lr_(initial_lr) {
    config_.validate();
    if (config_.kind == ScheduleConfig::Kind::StepAt) lr_ = lr_for_epoch(0);
}

double LrSchedule::lr_for_epoch(std::size_t epoch) const {
    if (config_.kind != ScheduleConfig::Kind::StepAt) return lr_;
    const auto passed = std::count_if(config_.epochs.begin(), config_.epochs.end(),
                                      [&](std::size_t m) { return m <= epoch; });
    return initial_ * std::pow(config_.factor, static_cast<double>(passed));
}

double LrSchedule::update(std::size_t epoch, double metric) {
    switch (config_.kind) {
        case ScheduleConfig::Kind::Constant:
            break;
        case ScheduleConfig::Kind::StepAt:
            lr_ = lr_for_epoch(epoch + 1);
            break;
        case ScheduleConfig::Kind::Plateau:
            if (metric < best_ - config_.threshold) {
                best_ = metric;
                stale_ = 0;
            } else if (++stale_ >= config_.patience) {
                lr_ *= config_.factor;
                stale_ = 0;
            }
            break;
    }
    return lr_;
}

nlohmann::json LrSchedule::state() const {
    nlohmann::json j{{"lr", lr_}, {"initial_lr", initial_}, {"stale", stale_}};
    j["best"] = std::isfinite(best_) ? nlohmann::json(best_) : nlohmann::json(nullptr);
    return j;
}

void LrSchedule::load_state(const nlohmann::json& j) {
    lr_ = j.at("lr").get<double>();
    initial_ = j.at("initial_lr").get<double>();
    stale_ = j.at("stale").get<std::size_t>();
    best_ = j.at("best").is_null() ? std::numeric_limits<double>::infinity() : j.at("best").get<double>();
}

namespace {

template <typename T>
Tensor<T> batch_tensor(std::span<const Sample> samples, std::span<const std::size_t> idx) {
    Tensor<float> stacked = stack_features(samples, idx);
    if constexpr (std::is_same_v<T, float>)
        return stacked;
    else
        return stacked.template cast<T>();
}

std::size_t count_correct(const auto& logits, const std::vector<std::size_t>& labels) {
    const std::size_t k = logits.dim(1);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto* row = logits.raw() + i * k;
        const std::size_t best = static_cast<std::size_t>(std::max_element(row, row + k) - row);
        correct += best == labels[i];
    }
    return correct;
}

std::string describe(std::span<const std::size_t> idx) {
    std::ostringstream s;
    for (std::size_t i = 0; i < idx.size() && i < 8; ++i) s << (i ? "," : "") << idx[i];
    if (idx.size() > 8) s << ",...";
    return s.str();
}

}  // namespace

template <typename T>
double accumulate_step(Network<T>& net, Optimizer<T>& opt, std::span<const Sample> samples,
                       const std::vector<std::vector<std::size_t>>& micro_batches, std::size_t* correct) {
    opt.zero_grad();
    double total = 0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < micro_batches.size(); ++b) {
        const auto& idx = micro_batches[b];
        if (idx.empty()) continue;
        const Tensor<T> x = batch_tensor<T>(samples, idx);
        const auto labels = gather_labels(samples, idx);
        Var<T> logits = net.forward(x, true);
        Var<T> loss = ops::softmax_cross_entropy(logits, labels, ops::Reduction::Sum);
        const double value = static_cast<double>(loss.value()[0]);
        if (!std::isfinite(value))
            throw NonFiniteError("non-finite loss in micro-batch " + std::to_string(b) + " (samples " +
                                 describe(idx) + ")");
        backward(loss);
        total += value;
        count += idx.size();
        if (correct) *correct += count_correct(logits.value(), labels);
    }
    if (count == 0) return 0;
    const T scale = T(1) / static_cast<T>(count);
    for (auto p : opt.params()) p.grad() *= scale;
    opt.step();
    return total;
}

template <typename T>
EpochResult train_epoch(Network<T>& net, Optimizer<T>& opt, std::span<const Sample> samples,
                        const TrainOptions& options, std::mt19937_64& rng) {
    if (samples.empty()) throw DomainError("train_epoch: empty training set");
    if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
    const std::size_t micro = options.micro_batch ? std::min(options.micro_batch, options.batch_size)
                                                  : options.batch_size;

    std::vector<Sample> augmented;
    std::span<const Sample> data = samples;
    if (options.augment) {
        augmented.reserve(samples.size());
        for (const Sample& s : samples)
            augmented.push_back(s.features.rank() == 3 ? augment(s, rng, options.augmentation) : s);
        data = augmented;
    }

    // Step composition depends only on batch_size; micro only splits the work.
    const auto buckets = bucket_batches(data, options.batch_size, &rng);
    EpochResult result;
    std::size_t correct = 0;
    double total = 0;
    std::vector<std::vector<std::size_t>> pending;
    std::size_t pending_count = 0;
    auto flush = [&] {
        if (pending.empty()) return;
        total += accumulate_step(net, opt, data, pending, &correct);
        ++result.steps;
        pending.clear();
        pending_count = 0;
    };
    for (const auto& b : buckets) {
        if (pending_count + b.indices.size() > options.batch_size) flush();
        for (std::size_t i = 0; i < b.indices.size(); i += micro)
            pending.emplace_back(b.indices.begin() + static_cast<std::ptrdiff_t>(i),
                                 b.indices.begin() + static_cast<std::ptrdiff_t>(std::min(i + micro, b.indices.size())));
        pending_count += b.indices.size();
    }
    flush();
    result.loss = total / static_cast<double>(data.size());
    result.error = 1.0 - static_cast<double>(correct) / static_cast<double>(data.size());
    return result;
}

template <typename T>
EvalResult evaluate(Network<T>& net, std::span<const Sample> samples, std::size_t batch_size) {
    EvalResult r;
    if (samples.empty()) return r;
    double total = 0;
    std::size_t correct = 0;
    for (const auto& b : bucket_batches(samples, std::max<std::size_t>(batch_size, 1))) {
        const Tensor<T> x = batch_tensor<T>(samples, b.indices);
        const auto labels = gather_labels(samples, b.indices);
        Var<T> logits = net.forward(x, false);
        total += static_cast<double>(ops::softmax_cross_entropy(logits, labels, ops::Reduction::Sum).value()[0]);
        correct += count_correct(logits.value(), labels);
    }
    r.count = samples.size();
    r.loss = total / static_cast<double>(r.count);
    r.error = 1.0 - static_cast<double>(correct) / static_cast<double>(r.count);
    return r;
}

MetricsLog::MetricsLog(std::filesystem::path path, bool append) : path_(std::move(path)) {
    const bool fresh = !append || !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
    if (fresh) {
        std::ofstream out(path_, std::ios::trunc);
        if (!out) throw FormatError("cannot write " + path_.string());
        out << "epoch,train_loss,eval_loss,error,lr,seconds\n";
    }
}

void MetricsLog::write(const EpochMetrics& m) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw FormatError("cannot append to " + path_.string());
    out << std::setprecision(9) << m.epoch << ',' << m.train_loss << ',' << m.eval_loss << ',' << m.error << ','
        << m.lr << ',' << std::setprecision(4) << std::fixed << m.seconds << '\n';
}

std::vector<EpochMetrics> MetricsLog::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "epoch,train_loss,eval_loss,error,lr,seconds")
        throw FormatError(path.string() + ": unexpected metrics header");
    std::vector<EpochMetrics> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream s(line);
        EpochMetrics m;
        char c1, c2, c3, c4, c5;
        if (!(s >> m.epoch >> c1 >> m.train_loss >> c2 >> m.eval_loss >> c3 >> m.error >> c4 >> m.lr >> c5 >>
              m.seconds))
            throw FormatError(path.string() + ": malformed row '" + line + "'");
        rows.push_back(m);
    }
    return rows;
}

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    return std::mt19937_64(seq);
}

template <typename T>
std::vector<EpochMetrics> fit(Network<T>& net, Optimizer<T>& opt, LrSchedule& schedule,
                              std::span<const Sample> train, std::span<const Sample> eval, const FitOptions& options,
                              MetricsLog* metrics) {
    std::vector<EpochMetrics> rows;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t e = options.start_epoch; e < options.epochs; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        opt.set_lr(schedule.lr());
        auto rng = epoch_rng(options.seed, e);
        const EpochResult tr = train_epoch(net, opt, train, options.train, rng);
        const EvalResult ev = eval.empty() ? EvalResult{tr.loss, tr.error, train.size()}
                                           : evaluate(net, eval, options.eval_batch);
        EpochMetrics m;
        m.epoch = e;
        m.train_loss = tr.loss;
        m.train_error = tr.error;
        m.eval_loss = ev.loss;
        m.error = ev.error;
        m.lr = opt.lr();
        m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!std::isfinite(m.train_loss) || !std::isfinite(m.eval_loss))
            throw NonFiniteError("non-finite loss at epoch " + std::to_string(e));
        schedule.update(e, schedule.config().metric == "train_loss" ? m.train_loss : m.eval_loss);
        if (metrics) metrics->write(m);
        const bool improved = m.eval_loss < best;
        best = std::min(best, m.eval_loss);
        if (options.log) {
            std::ostringstream s;
            s << std::setprecision(4) << "epoch " << e << " train_loss " << m.train_loss << " eval_loss "
              << m.eval_loss << " error " << m.error << " lr " << m.lr << " (" << std::fixed << m.seconds << "s)";
            options.log(s.str());
        }
        if (options.on_epoch) options.on_epoch(m, improved);
        rows.push_back(m);
    }
    return rows;
}

#define AIN_INSTANTIATE(T)                                                                                         \
    template class Optimizer<T>;                                                                                   \
    template double accumulate_step<T>(Network<T>&, Optimizer<T>&, std::span<const Sample>,                       \
                                       const std::vector<std::vector<std::size_t>>&, std::size_t*);               \
    template EpochResult train_epoch<T>(Network<T>&, Optimizer<T>&, std::span<const Sample>, const TrainOptions&,  \
                                        std::mt19937_64&);                                                         \
    template EvalResult evaluate<T>(Network<T>&, std::span<const Sample>, std::size_t);                           \
    template std::vector<EpochMetrics> fit<T>(Network<T>&, Optimizer<T>&, LrSchedule&, std::span<const Sample>,    \
                                              std::span<const Sample>, const FitOptions&, MetricsLog*);

AIN_INSTANTIATE(float)
AIN_INSTANTIATE(double)

#undef AIN_INSTANTIATE

}  // namespace ain
