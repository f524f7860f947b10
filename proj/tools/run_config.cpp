#include "run_config.hpp"

#include <cstdio>
#include <fstream>

#include "ain/errors.hpp"

namespace ain::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename V>
V get(const json& j, const char* key, V fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        if constexpr (std::is_unsigned_v<V> && !std::is_same_v<V, bool>) {
            const json& v = j.at(key);
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw ConfigError(where + "." + key + ": expected a nonnegative integer");
        }
        return j.at(key).get<V>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

void require_path(const fs::path& p, const std::string& field) {
    if (p.empty()) throw ConfigError(field + ": required");
    if (!fs::exists(p)) throw ConfigError(field + ": " + p.string() + " does not exist");
}

DatasetConfig parse_dataset(const json& j, const fs::path& base) {
    const std::string w = "dataset";
    if (!j.is_object()) throw ConfigError(w + ": expected an object");
    DatasetConfig d;
    d.kind = get<std::string>(j, "kind", d.kind, w);
    d.path = resolve(get<std::string>(j, "path", "", w), base);
    d.test_path = resolve(get<std::string>(j, "test_path", "", w), base);
    d.max_train = get(j, "max_train", d.max_train, w);
    d.max_test = get(j, "max_test", d.max_test, w);
    d.standardize = get(j, "standardize", d.standardize, w);
    d.seed = get<std::uint64_t>(j, "seed", d.seed, w);
    d.train = get(j, "train", d.train, w);
    d.test = get(j, "test", d.test, w);
    d.num_classes = get(j, "num_classes", d.num_classes, w);
    d.min_extent = get(j, "min_extent", d.min_extent, w);
    d.max_extent = get(j, "max_extent", d.max_extent, w);
    d.min_frames = get(j, "min_frames", d.min_frames, w);
    d.max_frames = get(j, "max_frames", d.max_frames, w);
    d.features = get(j, "features", d.features, w);
    d.test_fraction = get(j, "test_fraction", d.test_fraction, w);
    d.resize = get<std::string>(j, "resize", d.resize, w);
    d.target = get(j, "target", d.target, w);

    if (d.kind == "cifar10" || d.kind == "dataset" || d.kind == "frames") {
        require_path(d.path, w + ".path");
        if (!d.test_path.empty()) require_path(d.test_path, w + ".test_path");
    } else if (d.kind == "synth-varsize" || d.kind == "synth-frames") {
        if (d.train == 0) throw ConfigError(w + ".train: must be positive");
        if (d.num_classes == 0) throw ConfigError(w + ".num_classes: must be positive");
    } else {
        throw ConfigError(w + ".kind: unknown dataset kind '" + d.kind +
                          "' (expected cifar10, synth-varsize, synth-frames, dataset or frames)");
    }
    if (d.resize != "none" && d.resize != "wrap" && d.resize != "maxside")
        throw ConfigError(w + ".resize: expected none, wrap or maxside");
    if (d.resize != "none" && d.target == 0) throw ConfigError(w + ".target: must be positive");
    if (!(d.test_fraction > 0 && d.test_fraction < 1)) throw ConfigError(w + ".test_fraction: must be in (0, 1)");
    return d;
}

json read_json(const fs::path& path, const std::string& field) {
    std::ifstream in(path);
    if (!in) throw ConfigError(field + ": cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(field + ": " + path.string() + " is not valid JSON (" + e.what() + ")");
    }
}

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
    const std::string w = "config";
    if (!j.is_object()) throw ConfigError(w + ": expected an object");
    RunConfig c;
    c.source = j;
    c.name = get<std::string>(j, "name", c.name, w);

    if (!j.contains("network")) throw ConfigError("network: required");
    json net = j.at("network");
    if (net.is_string()) {
        const fs::path p = resolve(net.get<std::string>(), base_dir);
        require_path(p, "network");
        net = read_json(p, "network");
        c.source["network"] = net;
    }
    c.network = network_spec_from_json(net);

    c.dataset = parse_dataset(j.value("dataset", json::object()), base_dir);
    if (c.dataset.kind == "synth-varsize" || c.dataset.kind == "synth-frames") {
        if (c.network.num_classes != c.dataset.num_classes)
            throw ConfigError("network.num_classes: " + std::to_string(c.network.num_classes) +
                              " does not match dataset.num_classes " + std::to_string(c.dataset.num_classes));
    } else if (c.dataset.kind == "cifar10" && c.network.num_classes != 10) {
        throw ConfigError("network.num_classes: cifar10 has 10 classes, network has " +
                          std::to_string(c.network.num_classes));
    }

    if (j.contains("optimizer")) c.optimizer = optimizer_config_from_json(j.at("optimizer"));
    if (j.contains("schedule")) c.schedule = schedule_config_from_json(j.at("schedule"));
    c.seed = get<std::uint64_t>(j, "seed", c.seed, w);
    c.epochs = get(j, "epochs", c.epochs, w);
    c.batch_size = get(j, "batch_size", c.batch_size, w);
    c.micro_batch = get(j, "micro_batch", c.micro_batch, w);
    c.augment = get(j, "augment", c.augment, w);
    c.validation_fraction = get(j, "validation_fraction", c.validation_fraction, w);
    c.checkpoint_every = get(j, "checkpoint_every", c.checkpoint_every, w);
    c.output_dir = resolve(get<std::string>(j, "output_dir", c.output_dir.string(), w), base_dir);
    if (c.batch_size == 0) throw ConfigError("batch_size: must be positive");
    if (c.epochs == 0) throw ConfigError("epochs: must be positive");
    if (!(c.validation_fraction >= 0 && c.validation_fraction < 1))
        throw ConfigError("validation_fraction: must be in [0, 1)");
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    require_path(path, "--config");
    return parse_run_config(read_json(path, "--config"), path.parent_path());
}

void apply_resize(std::vector<Sample>& samples, const std::string& policy, std::size_t target) {
    if (policy == "none") return;
    for (Sample& s : samples) s = policy == "wrap" ? resize_wrap(s, target) : resize_maxside(s, target);
}

LoadedData load_data(const DatasetConfig& d) {
    LoadedData out;
    auto split = [&](std::vector<Sample> all) {
        auto [train, test] = split_holdout(std::move(all), d.test_fraction, d.seed);
        out.train = std::move(train);
        out.test = std::move(test);
    };
    if (d.kind == "cifar10") {
        CifarSplit s = load_cifar10(d.path, {d.max_train, d.max_test, d.standardize});
        out.train = std::move(s.train);
        out.test = std::move(s.test);
        out.num_classes = 10;
    } else if (d.kind == "synth-varsize") {
        SynthImageOptions o;
        o.min_extent = d.min_extent;
        o.max_extent = d.max_extent;
        auto all = synth_varsize(d.seed, d.train + d.test, d.num_classes, o);
        out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(d.train), all.end());
        all.resize(d.train);
        out.train = std::move(all);
        out.num_classes = d.num_classes;
    } else if (d.kind == "synth-frames") {
        SynthFrameOptions o;
        o.min_frames = d.min_frames;
        o.max_frames = d.max_frames;
        o.features = d.features;
        auto all = synth_feature_frames(d.seed, d.train + d.test, d.num_classes, o);
        out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(d.train), all.end());
        all.resize(d.train);
        out.train = std::move(all);
        out.num_classes = d.num_classes;
    } else if (d.kind == "dataset") {
        Dataset train = load_dataset(d.path);
        out.num_classes = train.num_classes;
        if (d.test_path.empty()) {
            split(std::move(train.samples));
        } else {
            out.train = std::move(train.samples);
            out.test = load_dataset(d.test_path).samples;
        }
    } else if (d.kind == "frames") {
        Dataset train = load_feature_frames(d.path, d.features);
        out.num_classes = train.num_classes;
        if (d.test_path.empty()) {
            split(std::move(train.samples));
        } else {
            out.train = std::move(train.samples);
            out.test = load_feature_frames(d.test_path, d.features).samples;
        }
    }
    apply_resize(out.train, d.resize, d.target);
    apply_resize(out.test, d.resize, d.target);
    return out;
}

std::mt19937_64 component_rng(std::uint64_t seed, std::uint32_t component) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), component};
    return std::mt19937_64(seq);
}

std::string config_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ain::cli
