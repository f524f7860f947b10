#include "ain/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ain/errors.hpp"
#include "ain/serialize.hpp"

namespace ain {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kPlane = kCifarSide * kCifarSide;

void require_image(const Sample& s, const char* op) {
    if (s.features.rank() != 3)
        throw ConfigError(std::string(op) + ": expected an (H, W, C) image, got shape " +
                          to_string(s.features.shape()));
}

}  // namespace

std::vector<Sample> read_cifar10_batch(const fs::path& path, std::size_t max_records) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % kCifarRecordBytes != 0) {
        const std::size_t tail = bytes.size() - bytes.size() % kCifarRecordBytes;
        throw FormatError(path.string() + ": length " + std::to_string(bytes.size()) + " is not a multiple of " +
                          std::to_string(kCifarRecordBytes) + "; truncated record at byte offset " +
                          std::to_string(tail));
    }
    std::size_t count = bytes.size() / kCifarRecordBytes;
    if (max_records > 0) count = std::min(count, max_records);

    std::vector<Sample> out;
    out.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        const std::size_t base = r * kCifarRecordBytes;
        const unsigned label = bytes[base];
        if (label > 9)
            throw FormatError(path.string() + ": label " + std::to_string(label) + " out of range at byte offset " +
                              std::to_string(base));
        Tensor<float> img({kCifarSide, kCifarSide, 3});
        float* dst = img.raw();
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < kPlane; ++p)
                dst[p * 3 + c] = static_cast<float>(bytes[base + 1 + c * kPlane + p]) / 255.0f;
        out.push_back({std::move(img), label});
    }
    return out;
}

void write_cifar10_batch(const fs::path& path, std::span<const Sample> samples) {
    std::vector<unsigned char> bytes(samples.size() * kCifarRecordBytes);
    for (std::size_t r = 0; r < samples.size(); ++r) {
        const Sample& s = samples[r];
        if (s.features.shape() != Shape{kCifarSide, kCifarSide, 3})
            throw ConfigError("CIFAR records must be 32x32x3, got " + to_string(s.features.shape()));
        if (s.label > 9) throw ConfigError("CIFAR label out of range: " + std::to_string(s.label));
        const std::size_t base = r * kCifarRecordBytes;
        bytes[base] = static_cast<unsigned char>(s.label);
        const float* src = s.features.raw();
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < kPlane; ++p) {
                const float v = std::clamp(src[p * 3 + c], 0.0f, 1.0f);
                bytes[base + 1 + c * kPlane + p] = static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ChannelStats channel_stats(std::span<const Sample> samples) {
    if (samples.empty()) throw DomainError("channel statistics of an empty set");
    const std::size_t c = samples.front().features.shape().back();
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    std::size_t count = 0;
    for (const Sample& s : samples) {
        if (s.features.shape().back() != c) throw ConfigError("channel count differs across samples");
        const auto d = s.features.data();
        for (std::size_t i = 0; i < d.size(); ++i) {
            sum[i % c] += d[i];
            sq[i % c] += static_cast<double>(d[i]) * d[i];
        }
        count += d.size() / c;
    }
    ChannelStats stats;
    for (std::size_t k = 0; k < c; ++k) {
        const double mean = sum[k] / static_cast<double>(count);
        const double var = std::max(0.0, sq[k] / static_cast<double>(count) - mean * mean);
        stats.mean.push_back(static_cast<float>(mean));
        stats.stddev.push_back(static_cast<float>(std::max(std::sqrt(var), 1e-6)));
    }
    return stats;
}

void standardize(std::vector<Sample>& samples, const ChannelStats& stats) {
    const std::size_t c = stats.mean.size();
    for (Sample& s : samples) {
        if (s.features.shape().back() != c) throw ConfigError("channel count does not match statistics");
        auto d = s.features.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = (d[i] - stats.mean[i % c]) / stats.stddev[i % c];
    }
}

bool cifar10_available(const fs::path& dir) {
    if (!fs::is_directory(dir)) return false;
    for (int b = 1; b <= 5; ++b)
        if (!fs::exists(dir / ("data_batch_" + std::to_string(b) + ".bin"))) return false;
    return fs::exists(dir / "test_batch.bin");
}

CifarSplit load_cifar10(const fs::path& dir, const CifarOptions& options) {
    if (!cifar10_available(dir))
        throw FormatError(dir.string() + ": expected data_batch_1..5.bin and test_batch.bin");
    CifarSplit split;
    for (int b = 1; b <= 5; ++b) {
        std::size_t want = 0;
        if (options.max_train > 0) {
            if (split.train.size() >= options.max_train) break;
            want = options.max_train - split.train.size();
        }
        auto part = read_cifar10_batch(dir / ("data_batch_" + std::to_string(b) + ".bin"), want);
        std::move(part.begin(), part.end(), std::back_inserter(split.train));
    }
    split.test = read_cifar10_batch(dir / "test_batch.bin", options.max_test);
    if (options.standardize) {
        split.stats = channel_stats(split.train);
        standardize(split.train, split.stats);
        standardize(split.test, split.stats);
    }
    return split;
}

Sample shift_flip(const Sample& sample, std::ptrdiff_t dy, std::ptrdiff_t dx, bool flip) {
    require_image(sample, "shift_flip");
    const auto h = static_cast<std::ptrdiff_t>(sample.features.dim(0));
    const auto w = static_cast<std::ptrdiff_t>(sample.features.dim(1));
    const std::size_t c = sample.features.dim(2);
    Tensor<float> out(sample.features.shape());
    const float* src = sample.features.raw();
    float* dst = out.raw();
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        const std::ptrdiff_t sy = y - dy;
        if (sy < 0 || sy >= h) continue;
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            std::ptrdiff_t sx = x - dx;
            if (sx < 0 || sx >= w) continue;
            if (flip) sx = w - 1 - sx;
            std::copy_n(src + (sy * w + sx) * static_cast<std::ptrdiff_t>(c), c,
                        dst + (y * w + x) * static_cast<std::ptrdiff_t>(c));
        }
    }
    return {std::move(out), sample.label};
}

Sample augment(const Sample& sample, std::mt19937_64& rng, const AugmentOptions& options) {
    require_image(sample, "augment");
    auto scaled = [&](std::size_t extent) {
        return static_cast<std::ptrdiff_t>(
            std::lround(static_cast<double>(options.pad) * static_cast<double>(extent) / kCifarSide));
    };
    const std::ptrdiff_t ph = scaled(sample.features.dim(0));
    const std::ptrdiff_t pw = scaled(sample.features.dim(1));
    std::bernoulli_distribution coin(options.flip_probability);
    const bool flip = coin(rng);
    const std::ptrdiff_t dy = std::uniform_int_distribution<std::ptrdiff_t>(-ph, ph)(rng);
    const std::ptrdiff_t dx = std::uniform_int_distribution<std::ptrdiff_t>(-pw, pw)(rng);
    return shift_flip(sample, dy, dx, flip);
}

Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t out_h, std::size_t out_w) {
    if (image.rank() != 3) throw ConfigError("resize expects an (H, W, C) image, got " + to_string(image.shape()));
    if (out_h == 0 || out_w == 0) throw DomainError("resize target has a zero extent");
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    Tensor<float> out({out_h, out_w, c});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);

    auto source = [](std::size_t i, double scale, std::size_t extent, std::size_t& lo, std::size_t& hi, double& f) {
        double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
        pos = std::clamp(pos, 0.0, static_cast<double>(extent - 1));
        lo = static_cast<std::size_t>(std::floor(pos));
        hi = std::min(lo + 1, extent - 1);
        f = pos - static_cast<double>(lo);
    };

    for (std::size_t y = 0; y < out_h; ++y) {
        std::size_t y0, y1;
        double fy;
        source(y, sy, h, y0, y1, fy);
        for (std::size_t x = 0; x < out_w; ++x) {
            std::size_t x0, x1;
            double fx;
            source(x, sx, w, x0, x1, fx);
            for (std::size_t k = 0; k < c; ++k) {
                const double top = (1 - fx) * image.at(y0, x0, k) + fx * image.at(y0, x1, k);
                const double bot = (1 - fx) * image.at(y1, x0, k) + fx * image.at(y1, x1, k);
                out.at(y, x, k) = static_cast<float>((1 - fy) * top + fy * bot);
            }
        }
    }
    return out;
}

std::pair<std::size_t, std::size_t> maxside_extents(std::size_t h, std::size_t w, std::size_t target) {
    if (h == 0 || w == 0 || target == 0) throw DomainError("maxside resize with a zero extent");
    const std::size_t large = std::max(h, w);
    auto scale = [&](std::size_t e) {
        if (e == large) return target;
        const auto v = static_cast<std::size_t>(
            std::llround(static_cast<double>(e) * static_cast<double>(target) / static_cast<double>(large)));
        return std::max<std::size_t>(v, 1);
    };
    return {scale(h), scale(w)};
}

Sample resize_wrap(const Sample& sample, std::size_t target) {
    require_image(sample, "resize_wrap");
    return {resize_bilinear(sample.features, target, target), sample.label};
}

Sample resize_maxside(const Sample& sample, std::size_t target) {
    require_image(sample, "resize_maxside");
    const auto [h, w] = maxside_extents(sample.features.dim(0), sample.features.dim(1), target);
    return {resize_bilinear(sample.features, h, w), sample.label};
}

namespace {

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t num_classes, std::mt19937_64& rng) {
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % num_classes;
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

}  // namespace

std::vector<Sample> synth_varsize(std::uint64_t seed, std::size_t n, std::size_t num_classes,
                                  const SynthImageOptions& options) {
    if (num_classes == 0) throw ConfigError("synth_varsize: num_classes must be positive");
    if (options.min_extent == 0 || options.min_extent > options.max_extent)
        throw ConfigError("synth_varsize: need 0 < min_extent <= max_extent");
    if (options.channels == 0) throw ConfigError("synth_varsize: channels must be positive");

    std::mt19937_64 rng(seed);
    const auto labels = balanced_labels(n, num_classes, rng);
    std::uniform_int_distribution<std::size_t> extent(options.min_extent, options.max_extent);
    std::vector<std::pair<std::size_t, std::size_t>> shapes(n);
    for (auto& s : shapes) s = {extent(rng), extent(rng)};
    const bool uniform = n >= 2 && std::all_of(shapes.begin(), shapes.end(), [&](auto& s) { return s == shapes[0]; });
    if (uniform && options.max_extent > options.min_extent) {
        auto& last = shapes.back().first;
        last = last == options.max_extent ? last - 1 : last + 1;
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, options.noise);
    const double jitter = std::numbers::pi / static_cast<double>(num_classes) * 0.15;

    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [h, w] = shapes[i];
        const std::size_t c = options.channels;
        Tensor<float> img({h, w, c});

        const double angle = std::numbers::pi * static_cast<double>(labels[i]) / static_cast<double>(num_classes) +
                             (unit(rng) * 2.0 - 1.0) * jitter;
        const double cy = (0.35 + 0.3 * unit(rng)) * static_cast<double>(h);
        const double cx = (0.35 + 0.3 * unit(rng)) * static_cast<double>(w);
        const double half_width = std::max(1.0, 0.08 * static_cast<double>(std::min(h, w)));
        std::vector<double> bg(c), fg(c);
        for (std::size_t k = 0; k < c; ++k) {
            bg[k] = 0.4 * unit(rng);
            fg[k] = 0.6 + 0.4 * unit(rng);
        }
        const double sa = std::sin(angle), ca = std::cos(angle);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double dist = std::abs(-(static_cast<double>(x) + 0.5 - cx) * sa +
                                             (static_cast<double>(y) + 0.5 - cy) * ca);
                const double mix = std::clamp(half_width + 0.5 - dist, 0.0, 1.0);
                for (std::size_t k = 0; k < c; ++k)
                    img.at(y, x, k) = static_cast<float>(bg[k] + mix * (fg[k] - bg[k]) + noise(rng));
            }
        out.push_back({std::move(img), labels[i]});
    }
    return out;
}

std::vector<Sample> synth_feature_frames(std::uint64_t seed, std::size_t n, std::size_t num_classes,
                                         const SynthFrameOptions& options) {
    if (num_classes == 0) throw ConfigError("synth_feature_frames: num_classes must be positive");
    if (options.features < 2) throw ConfigError("synth_feature_frames: need at least 2 features");
    if (options.min_frames == 0 || options.min_frames > options.max_frames)
        throw ConfigError("synth_feature_frames: need 0 < min_frames <= max_frames");

    std::mt19937_64 rng(seed);
    const auto labels = balanced_labels(n, num_classes, rng);
    std::uniform_int_distribution<std::size_t> length(options.min_frames, options.max_frames);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, options.noise);

    // Class k sweeps its peak from start(k) to end(k); the pair is unique per class.
    const auto f = static_cast<double>(options.features);
    const std::size_t grid = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(num_classes))));
    auto band = [&](std::size_t j) {
        return 0.1 * f + 0.8 * f * (static_cast<double>(j) + 0.5) / static_cast<double>(grid);
    };

    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = labels[i];
        const std::size_t len = length(rng);
        const double start = band(k % grid) + (unit(rng) - 0.5);
        const double end = band(k / grid) + (unit(rng) - 0.5);
        const double spread = 0.06 * f;
        const double gain = 0.8 + 0.4 * unit(rng);
        Tensor<float> frames({len, options.features});
        for (std::size_t t = 0; t < len; ++t) {
            const double centre = start + (end - start) * static_cast<double>(t) / static_cast<double>(len - 1 + (len == 1));
            for (std::size_t b = 0; b < options.features; ++b) {
                const double d = (static_cast<double>(b) - centre) / spread;
                frames.at(t, b) = static_cast<float>(gain * std::exp(-0.5 * d * d) + noise(rng));
            }
        }
        out.push_back({std::move(frames), k});
    }
    return out;
}

std::size_t frame_count(double seconds, double shift_ms) {
    if (seconds <= 0 || shift_ms <= 0) throw DomainError("frame_count needs positive duration and shift");
    return static_cast<std::size_t>(std::llround(seconds * 1000.0 / shift_ms));
}

Tensor<float> read_feature_frames_csv(const fs::path& path, std::size_t features) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<float> values;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<float> row;
        bool numeric = true;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            std::string_view field(line.data() + pos, comma - pos);
            while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
            while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
            float v = 0;
            auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc() || ptr != field.data() + field.size()) numeric = false;
            row.push_back(v);
            pos = comma + 1;
        }
        if (row.size() != features)
            throw FormatError(path.string() + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(row.size()) + " columns, expected " + std::to_string(features));
        if (!numeric) {
            if (rows == 0 && values.empty()) continue;  // header
            throw FormatError(path.string() + ": line " + std::to_string(line_no) + " holds a non-numeric field");
        }
        values.insert(values.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0) throw FormatError(path.string() + ": no frames");
    return Tensor<float>({rows, features}, std::move(values));
}

void write_feature_frames_csv(const fs::path& path, const Tensor<float>& frames) {
    if (frames.rank() != 2) throw ConfigError("feature frames must be (L, F), got " + to_string(frames.shape()));
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << std::setprecision(std::numeric_limits<float>::max_digits10);
    for (std::size_t t = 0; t < frames.dim(0); ++t) {
        for (std::size_t b = 0; b < frames.dim(1); ++b) {
            if (b) out << ',';
            out << frames.at(t, b);
        }
        out << '\n';
    }
}

Dataset load_feature_frames(const fs::path& root, std::size_t features, std::vector<std::string>* class_names) {
    if (!fs::is_directory(root)) throw FormatError(root.string() + ": not a directory");
    std::vector<fs::path> classes;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) classes.push_back(e.path());
    std::sort(classes.begin(), classes.end());
    if (classes.empty()) throw FormatError(root.string() + ": no class subdirectories");

    Dataset ds;
    ds.num_classes = classes.size();
    if (class_names) class_names->clear();
    for (std::size_t k = 0; k < classes.size(); ++k) {
        if (class_names) class_names->push_back(classes[k].filename().string());
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(classes[k]))
            if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) ds.samples.push_back({read_feature_frames_csv(f, features), k});
    }
    return ds;
}

std::vector<ShapeBucket> bucket_batches(std::span<const Sample> samples, std::size_t batch_size,
                                        std::mt19937_64* rng) {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (rng) std::shuffle(order.begin(), order.end(), *rng);

    std::vector<ShapeBucket> groups;
    std::map<Shape, std::size_t> slot;
    for (std::size_t i : order) {
        const Shape& s = samples[i].features.shape();
        auto [it, fresh] = slot.try_emplace(s, groups.size());
        if (fresh) groups.push_back({s, {}});
        groups[it->second].indices.push_back(i);
    }

    std::vector<ShapeBucket> out;
    for (const auto& g : groups)
        for (std::size_t b = 0; b < g.indices.size(); b += batch_size) {
            const std::size_t e = std::min(b + batch_size, g.indices.size());
            out.push_back({g.shape, {g.indices.begin() + static_cast<std::ptrdiff_t>(b),
                                     g.indices.begin() + static_cast<std::ptrdiff_t>(e)}});
        }
    if (rng) std::shuffle(out.begin(), out.end(), *rng);
    return out;
}

Tensor<float> stack_features(std::span<const Sample> samples, std::span<const std::size_t> indices) {
    if (indices.empty()) throw DomainError("cannot stack an empty batch");
    const Shape& s = samples[indices[0]].features.shape();
    Shape shape{indices.size()};
    shape.insert(shape.end(), s.begin(), s.end());
    std::vector<float> data;
    data.reserve(numel(shape));
    for (std::size_t i : indices) {
        const auto& f = samples[i].features;
        if (f.shape() != s)
            throw ContractError("stacked samples differ in shape: " + to_string(s) + " vs " + to_string(f.shape()));
        data.insert(data.end(), f.data().begin(), f.data().end());
    }
    return Tensor<float>(std::move(shape), std::move(data));
}

std::vector<std::size_t> gather_labels(std::span<const Sample> samples, std::span<const std::size_t> indices) {
    std::vector<std::size_t> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(samples[i].label);
    return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_holdout(std::vector<Sample> samples, double fraction,
                                                                  std::uint64_t seed) {
    if (fraction < 0 || fraction >= 1) throw ConfigError("holdout fraction must be in [0, 1)");
    std::mt19937_64 rng(seed);
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
    std::vector<Sample> rest(std::make_move_iterator(samples.begin()),
                             std::make_move_iterator(samples.end() - static_cast<std::ptrdiff_t>(held)));
    std::vector<Sample> out(std::make_move_iterator(samples.end() - static_cast<std::ptrdiff_t>(held)),
                            std::make_move_iterator(samples.end()));
    return {std::move(rest), std::move(out)};
}

void save_dataset(const fs::path& dir, std::span<const Sample> samples, std::size_t num_classes) {
    fs::create_directories(dir);
    nlohmann::json index;
    index["format"] = "ain-dataset";
    index["version"] = 1;
    index["num_classes"] = num_classes;
    auto& entries = index["samples"] = nlohmann::json::array();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].label >= num_classes)
            throw ConfigError("sample " + std::to_string(i) + " has label " + std::to_string(samples[i].label) +
                              " >= num_classes " + std::to_string(num_classes));
        std::ostringstream name;
        name << "sample_" << std::setw(6) << std::setfill('0') << i << ".aint";
        save_tensor(dir / name.str(), samples[i].features);
        entries.push_back({{"file", name.str()}, {"label", samples[i].label}, {"shape", samples[i].features.shape()}});
    }
    std::ofstream out(dir / "index.json");
    if (!out) throw FormatError("cannot write " + (dir / "index.json").string());
    out << index.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir) {
    std::ifstream in(dir / "index.json");
    if (!in) throw FormatError("cannot open " + (dir / "index.json").string());
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError((dir / "index.json").string() + ": " + e.what());
    }
    Dataset ds;
    try {
        ds.num_classes = index.at("num_classes").get<std::size_t>();
        for (const auto& e : index.at("samples")) {
            Sample s{load_tensor<float>(dir / e.at("file").get<std::string>()), e.at("label").get<std::size_t>()};
            if (s.label >= ds.num_classes)
                throw FormatError(e.at("file").get<std::string>() + ": label out of range");
            if (e.contains("shape") && e.at("shape").get<Shape>() != s.features.shape())
                throw FormatError(e.at("file").get<std::string>() + ": shape differs from index");
            ds.samples.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError((dir / "index.json").string() + ": " + e.what());
    }
    return ds;
}

}  // namespace ain
