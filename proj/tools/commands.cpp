#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "ain/checkpoint.hpp"
#include "ain/errors.hpp"
#include "ain/gradcheck_suite.hpp"
#include "ain/image_io.hpp"
#include "ain/ops.hpp"
#include "ain/serialize.hpp"
#include "run_config.hpp"

namespace ain::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path output_root(const fs::path& fallback) {
    if (const char* env = std::getenv("AIN_OUT_DIR"); env && *env) return env;
    return fallback;
}

fs::path make_run_dir(const fs::path& root, const std::string& stem, const std::string& hash) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    std::ostringstream name;
    name << stem << '-' << hash.substr(0, 8) << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
    fs::path dir = root / name.str();
    for (int i = 1; fs::exists(dir); ++i) dir = root / (name.str() + "-" + std::to_string(i));
    fs::create_directories(dir);
    return dir;
}

namespace {

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

// Most recent run directory for this config that holds a resumable checkpoint.
fs::path latest_run(const fs::path& root, const std::string& prefix) {
    if (!fs::is_directory(root)) return {};
    fs::path best;
    for (const auto& entry : fs::directory_iterator(root)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_directory() && name.rfind(prefix, 0) == 0 && is_checkpoint(entry.path() / "checkpoint" / "last"))
            if (best.empty() || name > best.filename().string()) best = entry.path();
    }
    return best;
}

json eval_json(const EvalResult& r) { return {{"loss", r.loss}, {"error", r.error}, {"count", r.count}}; }

Tensor<float> with_batch_axis(const Tensor<float>& t) {
    Shape s = t.shape();
    s.insert(s.begin(), 1);
    return t.reshaped(s);
}

}  // namespace

int cmd_train(const TrainArgs& args, Io io) {
    RunConfig cfg = load_run_config(args.config);
    if (args.epochs) cfg.source["epochs"] = cfg.epochs = *args.epochs;
    if (args.seed) cfg.source["seed"] = cfg.seed = *args.seed;
    if (args.batch_size) cfg.source["batch_size"] = cfg.batch_size = *args.batch_size;
    if (cfg.epochs == 0 || cfg.batch_size == 0) throw ConfigError("epochs and batch_size must be positive");

    const fs::path root = args.output_dir.empty() ? output_root(cfg.output_dir) : args.output_dir;
    const std::string hash = config_hash(cfg.source);
    fs::path run_dir = args.run_dir;
    if (run_dir.empty() && args.resume) run_dir = latest_run(root, cfg.name + "-" + hash.substr(0, 8) + "-");
    if (run_dir.empty()) run_dir = make_run_dir(root, cfg.name, hash);
    fs::create_directories(run_dir);
    write_json(run_dir / "config.json", cfg.source);

    LoadedData data = load_data(cfg.dataset);
    if (data.num_classes != cfg.network.num_classes)
        throw ConfigError("network.num_classes: " + std::to_string(cfg.network.num_classes) +
                          " does not match the dataset's " + std::to_string(data.num_classes) + " classes");
    std::vector<Sample> train = std::move(data.train), validation;
    if (cfg.validation_fraction > 0) {
        auto split_rng = component_rng(cfg.seed, 2);
        std::tie(train, validation) = split_holdout(std::move(train), cfg.validation_fraction, split_rng());
    }
    const std::vector<Sample>& eval_set = cfg.validation_fraction > 0 ? validation : data.test;

    auto init_rng = component_rng(cfg.seed, 1);
    auto net = std::make_unique<Network<float>>(cfg.network, init_rng);
    LrSchedule schedule(cfg.schedule, cfg.optimizer.lr());
    const fs::path last = run_dir / "checkpoint" / "last";
    const fs::path best_dir = run_dir / "checkpoint" / "best";
    std::size_t start_epoch = 0;
    double best = std::numeric_limits<double>::infinity();
    json resumed_manifest;
    if (args.resume && is_checkpoint(last)) {
        LoadedCheckpoint loaded = load_checkpoint(last);
        net = std::move(loaded.network);
        start_epoch = loaded.info.epoch;
        best = loaded.info.extra.value("best_eval_loss", best);
        resumed_manifest = std::move(loaded.manifest);
    }
    Optimizer<float> opt(cfg.optimizer, net->parameters());
    if (!resumed_manifest.is_null()) {
        restore_training_state(last, resumed_manifest, opt, &schedule);
        io.err << "resuming " << run_dir.string() << " at epoch " << start_epoch << '\n';
    }

    const fs::path metrics_path = run_dir / "metrics.csv";
    std::vector<EpochMetrics> kept;
    if (start_epoch > 0 && fs::exists(metrics_path))
        for (const auto& m : MetricsLog::read(metrics_path))
            if (m.epoch < start_epoch) kept.push_back(m);
    MetricsLog metrics(metrics_path, false);
    for (const auto& m : kept) metrics.write(m);

    FitOptions fo;
    fo.epochs = cfg.epochs;
    fo.start_epoch = start_epoch;
    fo.seed = cfg.seed;
    fo.train.batch_size = cfg.batch_size;
    fo.train.micro_batch = cfg.micro_batch;
    fo.train.augment = cfg.augment;
    fo.log = [&](const std::string& line) { io.err << line << '\n'; };
    fo.on_epoch = [&](const EpochMetrics& m, bool) {
        const std::size_t done = m.epoch + 1;
        json extra{{"config_hash", hash}, {"best_eval_loss", std::min(best, m.eval_loss)}};
        if (m.eval_loss < best) {
            best = m.eval_loss;
            save_checkpoint(best_dir, *net, {done, extra});
        }
        if (done % std::max<std::size_t>(cfg.checkpoint_every, 1) == 0 || done == cfg.epochs)
            save_checkpoint(last, *net, {done, extra}, &opt, &schedule);
    };
    const auto rows = fit(*net, opt, schedule, train, eval_set, fo, &metrics);

    json summary{{"name", cfg.name},
                 {"config_hash", hash},
                 {"epochs", cfg.epochs},
                 {"parameters", net->parameter_count()},
                 {"train_samples", train.size()},
                 {"eval_samples", eval_set.size()},
                 {"best_eval_loss", best}};
    if (!rows.empty()) summary["final"] = {{"train_loss", rows.back().train_loss},
                                           {"eval_loss", rows.back().eval_loss},
                                           {"error", rows.back().error},
                                           {"lr", rows.back().lr}};
    if (!data.test.empty()) summary["test"] = eval_json(evaluate(*net, data.test));
    write_json(run_dir / "summary.json", summary);
    io.out << run_dir.string() << '\n';
    return kExitOk;
}

int cmd_eval(const EvalArgs& args, Io io) {
    if (!is_checkpoint(args.checkpoint)) throw ConfigError("--checkpoint: no manifest.json in " + args.checkpoint.string());
    if (args.split != "test" && args.split != "train") throw ConfigError("--split: expected test or train");
    std::vector<Sample> samples;
    if (!args.config.empty()) {
        LoadedData data = load_data(load_run_config(args.config).dataset);
        samples = args.split == "test" ? std::move(data.test) : std::move(data.train);
    } else if (!args.dataset.empty()) {
        if (!fs::is_directory(args.dataset)) throw ConfigError("--dataset: " + args.dataset.string() + " is not a directory");
        samples = load_dataset(args.dataset).samples;
    } else {
        throw ConfigError("eval needs --config or --dataset");
    }
    LoadedCheckpoint loaded = load_checkpoint(args.checkpoint);
    const json result = eval_json(evaluate(*loaded.network, samples));
    io.out << result.dump() << '\n';
    if (!args.out.empty()) write_json(args.out, result);
    return kExitOk;
}

int cmd_gradcheck(const GradcheckArgs& args, Io io) {
    if (args.seeds == 0) throw ConfigError("--seeds: must be positive");
    if (!(args.tolerance > 0)) throw ConfigError("--tol: must be positive");
    fs::path report = args.report;
    if (report.empty()) {
        const json key{{"seed", args.seed}, {"seeds", args.seeds}, {"tol", args.tolerance}, {"speech", args.speech}};
        report = make_run_dir(output_root("runs"), "gradcheck", config_hash(key)) / "gradcheck.csv";
    } else if (report.has_parent_path()) {
        fs::create_directories(report.parent_path());
    }
    std::ofstream csv(report);
    if (!csv) throw FormatError("cannot write " + report.string());

    bool pass = true;
    double worst = 0, informational = 0;
    for (std::size_t i = 0; i < args.seeds; ++i) {
        GradCheckSuiteOptions o;
        o.seed = args.seed + i;
        o.tolerance = args.tolerance;
        o.step = args.step;
        o.tiny = args.tiny;
        o.speech = args.speech;
        o.refine_at_kinks = args.refine;
        const GradCheckSuite suite = run_gradcheck_suite(o);
        std::ostringstream rows;
        suite.write_csv(rows);
        std::istringstream lines(rows.str());
        std::string line;
        std::getline(lines, line);
        if (i == 0) csv << "seed," << line << '\n';
        while (std::getline(lines, line)) csv << o.seed << ',' << line << '\n';
        for (const auto& c : suite.cases)
            io.out << "seed " << o.seed << "  " << std::left << std::setw(34) << c.name << std::right
                   << std::setprecision(3) << std::scientific << c.report.max_rel_err << std::defaultfloat << "  "
                   << (c.informational ? "report" : (c.report.pass ? "pass" : "FAIL")) << '\n';
        pass = pass && suite.pass;
        worst = std::max(worst, suite.max_rel_err);
        informational = std::max(informational, suite.informational_max);
    }
    io.out << "max_rel_err " << std::setprecision(6) << worst << " (tol " << args.tolerance << ")\n"
           << "squared-norm attention rule max_rel_err " << informational << " (reported only)\n"
           << "report " << report.string() << '\n'
           << (pass ? "PASS" : "FAIL") << '\n';
    return pass ? kExitOk : kExitFailure;
}

int cmd_export_attention(const ExportArgs& args, Io io) {
    if (!fs::exists(args.image)) throw ConfigError("--image: " + args.image.string() + " does not exist");
    if (args.out.empty()) throw ConfigError("--out: required");
    LoadedCheckpoint loaded = load_checkpoint(args.checkpoint);
    Network<float>& net = *loaded.network;
    const bool one_d = net.spec().dims == 1;
    const Tensor<float> input = args.image.extension() == ".csv"
                                    ? read_feature_frames_csv(args.image, net.spec().input_channels)
                                    : read_image(args.image);

    std::vector<AttentionCapture<float>> captures;
    ForwardContext<float> ctx;
    ctx.attention = &captures;
    net.forward(with_batch_axis(input), ctx);
    if (captures.empty()) throw FormatError("checkpoint network has no attention layers");

    fs::create_directories(args.out);
    const std::size_t out_h = input.dim(0), out_w = one_d ? input.dim(1) : input.dim(1);
    for (std::size_t i = 0; i < captures.size(); ++i) {
        const auto& cap = captures[i];
        const Tensor<float>& w = cap.weights;
        const std::size_t h = w.dim(1) - 2 * cap.pad_h, wd = w.dim(2) - 2 * cap.pad_w, c = w.dim(3);
        Tensor<float> map({h, wd});
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < wd; ++x) {
                double s = 0;
                for (std::size_t k = 0; k < c; ++k) s += w.at(0, y + cap.pad_h, x + cap.pad_w, k);
                map.at(y, x) = static_cast<float>(s / static_cast<double>(c));
            }
        std::ostringstream name;
        name << std::setw(2) << std::setfill('0') << i << '_' << cap.layer << ".pgm";
        const fs::path path = args.out / name.str();
        write_pgm(path, upscale_nearest(to_gray(map), out_h, out_w));
        io.out << path.string() << '\n';
    }
    return kExitOk;
}

int cmd_synth_data(const SynthArgs& args, Io io) {
    if (args.n == 0 || args.classes == 0) throw ConfigError("--n and --classes must be positive");
    if (args.format != "tensors" && args.format != "csv") throw ConfigError("--format: expected tensors or csv");
    std::vector<Sample> samples;
    if (args.kind == "varsize") {
        SynthImageOptions o;
        o.min_extent = args.min_extent;
        o.max_extent = args.max_extent;
        samples = synth_varsize(args.seed, args.n, args.classes, o);
        if (args.resize != "none" && args.resize != "wrap" && args.resize != "maxside")
            throw ConfigError("--resize: expected none, wrap or maxside");
        apply_resize(samples, args.resize, args.target);
        if (args.format == "csv") throw ConfigError("--format csv applies to --kind frames only");
    } else if (args.kind == "frames") {
        samples = synth_feature_frames(args.seed, args.n, args.classes);
    } else {
        throw ConfigError("--kind: expected varsize or frames");
    }
    fs::path out = args.out;
    if (out.empty()) {
        const json key{{"kind", args.kind}, {"n", args.n}, {"classes", args.classes}, {"seed", args.seed},
                       {"resize", args.resize}, {"target", args.target}};
        out = make_run_dir(output_root("runs"), "synth-" + args.kind, config_hash(key));
    }
    fs::create_directories(out);
    if (args.format == "csv") {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            std::ostringstream cls, file;
            cls << "class_" << std::setw(2) << std::setfill('0') << samples[i].label;
            file << "utt_" << std::setw(5) << std::setfill('0') << i << ".csv";
            fs::create_directories(out / cls.str());
            write_feature_frames_csv(out / cls.str() / file.str(), samples[i].features);
        }
    } else {
        save_dataset(out, samples, args.classes);
    }
    io.out << out.string() << '\n';
    return kExitOk;
}

int cmd_bench(const BenchArgs& args, Io io) {
    if (args.sizes.empty() || args.channels == 0 || args.batch == 0 || args.repeats == 0)
        throw ConfigError("bench needs nonempty --sizes and positive --channels, --batch, --repeats");
    std::mt19937_64 rng = component_rng(args.seed, 3);
    const std::size_t c = args.channels;
    const AilConfig ail_cfg = AilConfig::local(c, c);
    const auto ail_params = AilParams<float>::init(ail_cfg, "lail", rng);
    std::size_t lail_params = 0;
    for (const auto& p : ail_params.list()) lail_params += p.size();
    Tensor<float> conv_w({1, 1, c, c}), conv_b({c});
    std::normal_distribution<float> normal(0.0f, 1.0f / std::sqrt(static_cast<float>(c)));
    for (float& v : conv_w.data()) v = normal(rng);
    const auto strided_w = Var<float>::constant(conv_w), strided_b = Var<float>::constant(conv_b);

    struct Kind {
        std::string name;
        std::size_t params;
        std::function<Var<float>(const Var<float>&)> forward;
    };
    const std::vector<Kind> kinds{
        {"lail", lail_params, [&](const Var<float>& x) { return ail_forward(x, ail_cfg, ail_params); }},
        {"maxpool", 0, [](const Var<float>& x) { return ops::maxpool2d(x, 2, 2); }},
        {"strided_conv", c * c + c,
         [&](const Var<float>& x) { return ops::relu(ops::conv2d(x, strided_w, strided_b, {1, 1, 2, 0, 0})); }},
    };

    std::ostringstream csv;
    csv << "size,kind,out_h,out_w,out_c,params,median_ms\n";
    for (std::size_t size : args.sizes) {
        std::uniform_real_distribution<float> u(-1.0f, 1.0f);
        Tensor<float> x({args.batch, size, size, c});
        for (float& v : x.data()) v = u(rng);
        const auto input = Var<float>::constant(x);
        Shape expected;
        for (const auto& k : kinds) {
            const Shape s = k.forward(input).shape();
            if (expected.empty()) expected = s;
            if (s != expected)
                throw ContractError("transition shapes differ at size " + std::to_string(size) + ": " + k.name + " " +
                                    to_string(s) + " vs " + to_string(expected));
        }
        for (const auto& k : kinds) {
            std::vector<double> ms;
            for (std::size_t r = 0; r < args.repeats; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto y = k.forward(input);
                ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
            }
            std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(ms.size() / 2), ms.end());
            csv << size << ',' << k.name << ',' << expected[1] << ',' << expected[2] << ',' << expected[3] << ','
                << k.params << ',' << std::fixed << std::setprecision(4) << ms[ms.size() / 2] << std::defaultfloat
                << '\n';
        }
    }
    fs::path out = args.out;
    if (out.empty()) {
        json key{{"sizes", args.sizes}, {"channels", c}, {"batch", args.batch}, {"repeats", args.repeats}};
        out = make_run_dir(output_root("runs"), "bench", config_hash(key)) / "bench.csv";
    } else if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    std::ofstream(out) << csv.str();
    io.out << csv.str() << "wrote " << out.string() << '\n';
    return kExitOk;
}

int run(int argc, const char* const* argv, Io io) {
    CLI::App app{"Attention incorporate network toolkit", "ain"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (overrides AIN_THREADS)");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a network from a JSON run config");
    train_cmd->add_option("-c,--config", train.config, "Run config (JSON)")->required();
    train_cmd->add_option("--run-dir", train.run_dir, "Use this run directory instead of a fresh one");
    train_cmd->add_flag("--resume", train.resume, "Continue from the run's last checkpoint");
    train_cmd->add_option("--epochs", train.epochs, "Override config epochs");
    train_cmd->add_option("--seed", train.seed, "Override config seed");
    train_cmd->add_option("--batch-size", train.batch_size, "Override config batch_size");
    train_cmd->add_option("--output-dir", train.output_dir, "Root for run directories");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint directory")->required();
    eval_cmd->add_option("-c,--config", eval.config, "Run config supplying the dataset");
    eval_cmd->add_option("--dataset", eval.dataset, "Saved dataset directory");
    eval_cmd->add_option("--split", eval.split, "test or train (with --config)");
    eval_cmd->add_option("-o,--out", eval.out, "Also write the result JSON here");

    GradcheckArgs grad;
    bool no_tiny = false, no_refine = false;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every layer's backward pass");
    grad_cmd->add_option("--seed", grad.seed, "First seed");
    grad_cmd->add_option("--seeds", grad.seeds, "Number of consecutive seeds");
    grad_cmd->add_option("--tol", grad.tolerance, "Relative error tolerance");
    grad_cmd->add_option("--step", grad.step, "Central difference step");
    grad_cmd->add_flag("--speech", grad.speech, "Also check the 1-D speech network");
    grad_cmd->add_flag("--no-tiny", no_tiny, "Skip the composed AIN-tiny network");
    grad_cmd->add_flag("--no-refine", no_refine, "Do not re-measure failing elements at smaller steps");
    grad_cmd->add_option("--report", grad.report, "CSV report path");

    ExportArgs exp;
    auto* exp_cmd = app.add_subcommand("export-attention", "Write each attention layer's map as PGM");
    exp_cmd->add_option("--checkpoint", exp.checkpoint, "Checkpoint directory")->required();
    exp_cmd->add_option("--image", exp.image, "PGM/PPM image, .aint tensor or frames CSV")->required();
    exp_cmd->add_option("-o,--out", exp.out, "Output directory")->required();

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth-data", "Generate a synthetic dataset");
    synth_cmd->add_option("--kind", synth.kind, "varsize or frames");
    synth_cmd->add_option("-n,--n", synth.n, "Number of samples");
    synth_cmd->add_option("--classes", synth.classes, "Number of classes");
    synth_cmd->add_option("--seed", synth.seed, "Generator seed");
    synth_cmd->add_option("--min-extent", synth.min_extent, "Smallest image side");
    synth_cmd->add_option("--max-extent", synth.max_extent, "Largest image side");
    synth_cmd->add_option("--resize", synth.resize, "none, wrap or maxside");
    synth_cmd->add_option("--target", synth.target, "Resize target side");
    synth_cmd->add_option("--format", synth.format, "tensors or csv (frames)");
    synth_cmd->add_option("-o,--out", synth.out, "Output directory");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Time LAIL, max-pool and strided-conv transitions");
    bench_cmd->add_option("--sizes", bench.sizes, "Input sides")->delimiter(',');
    bench_cmd->add_option("--channels", bench.channels, "Channels in and out");
    bench_cmd->add_option("--batch", bench.batch, "Batch size");
    bench_cmd->add_option("--repeats", bench.repeats, "Timed repeats per kind");
    bench_cmd->add_option("--seed", bench.seed, "Input seed");
    bench_cmd->add_option("-o,--out", bench.out, "CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, io.out, io.err) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (threads <= 0)
            if (const char* env = std::getenv("AIN_THREADS"); env && *env) {
                try {
                    threads = std::stoi(env);
                } catch (const std::exception&) {
                    throw ConfigError(std::string("AIN_THREADS: not an integer: ") + env);
                }
            }
        if (threads > 0) set_num_threads(threads);

        if (*train_cmd) return cmd_train(train, io);
        if (*eval_cmd) return cmd_eval(eval, io);
        if (*grad_cmd) {
            grad.tiny = !no_tiny;
            grad.refine = !no_refine;
            return cmd_gradcheck(grad, io);
        }
        if (*exp_cmd) return cmd_export_attention(exp, io);
        if (*synth_cmd) return cmd_synth_data(synth, io);
        if (*bench_cmd) return cmd_bench(bench, io);
    } catch (const ConfigError& e) {
        io.err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& e) {
        io.err << "input error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitConfig;
}

}  // namespace ain::cli
