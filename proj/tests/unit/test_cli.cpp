#if AIN_HAVE_CLI

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "ain/checkpoint.hpp"
#include "ain/data.hpp"
#include "ain/image_io.hpp"
#include "ain/serialize.hpp"
#include "commands.hpp"
#include "reference.hpp"

using namespace ain;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "ain");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), {out, err});
    return {code, out.str(), err.str()};
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Drops the trailing wall-time column of every metrics row.
std::string without_seconds(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, kept;
    while (std::getline(in, line)) kept += line.substr(0, line.rfind(',')) + '\n';
    return kept;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = ref::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
        setenv("AIN_OUT_DIR", (dir / "runs").c_str(), 1);
    }
    void TearDown() override {
        unsetenv("AIN_OUT_DIR");
        fs::remove_all(dir);
    }

    fs::path write_config(const std::string& name, const std::string& body) {
        const fs::path p = dir / name;
        std::ofstream(p) << body;
        return p;
    }

    fs::path tiny_config() {
        return write_config("tiny.json", R"({
          "name": "tiny",
          "network": {"preset": "ain-tiny", "num_classes": 2},
          "dataset": {"kind": "synth-varsize", "train": 40, "test": 12, "num_classes": 2,
                      "min_extent": 32, "max_extent": 40, "seed": 5},
          "optimizer": {"kind": "adam", "lr": 0.001},
          "seed": 3, "epochs": 2, "batch_size": 8, "validation_fraction": 0.2
        })");
    }

    fs::path dir;
};

TEST_F(CliTest, TrainWritesOneMetricsRowPerEpoch) {
    const auto r = invoke({"train", "-c", tiny_config().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const fs::path run = first_line(r.out);
    EXPECT_TRUE(fs::exists(run / "config.json"));
    EXPECT_TRUE(fs::exists(run / "summary.json"));
    EXPECT_TRUE(is_checkpoint(run / "checkpoint" / "last"));
    EXPECT_EQ(MetricsLog::read(run / "metrics.csv").size(), 2u);
    EXPECT_EQ(run.parent_path(), dir / "runs");
}

TEST_F(CliTest, SameSeedGivesSameMetrics) {
    const auto cfg = tiny_config().string();
    const auto a = invoke({"train", "-c", cfg, "--epochs", "1"});
    const auto b = invoke({"train", "-c", cfg, "--epochs", "1"});
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    ASSERT_NE(first_line(a.out), first_line(b.out));
    EXPECT_EQ(without_seconds(slurp(fs::path(first_line(a.out)) / "metrics.csv")),
              without_seconds(slurp(fs::path(first_line(b.out)) / "metrics.csv")));
}

TEST_F(CliTest, ResumeContinuesFromLastCheckpoint) {
    const auto cfg = tiny_config().string();
    const auto a = invoke({"train", "-c", cfg, "--epochs", "1"});
    ASSERT_EQ(a.code, 0) << a.err;
    const std::string run = first_line(a.out);
    const auto b = invoke({"train", "-c", cfg, "--epochs", "2", "--run-dir", run, "--resume"});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_NE(b.err.find("at epoch 1"), std::string::npos);
    const auto rows = MetricsLog::read(fs::path(run) / "metrics.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].epoch, 1u);
}

TEST_F(CliTest, MissingDatasetPathIsAConfigError) {
    const auto cfg = write_config("bad.json", R"({
      "network": {"preset": "ain-tiny", "num_classes": 10},
      "dataset": {"kind": "cifar10", "path": "no/such/dir"}
    })");
    const auto r = invoke({"train", "-c", cfg.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("dataset.path"), std::string::npos);
}

TEST_F(CliTest, MalformedConfigAndUnknownFlagsAreConfigErrors) {
    EXPECT_EQ(invoke({"train", "-c", write_config("x.json", "{ not json").string()}).code, 2);
    EXPECT_EQ(invoke({"train", "-c", (dir / "absent.json").string()}).code, 2);
    EXPECT_EQ(invoke({"train", "--bogus"}).code, 2);
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(CliTest, GradcheckPassesAndFailsAtImpossibleTolerance) {
    const auto ok = invoke({"gradcheck", "--no-tiny", "--report", (dir / "g.csv").string()});
    EXPECT_EQ(ok.code, 0) << ok.out;
    EXPECT_NE(ok.out.find("max_rel_err"), std::string::npos);

    const auto strict = invoke({"gradcheck", "--no-tiny", "--tol", "1e-12", "--report", (dir / "s.csv").string()});
    EXPECT_EQ(strict.code, 1);
    EXPECT_NE(strict.out.find("max_rel_err"), std::string::npos);

    std::ifstream csv(dir / "g.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header.rfind("seed,case,parameter,", 0), 0u) << header;
}

TEST_F(CliTest, ExportAttentionWritesOneMapPerAttentionLayer) {
    std::mt19937_64 rng(1);
    Network<float> net(presets::ain_tiny(10), rng);
    for (auto p : net.parameters()) p.value().fill(0.0f);
    save_checkpoint(dir / "ck", net, {0, {}});
    Tensor<float> image({32, 32, 3});
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (float& v : image.data()) v = u(rng);
    save_tensor(dir / "img.aint", image);

    const auto r = invoke({"export-attention", "--checkpoint", (dir / "ck").string(), "--image",
                           (dir / "img.aint").string(), "-o", (dir / "maps").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::size_t count = 0;
    for (const auto& e : fs::directory_iterator(dir / "maps")) {
        ++count;
        const GrayImage g = read_pgm(e.path());
        EXPECT_EQ(g.height, 32u);
        EXPECT_EQ(g.width, 32u);
        // Zero parameters give a sigmoid of 0 everywhere.
        for (auto px : g.pixels) ASSERT_EQ(px, 128);
    }
    EXPECT_EQ(count, 3u);

    fs::remove(dir / "ck" / "param_0000.aint");
    const auto broken = invoke({"export-attention", "--checkpoint", (dir / "ck").string(), "--image",
                                (dir / "img.aint").string(), "-o", (dir / "maps2").string()});
    EXPECT_EQ(broken.code, 1);
}

TEST_F(CliTest, SynthDataRoundTripsThroughDatasetLoader) {
    const auto r = invoke({"synth-data", "--n", "20", "--classes", "4", "--resize", "wrap", "--target", "32", "-o",
                           (dir / "d").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ds = load_dataset(dir / "d");
    ASSERT_EQ(ds.samples.size(), 20u);
    for (const auto& s : ds.samples) EXPECT_EQ(s.features.shape(), (Shape{32, 32, 3}));

    const auto frames = invoke({"synth-data", "--kind", "frames", "--n", "8", "--classes", "2", "--format", "csv", "-o",
                                (dir / "f").string()});
    ASSERT_EQ(frames.code, 0) << frames.err;
    EXPECT_TRUE(fs::is_directory(dir / "f" / "class_00"));
    EXPECT_TRUE(fs::is_directory(dir / "f" / "class_01"));

    EXPECT_EQ(invoke({"synth-data", "--kind", "bogus"}).code, 2);
}

TEST_F(CliTest, BenchReportsEveryKindPerSize) {
    const auto r = invoke({"bench", "--sizes", "8,12", "--channels", "4", "--repeats", "2", "-o",
                           (dir / "b.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(dir / "b.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "size,kind,out_h,out_w,out_c,params,median_ms");
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const std::string size = line.substr(0, line.find(','));
        EXPECT_NE(line.find(size == "8" ? ",4,4,4," : ",6,6,4,"), std::string::npos) << line;
    }
    EXPECT_EQ(n, 6u);
}

TEST_F(CliTest, ThreadsFromEnvironmentMustBeNumeric) {
    setenv("AIN_THREADS", "many", 1);
    EXPECT_EQ(invoke({"bench", "--sizes", "8", "--channels", "2", "-o", (dir / "b.csv").string()}).code, 2);
    unsetenv("AIN_THREADS");
}

}  // namespace

#endif
