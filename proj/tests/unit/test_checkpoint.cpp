#include <gtest/gtest.h>

#include <fstream>

#include "ain/checkpoint.hpp"
#include "ain/errors.hpp"
#include "reference.hpp"

using namespace ain;

TEST(Checkpoint, RoundTripRestoresPredictions) {
    const auto dir = ref::temp_dir("checkpoint");
    std::mt19937_64 rng(1);
    Network<float> net(presets::ain_tiny(5), rng);
    Optimizer<float> opt(OptimizerConfig::make_sgd(0.1), net.parameters());
    LrSchedule sched(ScheduleConfig::step_at({3}, 0.1), 0.1);
    const std::vector<Sample> data{{ref::random<float>({12, 12, 3}, rng, 0, 1), 2},
                                   {ref::random<float>({12, 12, 3}, rng, 0, 1), 4}};
    TrainOptions o;
    o.batch_size = 2;
    train_epoch(net, opt, data, o, rng);
    sched.update(0, 1.0);
    save_checkpoint(dir, net, {1, {{"note", "x"}}}, &opt, &sched);
    EXPECT_TRUE(is_checkpoint(dir));

    auto loaded = load_checkpoint(dir);
    EXPECT_EQ(loaded.info.epoch, 1u);
    EXPECT_EQ(loaded.info.extra["note"], "x");
    const auto x = ref::random<float>({16, 20, 3}, rng);
    EXPECT_EQ(loaded.network->predict(x), net.predict(x));

    Optimizer<float> opt2(OptimizerConfig::make_sgd(0.1), loaded.network->parameters());
    LrSchedule sched2(ScheduleConfig::step_at({3}, 0.1), 0.1);
    restore_training_state(dir, loaded.manifest, opt2, &sched2);
    EXPECT_EQ(opt2.steps(), opt.steps());
    for (std::size_t i = 0; i < opt.first().size(); ++i) EXPECT_EQ(opt2.first()[i], opt.first()[i]);
    EXPECT_EQ(sched2.lr(), sched.lr());
}

TEST(Checkpoint, MissingParameterIsFormatError) {
    const auto dir = ref::temp_dir("checkpoint_bad");
    std::mt19937_64 rng(2);
    Network<float> net(presets::ain_tiny(3), rng);
    save_checkpoint(dir, net, {0, nullptr});
    std::ifstream in(dir / "manifest.json");
    auto manifest = nlohmann::json::parse(in);
    in.close();
    manifest["parameters"].erase(manifest["parameters"].size() - 1);
    std::ofstream(dir / "manifest.json") << manifest.dump();
    EXPECT_THROW(load_checkpoint(dir), FormatError);
    EXPECT_FALSE(is_checkpoint(ref::temp_dir("checkpoint_empty")));
}
