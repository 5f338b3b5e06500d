#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "permlearn/config.hpp"

namespace permlearn {
namespace {

TEST(Config, DefaultsResolve) {
    const RunConfig rc = ConfigStore{}.resolve();
    EXPECT_EQ(rc.task, TaskKind::synth);
    EXPECT_EQ(rc.synth.l, 4u);
    EXPECT_EQ(rc.train.batch_size, 32u);
    EXPECT_EQ(rc.train.sinkhorn.iterations, 5u);
    EXPECT_EQ(rc.dims(), (ModelDims{8, 32, 64, 4}));
}

TEST(Config, OverridesAndTypes) {
    ConfigStore cs;
    cs.set_assignment("task = patches");
    cs.set_assignment("grid=4");
    cs.set_assignment("patch_px=16");
    cs.set_assignment("channels=3");
    cs.set_assignment("loss=naive");
    cs.set_assignment("learning_rate=0.5");
    cs.set_assignment("jitter=true");
    const RunConfig rc = cs.resolve();
    EXPECT_EQ(rc.task, TaskKind::patches);
    EXPECT_EQ(rc.dims(), (ModelDims{16 * 16 * 3, 32, 64, 16}));
    EXPECT_EQ(rc.train.loss_kind, LossKind::naive_sigmoid_ce);
    EXPECT_EQ(rc.train.learning_rate, 0.5);
    EXPECT_TRUE(rc.grid.jitter);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    ConfigStore cs;
    EXPECT_THROW(cs.set("learningrate", "1"), InvalidArgumentError);
    EXPECT_THROW(cs.set_assignment("novalue"), InvalidArgumentError);
    cs.set("batch_size", "ten");
    EXPECT_THROW(cs.resolve(), InvalidArgumentError);
    ConfigStore m;
    m.set("momentum", "1.5");
    EXPECT_THROW(m.resolve(), InvalidArgumentError);
    ConfigStore c;
    c.set("channels", "2");
    EXPECT_THROW(c.resolve(), InvalidArgumentError);
}

TEST(Config, FileThenOverrides) {
    const auto path = std::filesystem::temp_directory_path() / "permlearn_config_test.cfg";
    std::ofstream(path) << "# comment\nl = 6\n\niterations=20 # trailing\nseed=4\n";
    ConfigStore cs;
    cs.load_file(path);
    cs.set_assignment("seed=9");
    const RunConfig rc = cs.resolve();
    EXPECT_EQ(rc.synth.l, 6u);
    EXPECT_EQ(rc.train.iterations, 20u);
    EXPECT_EQ(rc.train.seed, 9u);

    std::ofstream(path) << "l=6\nbogus=1\n";
    ConfigStore bad;
    try {
        bad.load_file(path);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 2u);
    }
    std::filesystem::remove(path);
}

TEST(Config, RenderRoundTrips) {
    ConfigStore cs;
    cs.set("noise_sigma", "0.125");
    cs.set("workers", "3");
    cs.set("out_dir", "somewhere");
    const RunConfig rc = cs.resolve();
    const std::string text = ConfigStore::render(rc);
    ConfigStore again;
    std::istringstream in(text);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        again.set_assignment(line);
        ++lines;
    }
    EXPECT_EQ(lines, ConfigStore::known_keys().size());
    EXPECT_EQ(ConfigStore::render(again.resolve()), text);
}

}  // namespace
}  // namespace permlearn
