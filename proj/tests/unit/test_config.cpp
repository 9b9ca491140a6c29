#include <gtest/gtest.h>

#include "lesionuq/config.hpp"
#include "test_util.hpp"

using namespace lesionuq;

TEST(Config, EmptyDocumentKeepsDefaults) {
  const PipelineConfig c = parse_config("");
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.folds, 4);
  EXPECT_EQ(c.threshold, 0.5);
  EXPECT_EQ(c.epsilon, 0.1);
  EXPECT_EQ(c.dilation_iters, 1);
  EXPECT_EQ(c.synth.dims, (Dims{64, 64, 64}));
  EXPECT_EQ(c.synth.samples, 20);
  EXPECT_EQ(c.train.lr_start, 1e-2);
  EXPECT_EQ(c.train.lr_end, 1e-5);
  EXPECT_EQ(c.train.batch_size, 10);
  EXPECT_EQ(c.train.hidden, 64);
  EXPECT_EQ(c.train.epochs, 200);
  EXPECT_EQ(c.train.validation_fraction, 0.1);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesEverySection) {
  const PipelineConfig c = parse_config(R"(
schema_version = 1
seed = 12345678901234
out = "runs/a"
jobs = 3
folds = 5
epsilon = 0.2
keep_volumes = true

[synth]
dims = [16, 24, 32]
n_scenes = 10
fp_noise = 2

[train]
epochs = 7
lr_end = 1e-4
)");
  EXPECT_EQ(c.seed, 12345678901234u);
  EXPECT_EQ(c.out_dir, std::filesystem::path("runs/a"));
  EXPECT_EQ(c.jobs, 3);
  EXPECT_EQ(c.folds, 5);
  EXPECT_TRUE(c.keep_volumes);
  EXPECT_EQ(c.synth.dims, (Dims{16, 24, 32}));
  EXPECT_EQ(c.synth.n_scenes, 10);
  EXPECT_EQ(c.synth.fp_noise, 2.0);
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_EQ(c.train.lr_end, 1e-4);
  // Global seed and epsilon reach the nested configs.
  EXPECT_EQ(c.synth.seed, 12345678901234u);
  EXPECT_EQ(c.train.seed, 12345678901234u);
  EXPECT_EQ(c.train.epsilon, 0.2);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("bogus = 1"), ConfigError);
  EXPECT_THROW(parse_config("[synth]\nradius = 2.0"), ConfigError);
  EXPECT_THROW(parse_config("[extra]\nx = 1"), ConfigError);
  EXPECT_THROW(parse_config("schema_version = 2"), ConfigError);
  EXPECT_THROW(parse_config("folds = \"four\""), ConfigError);
  EXPECT_THROW(parse_config("seed = -1"), ConfigError);
  EXPECT_THROW(parse_config("jobs = 99999999999"), ConfigError);
  EXPECT_THROW(parse_config("[synth]\ndims = [1, 2]"), ConfigError);
  EXPECT_THROW(parse_config("synth = 3"), ConfigError);
  EXPECT_THROW(parse_config("seed = "), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST(Config, ValidateRejectsBadValues) {
  PipelineConfig c;
  c.folds = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PipelineConfig{};
  c.threshold = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PipelineConfig{};
  c.synth.n_scenes = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PipelineConfig{};
  c.train.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, TomlRoundTrip) {
  PipelineConfig c = parse_config("seed = 9\n[synth]\ndims = [8, 9, 10]\nradius_max = 3.3\n[train]\nepochs = 3");
  c.threshold = 0.4;
  c.synth.voxel_noise = 0.1 + 0.2;
  const std::string text = to_toml(c);
  const PipelineConfig back = parse_config(text);
  EXPECT_EQ(to_toml(back), text);
  EXPECT_EQ(back.synth.voxel_noise, 0.1 + 0.2);
  EXPECT_EQ(back.synth.dims, c.synth.dims);
  EXPECT_EQ(back.threshold, 0.4);
  EXPECT_EQ(back.train.epochs, 3);
  EXPECT_EQ(back.seed, 9u);
}

TEST(Config, LoadFromFile) {
  lesionuq::testing::TempDir tmp;
  lesionuq::testing::write_file(tmp / "c.toml", "seed = 4\n");
  EXPECT_EQ(load_config(tmp / "c.toml").seed, 4u);
  lesionuq::testing::write_file(tmp / "bad.toml", "seed = [\n");
  try {
    load_config(tmp / "bad.toml");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.toml"), std::string::npos);
  }
}
