#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "avaca/datahub.hpp"
#include "avaca/error.hpp"
#include "avaca/trainer.hpp"

using namespace avaca;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("avaca_test_trainer_" + name);
  fs::remove_all(dir);
  return dir;
}

ModelParameters scalar_param(double v) {
  ModelParameters p;
  p.arrays.emplace("p", Array::vector({v}));
  return p;
}

AvacaConfig small_model() {
  AvacaConfig c;
  c.d_visual = 32;
  c.d_audio = 8;
  c.d_model = 16;
  c.heads = 4;
  c.visual_channels = 2;
  c.seed = 3;
  return c;
}

// 20 videos with small widths, split 60/20/20.
Manifest small_dataset(const fs::path& dir) {
  SynthSpec s;
  s.classes = {{"normal", 10}, {"bus", 5}, {"bicycle", 5}};
  s.d_visual = 32;
  s.d_audio = 8;
  s.seed = 8;
  Manifest m = stratified_split(synthesize_dataset(s, dir), {}, 1);
  m.base_dir = dir;
  return m;
}

}  // namespace

TEST_CASE("adam leaves parameters alone without gradient or step size") {
  ModelParameters p = scalar_param(1.0);
  AdamState state;
  adam_step(p, {{"p", Array::vector({0.0})}}, state, {});
  CHECK(p.at("p")[0] == 1.0);

  p = scalar_param(1.0);
  state = {};
  AdamOptions zero;
  zero.learning_rate = 0.0;
  adam_step(p, {{"p", Array::vector({3.0})}}, state, zero);
  CHECK(p.at("p")[0] == 1.0);
}

TEST_CASE("first adam step moves by about the learning rate") {
  for (double lr : {1e-5, 1e-3, 0.1}) {
    ModelParameters p = scalar_param(1.0);
    AdamState state;
    AdamOptions o;
    o.learning_rate = lr;
    adam_step(p, {{"p", Array::vector({1.0})}}, state, o);
    // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
    CHECK(p.at("p")[0] == doctest::Approx(1.0 - lr / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(state.step == 1);
  }
}

TEST_CASE("adam contract errors") {
  ModelParameters p = scalar_param(1.0);
  AdamState state;
  CHECK_THROWS_AS(adam_step(p, {{"p", Array::vector({1.0, 2.0})}}, state, {}), ContractError);
  CHECK_THROWS_AS(adam_step(p, {{"q", Array::vector({1.0})}}, state, {}), ContractError);
}

TEST_CASE("global norm clipping") {
  GradientMap g{{"a", Array::vector({3.0})}, {"b", Array::vector({4.0})}};
  CHECK_FALSE(clip_global_norm(g, 5.0));
  CHECK(clip_global_norm(g, 1.0));
  CHECK(g.at("a")[0] == doctest::Approx(0.6));
  CHECK(g.at("b")[0] == doctest::Approx(0.8));
}

TEST_CASE("checkpoint round trip") {
  CheckpointConfig cfg{small_model(), {}};
  cfg.loss.alpha = 4;
  ModelParameters params = init_parameters(cfg.model);
  params.arrays.at("head.bias")[0] = 0.1 + 1e-17;
  const Checkpoint back = decode_checkpoint(encode_checkpoint(params, cfg));
  CHECK(back.params == params);
  CHECK(back.config == cfg);

  const fs::path dir = scratch("ck");
  fs::create_directories(dir);
  save_checkpoint(params, cfg, dir / "m.avck");
  CHECK(load_checkpoint(dir / "m.avck").params == params);
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_checkpoint(dir / "m.avck"), IoError);
}

TEST_CASE("checkpoint with four heads rebuilds the same architecture") {
  CheckpointConfig cfg{small_model(), {}};
  REQUIRE(cfg.model.heads == 4);
  const ModelParameters params = init_parameters(cfg.model);
  const Checkpoint back = decode_checkpoint(encode_checkpoint(params, cfg));
  CHECK(back.config.model.heads == 4);
  const auto layout = parameter_layout(back.config.model);
  REQUIRE(layout.size() == back.params.arrays.size());
  for (const auto& [name, shape] : layout) CHECK(back.params.at(name).shape() == shape);
}

TEST_CASE("checkpoint errors") {
  CheckpointConfig cfg{small_model(), {}};
  const ModelParameters params = init_parameters(cfg.model);
  const std::vector<char> bytes = encode_checkpoint(params, cfg);

  std::vector<char> bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);

  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<char> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode_checkpoint(truncated), TruncationError);
  }

  ModelParameters extra = params;
  extra.arrays.emplace("stage3.bogus.weight", Array({2, 2}));
  CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(extra, cfg)), FormatError);

  ModelParameters missing = params;
  missing.arrays.erase("head.bias");
  CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(missing, cfg)), FormatError);

  // Parameters that do not fit the stored config.
  CheckpointConfig other = cfg;
  other.model.d_model = 8;
  other.model.heads = 2;
  CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(params, other)), FormatError);
}

TEST_CASE("train config json") {
  TrainConfig c;
  c.epochs = 7;
  c.learning_rate = 3e-4;
  c.model = small_model();
  const nlohmann::json j = c;
  const TrainConfig back = j.get<TrainConfig>();
  CHECK(back.epochs == 7);
  CHECK(back.learning_rate == 3e-4);
  CHECK(back.model == c.model);
  c.batch_videos = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("training reduces the loss and is deterministic") {
  const fs::path dir = scratch("train");
  const Manifest m = small_dataset(dir / "data");
  TrainConfig c;
  c.epochs = 5;
  c.model = small_model();
  c.seed = 4;
  c.checkpoint_dir = dir / "run";
  const TrainResult a = train(m, c);
  REQUIRE(a.history.epochs.size() == 5);
  CHECK(a.history.epochs[4].total < a.history.epochs[0].total);
  CHECK(a.best_epoch >= 1);
  CHECK(a.best_val_auc == a.history.epochs[a.best_epoch - 1].val_auc);
  CHECK(fs::exists(c.checkpoint_dir / "best.avck"));
  CHECK(load_checkpoint(c.checkpoint_dir / "best.avck").params == a.best.params);

  std::ifstream history(c.checkpoint_dir / "history.csv");
  std::string header;
  std::getline(history, header);
  CHECK(header == "epoch,dmil,center,total,val_auc,seconds,clipped_steps");

  c.checkpoint_dir.clear();
  const TrainResult b = train(m, c);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.history.epochs[i].total == b.history.epochs[i].total);
    CHECK(a.history.epochs[i].val_auc == b.history.epochs[i].val_auc);
  }
  CHECK(a.best.params == b.best.params);
  fs::remove_all(dir);
}

TEST_CASE("training needs both labels in train and val") {
  const fs::path dir = scratch("labels");
  Manifest m = small_dataset(dir);
  for (auto& r : m.records) {
    if (r.split == Split::kVal && r.label == 1) r.split = Split::kTrain;
  }
  TrainConfig c;
  c.epochs = 1;
  c.model = small_model();
  CHECK_THROWS_AS(train(m, c), ContractError);
  for (auto& r : m.records) r.split = Split::kTest;
  CHECK_THROWS_AS(train(m, c), ContractError);
  fs::remove_all(dir);
}
