#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "avaca/cli.hpp"
#include "avaca/trainer.hpp"

using namespace avaca;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Shared fixture: a small synthetic dataset plus a matching training config.
struct Workspace {
  fs::path dir = fs::temp_directory_path() / "avaca_test_cli";
  Workspace() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    write(dir / "spec.json", R"({"classes": {"normal": 10, "bus": 5, "bicycle": 5},
                                 "d_visual": 24, "d_audio": 8, "t_min": 5, "t_max": 8})");
    write(dir / "train.json", R"({"epochs": 2, "learning_rate": 1e-3,
                                  "model": {"d_visual": 24, "d_audio": 8, "d_model": 8, "heads": 2,
                                            "visual_channels": 2},
                                  "loss": {"alpha": 4}})");
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"split"}).code == 2);
  const Run r = cli({"train", "--manifest", "m.csv", "--out", "x", "--audio-mode", "loud"});
  CHECK(r.code == 2);
  CHECK(r.err.find("audio-mode") != std::string::npos);
  CHECK(cli({"split", "--manifest", "m.csv", "--out", "o.csv", "--ratios", "0.5,0.5"}).code == 2);
  CHECK(cli({"gradcheck", "--eps", "abc"}).code == 2);
}

TEST_CASE("help exits with 0") {
  const Run r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("experiment") != std::string::npos);
}

TEST_CASE("missing or corrupt inputs exit with 1") {
  Workspace w;
  CHECK(cli({"split", "--manifest", w.path("none.csv"), "--out", w.path("o.csv")}).code == 1);
  write(w.dir / "bad.csv", "video_id,scene\n");
  const Run r = cli({"split", "--manifest", w.path("bad.csv"), "--out", w.path("o.csv")});
  CHECK(r.code == 1);
  CHECK(r.err.find("bad.csv") != std::string::npos);
  write(w.dir / "bad.avck", "AVCX");
  CHECK(cli({"eval", "--checkpoint", w.path("bad.avck"), "--manifest", w.path("bad.csv")}).code == 1);
  write(w.dir / "bad.json", "{");
  CHECK(cli({"synth", "--spec", w.path("bad.json"), "--out", w.path("d")}).code == 1);
}

TEST_CASE("synth, split, train, eval, experiment") {
  Workspace w;
  Run r = cli({"synth", "--spec", w.path("spec.json"), "--out", w.path("data"), "--seed", "5"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(w.dir / "data" / "manifest.csv"));

  r = cli({"split", "--manifest", w.path("data/manifest.csv"), "--out", w.path("data/split.csv"), "--seed", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("train 12, val 4, test 4") != std::string::npos);

  r = cli({"train", "--manifest", w.path("data/split.csv"), "--config", w.path("train.json"), "--out", w.path("run"),
           "--epochs", "1"});
  REQUIRE(r.code == 0);
  const Checkpoint ck = load_checkpoint(w.dir / "run" / "best.avck");
  CHECK(ck.config.model.d_model == 8);

  r = cli({"eval", "--checkpoint", w.path("run/best.avck"), "--manifest", w.path("data/split.csv"), "--split", "test",
           "--audio-mode", "zeroed"});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(r.out);
  CHECK(report.at("audio_mode") == "zeroed");
  CHECK(report.at("videos").size() == 4);
  CHECK(report.at("clip_auc").get<double>() >= 0.0);

  r = cli({"eval", "--checkpoint", w.path("run/best.avck"), "--manifest", w.path("data/split.csv"), "--out",
           w.path("eval.json")});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(w.dir / "eval.json"));

  r = cli({"experiment", "--manifest", w.path("data/manifest.csv"), "--config", w.path("train.json"), "--out",
           w.path("exp"), "--repeats", "2", "--epochs", "1", "--seed", "3"});
  REQUIRE(r.code == 0);
  std::ifstream in(w.dir / "exp" / "report.json");
  const auto exp = nlohmann::json::parse(in);
  CHECK(exp.at("repeats").size() == 2);
  CHECK(fs::exists(w.dir / "exp" / "repeat_1" / "best.avck"));

  // Repeat manifests live next to their checkpoints and still find the data.
  r = cli({"eval", "--checkpoint", w.path("exp/repeat_1/best.avck"), "--manifest", w.path("exp/repeat_1/manifest.csv")});
  CHECK(r.code == 0);
}

TEST_CASE("gradcheck passes") {
  Workspace w;
  const Run r = cli({"gradcheck", "--out", w.path("gc.json")});
  CHECK(r.code == 0);
  CHECK(r.out.find("max relative error") != std::string::npos);
  std::ifstream in(w.dir / "gc.json");
  CHECK(nlohmann::json::parse(in).at("max_relative_error").get<double>() < 1e-3);
}
