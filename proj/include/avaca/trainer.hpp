#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avaca/datahub.hpp"
#include "avaca/model.hpp"
#include "avaca/objectives.hpp"

namespace avaca {

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-5;
  LossConfig loss;
  AvacaConfig model;
  std::size_t batch_videos = 8;
  std::uint64_t seed = 0;
  // Global gradient-norm ceiling applied before each optimizer step.
  double clip_norm = 10.0;
  // When non-empty, train() writes best.avck and history.csv here.
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// What a checkpoint needs to rebuild and score with a model.
struct CheckpointConfig {
  AvacaConfig model;
  LossConfig loss;
  bool operator==(const CheckpointConfig&) const = default;
};

struct Checkpoint {
  ModelParameters params;
  CheckpointConfig config;
};

// AVCK layout, all integers u32 little-endian:
//   "AVCK" | config length | config JSON | parameter count |
//   per parameter: name length | name | rows | cols | rows·cols f64 LE
// Rank-3 kernels are stored as rows = shape[0], cols = the rest.
std::vector<char> encode_checkpoint(const ModelParameters& params, const CheckpointConfig& config);
Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& source = "<bytes>");
void save_checkpoint(const ModelParameters& params, const CheckpointConfig& config, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

using GradientMap = std::map<std::string, Array>;

struct AdamOptions {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, Array> first_moment;
  std::map<std::string, Array> second_moment;
};

// One bias-corrected Adam update. Parameters absent from `grads` see a
// zero gradient.
void adam_step(ModelParameters& params, const GradientMap& grads, AdamState& state, const AdamOptions& options);

// Rescales gradients in place so their global L2 norm is at most max_norm.
// Returns true when rescaling happened.
bool clip_global_norm(GradientMap& grads, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;
  double dmil = 0.0;
  double center = 0.0;
  double total = 0.0;
  double val_auc = 0.0;
  double seconds = 0.0;
  std::size_t clipped_steps = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

// epoch,dmil,center,total,val_auc,seconds,clipped_steps
std::string format_history_csv(const TrainHistory& history);

using FeatureCache = std::map<std::string, FeatureSequence>;

// Loads the features of every record (optionally only one split).
FeatureCache load_feature_cache(const Manifest& manifest);

struct TrainResult {
  Checkpoint best;
  TrainHistory history;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
};

TrainResult train(const Manifest& manifest, const TrainConfig& config, const FeatureCache* cache = nullptr);

}  // namespace avaca
