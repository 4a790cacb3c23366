#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avaca/datahub.hpp"
#include "avaca/trainer.hpp"

namespace avaca {

// Mann-Whitney statistic with midranks: P(random positive outranks random
// negative), ties counting one half. Throws UndefinedMetricError unless both
// classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct VideoScores {
  std::string video_id;
  int label = 0;
  ScoreVector scores;
};

// Clip-level AUC over the pooled clips, each labelled with its video's label.
double clip_auc(const std::vector<VideoScores>& videos);
// Video-level AUC using the mean of each video's k-max scores.
double video_auc(const std::vector<VideoScores>& videos, std::size_t alpha);

struct VideoSummary {
  std::string video_id;
  int label = 0;
  std::size_t clips = 0;
  double mean_score = 0.0;
  double max_score = 0.0;
  double kmax_mean = 0.0;
};

struct RepeatResult {
  std::uint64_t seed = 0;
  double clip_auc = 0.0;
  double video_auc = 0.0;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
};

struct EvalReport {
  std::string manifest_id;
  std::string split;
  AudioMode audio_mode = AudioMode::kFocused;
  double clip_auc = 0.0;
  double video_auc = 0.0;
  std::vector<VideoSummary> videos;
  std::vector<std::uint64_t> seeds;
  // Across repeats; equal to clip_auc/video_auc with zero spread for one run.
  double clip_auc_mean = 0.0;
  double clip_auc_std = 0.0;
  double video_auc_mean = 0.0;
  double video_auc_std = 0.0;
  std::vector<RepeatResult> repeats;
};

nlohmann::json to_json(const EvalReport& report);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};
MeanStd mean_and_std(std::span<const double> values);

std::vector<VideoScores> score_videos(const Checkpoint& checkpoint, AudioMode audio_mode,
                                      const std::vector<const FeatureSequence*>& features,
                                      const std::vector<int>& labels);

EvalReport evaluate(const Checkpoint& checkpoint, const Manifest& manifest, Split split, AudioMode audio_mode,
                    const FeatureCache* cache = nullptr);
EvalReport evaluate(const std::filesystem::path& checkpoint_path, const Manifest& manifest, Split split,
                    AudioMode audio_mode);

// Re-splits with seed + r, trains and tests for each repeat r. When
// output_dir is set, each repeat's checkpoint and history land in
// output_dir/repeat_<r>/.
EvalReport run_experiment(const Manifest& manifest, const TrainConfig& config, std::size_t repeats = 3,
                          const std::filesystem::path& output_dir = {}, const FeatureCache* cache = nullptr);

}  // namespace avaca
