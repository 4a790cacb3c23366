#include <algorithm>

#include "avaca/error.hpp"
#include "avaca/evaluator.hpp"
#include "avaca/objectives.hpp"

namespace avaca {
namespace {

double kmax_mean(const ScoreVector& scores, std::size_t alpha) {
  const auto top = kmax_select(scores, alpha);
  double total = 0.0;
  for (double s : top) total += s;
  return total / static_cast<double>(top.size());
}

}  // namespace

double clip_auc(const std::vector<VideoScores>& videos) {
  std::vector<double> pool;
  std::vector<int> labels;
  for (const auto& v : videos) {
    pool.insert(pool.end(), v.scores.begin(), v.scores.end());
    labels.insert(labels.end(), v.scores.size(), v.label);
  }
  return roc_auc(pool, labels);
}

double video_auc(const std::vector<VideoScores>& videos, std::size_t alpha) {
  std::vector<double> per_video;
  std::vector<int> labels;
  for (const auto& v : videos) {
    per_video.push_back(kmax_mean(v.scores, alpha));
    labels.push_back(v.label);
  }
  return roc_auc(per_video, labels);
}

std::vector<VideoScores> score_videos(const Checkpoint& checkpoint, AudioMode audio_mode,
                                      const std::vector<const FeatureSequence*>& features,
                                      const std::vector<int>& labels) {
  AvacaConfig config = checkpoint.config.model;
  config.audio_mode = audio_mode;
  std::vector<VideoScores> out;
  out.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureSequence& f = *features[i];
    if (f.visual.cols() != config.d_visual || f.audio.cols() != config.d_audio) {
      throw ParameterError("video '" + f.video_id + "' has feature widths " + std::to_string(f.visual.cols()) + "/" +
                           std::to_string(f.audio.cols()) + " but the checkpoint expects " +
                           std::to_string(config.d_visual) + "/" + std::to_string(config.d_audio));
    }
    out.push_back({f.video_id, labels[i], forward(f, config, checkpoint.params)});
  }
  return out;
}

EvalReport evaluate(const Checkpoint& checkpoint, const Manifest& manifest, Split split, AudioMode audio_mode,
                    const FeatureCache* cache) {
  const auto records = manifest.in_split(split);
  if (records.empty()) throw ContractError("evaluate: the " + to_string(split) + " split is empty");

  std::vector<FeatureSequence> loaded;
  std::vector<const FeatureSequence*> features;
  std::vector<int> labels;
  if (!cache) loaded.reserve(records.size());
  for (const VideoRecord* r : records) {
    if (cache) {
      features.push_back(&cache->at(r->video_id));
    } else {
      loaded.push_back(load_features(manifest, *r));
      loaded.back().validate();
      features.push_back(&loaded.back());
    }
    labels.push_back(r->label);
  }

  std::vector<VideoScores> scored = score_videos(checkpoint, audio_mode, features, labels);
  // Fixed order for the per-video listing.
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.video_id < b.video_id; });

  EvalReport report;
  report.manifest_id = manifest.base_dir.string();
  report.split = to_string(split);
  report.audio_mode = audio_mode;
  report.clip_auc = clip_auc(scored);
  report.video_auc = video_auc(scored, checkpoint.config.loss.alpha);
  report.clip_auc_mean = report.clip_auc;
  report.video_auc_mean = report.video_auc;
  for (const auto& v : scored) {
    VideoSummary s;
    s.video_id = v.video_id;
    s.label = v.label;
    s.clips = v.scores.size();
    for (double x : v.scores) s.mean_score += x;
    s.mean_score /= static_cast<double>(s.clips);
    s.max_score = *std::max_element(v.scores.begin(), v.scores.end());
    s.kmax_mean = kmax_mean(v.scores, checkpoint.config.loss.alpha);
    report.videos.push_back(s);
  }
  return report;
}

EvalReport evaluate(const std::filesystem::path& checkpoint_path, const Manifest& manifest, Split split,
                    AudioMode audio_mode) {
  return evaluate(load_checkpoint(checkpoint_path), manifest, split, audio_mode);
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : report.videos) {
    videos.push_back({{"video_id", v.video_id},
                      {"label", v.label},
                      {"clips", v.clips},
                      {"mean_score", v.mean_score},
                      {"max_score", v.max_score},
                      {"kmax_mean", v.kmax_mean}});
  }
  nlohmann::json repeats = nlohmann::json::array();
  for (const auto& r : report.repeats) {
    repeats.push_back({{"seed", r.seed},
                       {"clip_auc", r.clip_auc},
                       {"video_auc", r.video_auc},
                       {"best_epoch", r.best_epoch},
                       {"best_val_auc", r.best_val_auc}});
  }
  return nlohmann::json{{"manifest", report.manifest_id},
                        {"split", report.split},
                        {"audio_mode", to_string(report.audio_mode)},
                        {"clip_auc", report.clip_auc},
                        {"video_auc", report.video_auc},
                        {"clip_auc_mean", report.clip_auc_mean},
                        {"clip_auc_std", report.clip_auc_std},
                        {"video_auc_mean", report.video_auc_mean},
                        {"video_auc_std", report.video_auc_std},
                        {"seeds", report.seeds},
                        {"repeats", repeats},
                        {"videos", videos}};
}

}  // namespace avaca
