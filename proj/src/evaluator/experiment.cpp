#include "avaca/error.hpp"
#include "avaca/evaluator.hpp"

namespace avaca {

EvalReport run_experiment(const Manifest& manifest, const TrainConfig& config, std::size_t repeats,
                          const std::filesystem::path& output_dir, const FeatureCache* cache) {
  if (repeats < 1) throw ParameterError("repeats must be >= 1");
  config.validate();
  FeatureCache owned;
  if (!cache) {
    owned = load_feature_cache(manifest);
    cache = &owned;
  }

  EvalReport aggregate;
  std::vector<double> clip_values, video_values;
  for (std::size_t r = 0; r < repeats; ++r) {
    const std::uint64_t seed = config.seed + r;
    Manifest split = stratified_split(manifest, {}, seed);

    TrainConfig repeat_config = config;
    repeat_config.seed = seed;
    repeat_config.model.seed = config.model.seed + r;
    repeat_config.checkpoint_dir = output_dir.empty() ? std::filesystem::path{}
                                                      : output_dir / ("repeat_" + std::to_string(r));
    const TrainResult trained = train(split, repeat_config, cache);
    EvalReport test = evaluate(trained.best, split, Split::kTest, config.model.audio_mode, cache);
    if (!repeat_config.checkpoint_dir.empty()) write_manifest(split, repeat_config.checkpoint_dir / "manifest.csv");

    aggregate.repeats.push_back({seed, test.clip_auc, test.video_auc, trained.best_epoch, trained.best_val_auc});
    aggregate.seeds.push_back(seed);
    clip_values.push_back(test.clip_auc);
    video_values.push_back(test.video_auc);
    if (r == 0) {
      aggregate.manifest_id = manifest.base_dir.string();
      aggregate.split = test.split;
      aggregate.audio_mode = test.audio_mode;
    }
    aggregate.videos.insert(aggregate.videos.end(), test.videos.begin(), test.videos.end());
  }
  const MeanStd clip = mean_and_std(clip_values);
  const MeanStd video = mean_and_std(video_values);
  aggregate.clip_auc = aggregate.clip_auc_mean = clip.mean;
  aggregate.clip_auc_std = clip.std;
  aggregate.video_auc = aggregate.video_auc_mean = video.mean;
  aggregate.video_auc_std = video.std;
  return aggregate;
}

}  // namespace avaca
