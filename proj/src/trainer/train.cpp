#include <chrono>
#include <fstream>
#include <cmath>
#include <sstream>

#include "avaca/error.hpp"
#include "avaca/evaluator.hpp"
#include "avaca/ops.hpp"
#include "avaca/rng.hpp"
#include "avaca/trainer.hpp"

namespace avaca {
namespace {

struct Sample {
  const FeatureSequence* features;
  int label;
};

std::vector<Sample> collect(const Manifest& manifest, Split split, const FeatureCache& cache) {
  std::vector<Sample> out;
  for (const VideoRecord* r : manifest.in_split(split)) out.push_back({&cache.at(r->video_id), r->label});
  return out;
}

void require_both_labels(const std::vector<Sample>& samples, const std::string& split) {
  bool normal = false, anomalous = false;
  for (const auto& s : samples) (s.label ? anomalous : normal) = true;
  if (samples.empty()) throw ContractError("train: the " + split + " split is empty");
  if (!normal || !anomalous) {
    throw ContractError("train: the " + split + " split needs at least one normal and one anomalous video");
  }
}

double validation_auc(const Checkpoint& ck, const std::vector<Sample>& val) {
  std::vector<const FeatureSequence*> feats;
  std::vector<int> labels;
  for (const auto& s : val) {
    feats.push_back(s.features);
    labels.push_back(s.label);
  }
  return clip_auc(score_videos(ck, ck.config.model.audio_mode, feats, labels));
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (batch_videos < 1) throw ParameterError("batch_videos must be >= 1");
  if (!(clip_norm > 0.0)) throw ParameterError("clip_norm must be > 0");
  loss.validate();
  model.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"learning_rate", c.learning_rate},
                     {"batch_videos", c.batch_videos},
                     {"seed", c.seed},
                     {"clip_norm", c.clip_norm},
                     {"loss", c.loss},
                     {"model", c.model}};
  if (!c.checkpoint_dir.empty()) j["checkpoint_dir"] = c.checkpoint_dir.string();
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_videos = j.value("batch_videos", d.batch_videos);
  c.seed = j.value("seed", d.seed);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
  c.loss = j.contains("loss") ? j.at("loss").get<LossConfig>() : d.loss;
  c.model = j.contains("model") ? j.at("model").get<AvacaConfig>() : d.model;
  c.checkpoint_dir = j.value("checkpoint_dir", std::string());
}

std::string format_history_csv(const TrainHistory& history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,dmil,center,total,val_auc,seconds,clipped_steps\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << e.dmil << ',' << e.center << ',' << e.total << ',' << e.val_auc << ',' << e.seconds << ','
        << e.clipped_steps << '\n';
  }
  return out.str();
}

FeatureCache load_feature_cache(const Manifest& manifest) {
  FeatureCache cache;
  for (const auto& r : manifest.records) {
    FeatureSequence f = load_features(manifest, r);
    f.validate();
    cache.emplace(r.video_id, std::move(f));
  }
  return cache;
}

TrainResult train(const Manifest& manifest, const TrainConfig& config, const FeatureCache* cache) {
  config.validate();
  FeatureCache owned;
  if (!cache) {
    owned = load_feature_cache(manifest);
    cache = &owned;
  }
  const std::vector<Sample> train_set = collect(manifest, Split::kTrain, *cache);
  const std::vector<Sample> val_set = collect(manifest, Split::kVal, *cache);
  require_both_labels(train_set, "train");
  require_both_labels(val_set, "val");

  Checkpoint current{init_parameters(config.model), {config.model, config.loss}};
  AdamState adam;
  const AdamOptions adam_options{config.learning_rate};
  Rng rng(derive_seed(config.seed, 0x7452));

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    rng.shuffle(order);
    EpochRecord record;
    record.epoch = epoch;

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_videos) {
      const std::size_t end = std::min(order.size(), begin + config.batch_videos);
      const double weight = 1.0 / static_cast<double>(end - begin);
      ParameterVars vars = make_parameter_vars(current.params, true);
      for (std::size_t i = begin; i < end; ++i) {
        const Sample& s = train_set[order[i]];
        try {
          const ForwardTrace trace = forward_graph(*s.features, config.model, vars);
          const TotalLoss loss = total_loss(trace.scores, s.label, config.loss);
          if (!std::isfinite(loss.breakdown.total)) throw NumericError("non-finite loss");
          backward(ops::affine(loss.total, weight, 0.0));
          record.dmil += loss.breakdown.dmil;
          record.center += loss.breakdown.center;
          record.total += loss.breakdown.total;
        } catch (const NumericError& e) {
          throw NumericError("training aborted at epoch " + std::to_string(epoch) + " on video '" +
                             s.features->video_id + "': " + e.what());
        }
      }
      GradientMap grads;
      for (const auto& [name, var] : vars) grads.emplace(name, var.grad());
      if (clip_global_norm(grads, config.clip_norm)) ++record.clipped_steps;
      adam_step(current.params, grads, adam, adam_options);
    }

    const double n = static_cast<double>(train_set.size());
    record.dmil /= n;
    record.center /= n;
    record.total /= n;
    record.val_auc = validation_auc(current, val_set);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(record);

    if (!have_best || record.val_auc > result.best_val_auc) {
      have_best = true;
      result.best = current;
      result.best_epoch = epoch;
      result.best_val_auc = record.val_auc;
    }
  }

  if (!config.checkpoint_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(config.checkpoint_dir, ec);
    if (ec) throw IoError("cannot create " + config.checkpoint_dir.string() + ": " + ec.message());
    save_checkpoint(result.best.params, result.best.config, config.checkpoint_dir / "best.avck");
    std::ofstream history(config.checkpoint_dir / "history.csv", std::ios::trunc);
    if (!history) throw IoError("cannot write history to " + config.checkpoint_dir.string());
    history << format_history_csv(result.history);
  }
  return result;
}

}  // namespace avaca
