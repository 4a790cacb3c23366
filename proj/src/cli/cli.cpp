#include "avaca/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "avaca/datahub.hpp"
#include "avaca/error.hpp"
#include "avaca/evaluator.hpp"
#include "avaca/model_check.hpp"
#include "avaca/trainer.hpp"

namespace avaca {
namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("--ratios: '" + item + "' is not a number");
    }
  }
  if (values.size() != 3) throw UsageError("--ratios expects three comma-separated values");
  return {values[0], values[1], values[2]};
}

TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return {};
  try {
    return read_json(path).get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

struct Options {
  std::optional<std::uint64_t> seed;
  std::string spec, out, manifest, config, checkpoint, split = "test", audio_mode, ratios = "0.6,0.2,0.2";
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::size_t repeats = 3;
  double eps = 1e-5;
};

void apply_overrides(TrainConfig& config, const Options& o) {
  if (o.seed) config.seed = *o.seed;
  if (o.epochs) config.epochs = *o.epochs;
  if (o.learning_rate) config.learning_rate = *o.learning_rate;
  if (!o.audio_mode.empty()) config.model.audio_mode = parse_audio_mode(o.audio_mode);
}

int cmd_synth(const Options& o, std::ostream& out) {
  SynthSpec spec = default_synth_spec();
  if (!o.spec.empty()) {
    try {
      spec = read_json(o.spec).get<SynthSpec>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(o.spec + ": " + e.what());
    }
  }
  if (o.seed) spec.seed = *o.seed;
  const Manifest m = synthesize_dataset(spec, o.out);
  out << "wrote " << m.records.size() << " videos to " << (std::filesystem::path(o.out) / "manifest.csv").string()
      << "\n";
  return 0;
}

int cmd_split(const Options& o, std::ostream& out) {
  const SplitRatios ratios = parse_ratios(o.ratios);
  const Manifest in = read_manifest(o.manifest);
  const Manifest split = stratified_split(in, ratios, o.seed.value_or(0));
  write_manifest(split, o.out);
  out << "train " << split.in_split(Split::kTrain).size() << ", val " << split.in_split(Split::kVal).size()
      << ", test " << split.in_split(Split::kTest).size() << " -> " << o.out << "\n";
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  TrainConfig config = load_train_config(o.config);
  apply_overrides(config, o);
  config.checkpoint_dir = o.out;
  const Manifest manifest = read_manifest(o.manifest);
  const TrainResult result = train(manifest, config);
  out << "best epoch " << result.best_epoch << ", validation clip AUC " << result.best_val_auc << "\n"
      << "checkpoint " << (config.checkpoint_dir / "best.avck").string() << "\n";
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Manifest manifest = read_manifest(o.manifest);
  const AudioMode mode = o.audio_mode.empty() ? ck.config.model.audio_mode : parse_audio_mode(o.audio_mode);
  EvalReport report = evaluate(ck, manifest, parse_split(o.split), mode);
  if (o.seed) report.seeds.push_back(*o.seed);
  const std::string json = to_json(report).dump(2) + "\n";
  if (o.out.empty()) {
    out << json;
  } else {
    write_text(o.out, json);
    out << "clip AUC " << report.clip_auc << ", video AUC " << report.video_auc << " -> " << o.out << "\n";
  }
  return 0;
}

int cmd_experiment(const Options& o, std::ostream& out) {
  TrainConfig config = load_train_config(o.config);
  apply_overrides(config, o);
  const Manifest manifest = read_manifest(o.manifest);
  const EvalReport report = run_experiment(manifest, config, o.repeats, o.out);
  write_text(std::filesystem::path(o.out) / "report.json", to_json(report).dump(2) + "\n");
  out << to_string(report.audio_mode) << " clip AUC " << report.clip_auc_mean << " +- " << report.clip_auc_std
      << ", video AUC " << report.video_auc_mean << " +- " << report.video_auc_std << "\n";
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const std::uint64_t seed = o.seed.value_or(7);
  double worst = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : toy_check_cases()) {
    const ModelCheckResult r = check_model_gradients(c, seed, o.eps);
    worst = std::max(worst, r.gradient.max_relative_error);
    out << "heads=" << c.model.heads << " mode=" << to_string(c.model.audio_mode) << " label=" << c.label
        << " max_rel_error=" << r.gradient.max_relative_error << " (" << r.worst_parameter << ")\n";
    rows.push_back({{"heads", c.model.heads},
                    {"audio_mode", to_string(c.model.audio_mode)},
                    {"label", c.label},
                    {"max_relative_error", r.gradient.max_relative_error},
                    {"worst_parameter", r.worst_parameter}});
  }
  out << "max relative error " << worst << "\n";
  if (!o.out.empty()) write_text(o.out, nlohmann::json{{"max_relative_error", worst}, {"cases", rows}}.dump(2) + "\n");
  return worst < 1e-3 ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio-visual cross-attention anomaly detection on precomputed clip features", "avaca"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::string> modes{"focused", "plain", "zeroed"};

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "Random seed");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic audio-visual dataset");
  synth->add_option("--spec", o.spec, "Synthetic spec JSON (defaults to the built-in 100-video spec)");
  synth->add_option("--out", o.out, "Output directory")->required();
  add_seed(synth);

  auto* split = app.add_subcommand("split", "Stratified train/val/test split of a manifest");
  split->add_option("--manifest", o.manifest, "Input manifest CSV")->required();
  split->add_option("--out", o.out, "Output manifest CSV")->required();
  split->add_option("--ratios", o.ratios, "train,val,test ratios")->capture_default_str();
  add_seed(split);

  auto* train_cmd = app.add_subcommand("train", "Train on the train split, select on val");
  train_cmd->add_option("--manifest", o.manifest, "Split manifest CSV")->required();
  train_cmd->add_option("--config", o.config, "Training config JSON");
  train_cmd->add_option("--out", o.out, "Output directory for best.avck and history.csv")->required();
  train_cmd->add_option("--epochs", o.epochs, "Override epochs");
  train_cmd->add_option("--lr", o.learning_rate, "Override learning rate");
  train_cmd->add_option("--audio-mode", o.audio_mode, "Override audio mode")->check(CLI::IsMember(modes));
  add_seed(train_cmd);

  auto* eval = app.add_subcommand("eval", "Score a split with a checkpoint");
  eval->add_option("--checkpoint", o.checkpoint, "AVCK checkpoint")->required();
  eval->add_option("--manifest", o.manifest, "Split manifest CSV")->required();
  eval->add_option("--split", o.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--audio-mode", o.audio_mode, "Audio mode (default: the checkpoint's)")
      ->check(CLI::IsMember(modes));
  eval->add_option("--out", o.out, "Report JSON path (stdout if omitted)");
  add_seed(eval);

  auto* experiment = app.add_subcommand("experiment", "Repeated split/train/test runs with mean and std");
  experiment->add_option("--manifest", o.manifest, "Manifest CSV")->required();
  experiment->add_option("--config", o.config, "Training config JSON");
  experiment->add_option("--out", o.out, "Output directory")->required();
  experiment->add_option("--repeats", o.repeats, "Number of repeats")->capture_default_str();
  experiment->add_option("--epochs", o.epochs, "Override epochs");
  experiment->add_option("--lr", o.learning_rate, "Override learning rate");
  experiment->add_option("--audio-mode", o.audio_mode, "Override audio mode")->check(CLI::IsMember(modes));
  add_seed(experiment);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  gradcheck->add_option("--eps", o.eps, "Central-difference step")->capture_default_str();
  gradcheck->add_option("--out", o.out, "Optional JSON summary path");
  add_seed(gradcheck);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*synth) return cmd_synth(o, out);
    if (*split) return cmd_split(o, out);
    if (*train_cmd) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*experiment) return cmd_experiment(o, out);
    if (*gradcheck) return cmd_gradcheck(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace avaca
