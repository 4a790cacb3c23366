#include "avaca/model_check.hpp"

#include "avaca/rng.hpp"

namespace avaca {

ModelCheckResult check_model_gradients(const ModelCheckCase& check, std::uint64_t seed, double eps) {
  Rng rng(seed);
  FeatureSequence features;
  features.video_id = "gradcheck";
  features.visual = Array({check.clips, check.model.d_visual});
  features.audio = Array({check.clips, check.model.d_audio});
  for (double& v : features.visual.mutable_data()) v = rng.normal();
  for (double& v : features.audio.mutable_data()) v = rng.normal();

  AvacaConfig model = check.model;
  model.seed = seed;
  // Zero biases put ReLUs exactly on their kink when audio is zeroed, so the
  // check runs at a jittered point rather than at the init itself.
  ModelParameters params = init_parameters(model);
  for (auto& [name, a] : params.arrays) {
    for (double& v : a.mutable_data()) v += 0.3 * rng.normal();
  }
  std::vector<std::string> names;
  std::vector<Array> point;
  for (const auto& [name, a] : params.arrays) {
    names.push_back(name);
    point.push_back(a);
  }

  const GraphFunction f = [&](const std::vector<Var>& leaves) {
    ParameterVars vars;
    for (std::size_t i = 0; i < names.size(); ++i) vars.emplace(names[i], leaves[i]);
    const ForwardTrace trace = forward_graph(features, model, vars);
    return total_loss(trace.scores, check.label, check.loss).total;
  };

  ModelCheckResult result{check, finite_diff_check(f, point, eps), {}};
  result.check.model.seed = seed;
  result.worst_parameter = names[result.gradient.worst_input];
  return result;
}

std::vector<ModelCheckCase> toy_check_cases() {
  std::vector<ModelCheckCase> cases;
  for (std::size_t heads : {1, 4}) {
    for (AudioMode mode : {AudioMode::kFocused, AudioMode::kPlain, AudioMode::kZeroed}) {
      for (int label : {0, 1}) {
        ModelCheckCase c;
        c.model.d_visual = 6;
        c.model.d_audio = 4;
        c.model.d_model = 8;
        c.model.heads = heads;
        c.model.visual_channels = 2;
        c.model.audio_mode = mode;
        c.loss.alpha = 2;
        c.loss.theta = 10.0;
        c.loss.lambda = 1.0;
        c.clips = label == 1 ? 5 : 4;
        c.label = label;
        cases.push_back(c);
      }
    }
  }
  return cases;
}

}  // namespace avaca
