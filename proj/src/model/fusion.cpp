#include <cmath>

#include "avaca/error.hpp"
#include "avaca/model.hpp"
#include "avaca/ops.hpp"

namespace avaca {
namespace {

const Var& param(const ParameterVars& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("missing parameter '" + name + "'");
  return it->second;
}

Var dense(const Var& x, const ParameterVars& params, const std::string& prefix) {
  return ops::add_bias(ops::matmul(x, param(params, prefix + ".weight")), param(params, prefix + ".bias"));
}

Var conv(const Var& x, const ParameterVars& params, const std::string& prefix) {
  return ops::conv1d(x, param(params, prefix + ".kernel"), param(params, prefix + ".bias"));
}

// conv -> ReLU -> conv over one τ sequence.
Var stage2_branch(const Var& tau, const ParameterVars& params, const std::string& branch) {
  const std::string prefix = "stage2." + branch;
  return conv(ops::relu(conv(tau, params, prefix + ".conv0")), params, prefix + ".conv1");
}

}  // namespace

void FeatureSequence::validate() const {
  if (visual.rank() != 2 || audio.rank() != 2) {
    throw DimensionError("features of '" + video_id + "' must be matrices, got " + shape_string(visual.shape()) +
                         " and " + shape_string(audio.shape()));
  }
  if (visual.rows() != audio.rows()) {
    throw AlignmentError("features of '" + video_id + "': visual has " + std::to_string(visual.rows()) +
                         " clips, audio has " + std::to_string(audio.rows()));
  }
  if (visual.rows() < 2) {
    throw SequenceTooShortError("features of '" + video_id + "' have " + std::to_string(visual.rows()) +
                                " clips; at least 2 are required");
  }
  visual.require_finite("visual features of '" + video_id + "'");
  audio.require_finite("audio features of '" + video_id + "'");
}

Stage1Output stage1(const FeatureSequence& features, const AvacaConfig& config, const ParameterVars& params) {
  if (features.visual.rank() != 2 || features.visual.cols() != config.d_visual) {
    throw DimensionError("visual features " + shape_string(features.visual.shape()) + " do not have width " +
                         std::to_string(config.d_visual));
  }
  if (features.audio.rank() != 2 || features.audio.cols() != config.d_audio) {
    throw DimensionError("audio features " + shape_string(features.audio.shape()) + " do not have width " +
                         std::to_string(config.d_audio));
  }

  Var visual = Var::constant(features.visual);
  Var audio = Var::constant(config.audio_mode == AudioMode::kZeroed ? Array::zeros(features.audio.shape())
                                                                    : features.audio);

  Var mapped = ops::conv2d(visual, param(params, "stage1.visual.conv0.kernel"),
                           param(params, "stage1.visual.conv0.bias"));
  Var mixed = ops::channel_mix(mapped, param(params, "stage1.visual.mix0.weight"),
                               param(params, "stage1.visual.mix0.bias"));
  Var v_prime = dense(ops::relu(mixed), params, "stage1.visual.proj1");

  Var p_prime = conv(ops::relu(conv(audio, params, "stage1.audio.conv0")), params, "stage1.audio.conv1");
  return {v_prime, p_prime};
}

Var audio_difference(const Var& audio) {
  if (audio.value().rank() == 2 && audio.value().rows() < 2) {
    throw SequenceTooShortError("audio difference needs at least 2 clips, got " +
                                std::to_string(audio.value().rows()));
  }
  return ops::row_diff(audio);
}

CrossAttentionOutput cross_attention(const Var& query_source, const Var& kv_source, std::size_t heads,
                                     const ParameterVars& params, const std::string& prefix) {
  const std::size_t d = query_source.value().cols();
  if (kv_source.value().cols() != d) {
    throw DimensionError(prefix + ": query width " + std::to_string(d) + " and key/value width " +
                         std::to_string(kv_source.value().cols()) + " differ");
  }
  if (heads == 0 || d % heads != 0) {
    throw ParameterError(prefix + ": d_model " + std::to_string(d) + " is not divisible by " +
                         std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = d / heads;
  const double scale = std::sqrt(static_cast<double>(head_dim));

  Var q = dense(query_source, params, prefix + ".query");
  Var k = ops::matmul(kv_source, param(params, prefix + ".key.weight"));
  Var v = dense(kv_source, params, prefix + ".value");

  CrossAttentionOutput out;
  std::vector<Var> head_outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    Var qh = heads == 1 ? q : ops::slice_cols(q, lo, hi);
    Var kh = heads == 1 ? k : ops::slice_cols(k, lo, hi);
    Var vh = heads == 1 ? v : ops::slice_cols(v, lo, hi);
    Var weights = ops::softmax_rows(ops::matmul(qh, ops::transpose(kh)), scale);
    head_outputs.push_back(ops::matmul(weights, vh));
    out.weights.push_back(weights);
  }
  out.mixed = heads == 1 ? head_outputs.front() : ops::concat_cols(head_outputs);
  out.tau = dense(out.mixed, params, prefix + ".out");
  return out;
}

ForwardTrace forward_graph(const FeatureSequence& features, const AvacaConfig& config, const ParameterVars& params) {
  config.validate();
  features.validate();

  ForwardTrace trace;
  trace.stage1 = stage1(features, config, params);
  const Var& v_prime = trace.stage1.visual;
  const Var& p_prime = trace.stage1.audio;

  const bool focused = config.audio_mode == AudioMode::kFocused;
  const bool literal_vat = config.toggle_target == ToggleTarget::kVat;
  if (focused || literal_vat) trace.difference = audio_difference(p_prime);
  const Var& switched = focused ? trace.difference : p_prime;

  const Var& vat_kv = literal_vat ? switched : v_prime;
  const Var& avt_kv = literal_vat ? trace.difference : switched;
  trace.vat = cross_attention(p_prime, vat_kv, config.heads, params, "vat");
  trace.avt = cross_attention(v_prime, avt_kv, config.heads, params, "avt");

  Var fused = ops::concat_cols({stage2_branch(trace.vat.tau, params, "vat"), stage2_branch(trace.avt.tau, params, "avt")});
  Var logits = dense(fused, params, "head");
  trace.scores = ops::reshape(ops::sigmoid(logits), {features.clips()});
  return trace;
}

ScoreVector forward(const FeatureSequence& features, const AvacaConfig& config, const ModelParameters& params) {
  const ParameterVars vars = make_parameter_vars(params, false);
  return forward_graph(features, config, vars).scores.value().values();
}

}  // namespace avaca
