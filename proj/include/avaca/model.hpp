#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "avaca/array.hpp"
#include "avaca/autograd.hpp"

namespace avaca {

// How the audio path feeds the AVT transformer.
//   focused: keys/values are the clip-to-clip differences U of P'
//   plain:   keys/values are P' itself
//   zeroed:  audio input replaced by zeros, keys/values P'
enum class AudioMode { kFocused, kPlain, kZeroed };

// Which transformer the focused/plain switch applies to. kAvt is the
// default reading; kVat keys VAT on U/P' and AVT on U.
enum class ToggleTarget { kAvt, kVat };

std::string to_string(AudioMode mode);
AudioMode parse_audio_mode(const std::string& text);
std::string to_string(ToggleTarget target);
ToggleTarget parse_toggle_target(const std::string& text);

struct AvacaConfig {
  std::size_t d_visual = 2304;
  std::size_t d_audio = 128;
  std::size_t d_model = 128;
  std::size_t heads = 4;
  // Output channels of the visual 3×3 convolution before the 1×1 mix.
  std::size_t visual_channels = 4;
  AudioMode audio_mode = AudioMode::kFocused;
  ToggleTarget toggle_target = ToggleTarget::kAvt;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const AvacaConfig&) const = default;
};

void to_json(nlohmann::json& j, const AvacaConfig& c);
void from_json(const nlohmann::json& j, AvacaConfig& c);

// Learnable arrays keyed by path, e.g. "stage1.visual.conv0.kernel".
struct ModelParameters {
  std::map<std::string, Array> arrays;

  const Array& at(const std::string& name) const;
  std::size_t scalar_count() const;
  bool operator==(const ModelParameters&) const = default;
};

// Names and shapes of every parameter implied by a config, in a fixed order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const AvacaConfig& config);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
ModelParameters init_parameters(const AvacaConfig& config);

// Graph leaves for a parameter set; parameters or constants depending on
// whether gradients are wanted.
using ParameterVars = std::map<std::string, Var>;
ParameterVars make_parameter_vars(const ModelParameters& params, bool trainable);

struct FeatureSequence {
  Array visual;  // t × D_v
  Array audio;   // t × D_a
  std::string video_id;

  std::size_t clips() const { return visual.rank() == 2 ? visual.rows() : 0; }
  // Both matrices rank 2, same row count t >= 2, finite.
  void validate() const;
};

// Per-video clip scores in [0, 1].
using ScoreVector = std::vector<double>;

struct Stage1Output {
  Var visual;  // V', t × d_model
  Var audio;   // P', t × d_model
};

Stage1Output stage1(const FeatureSequence& features, const AvacaConfig& config, const ParameterVars& params);

// U with U[i] = P'[i+1] - P'[i].
Var audio_difference(const Var& audio);

struct CrossAttentionOutput {
  Var tau;                   // after the output projection, q × d_model
  Var mixed;                 // concatenated head outputs before projection
  std::vector<Var> weights;  // per-head attention matrices, q × k
};

// Multi-head scaled dot-product attention with queries from one modality and
// keys/values from another. `prefix` selects the q/k/v/out parameters.
CrossAttentionOutput cross_attention(const Var& query_source, const Var& kv_source, std::size_t heads,
                                     const ParameterVars& params, const std::string& prefix);

struct ForwardTrace {
  Var scores;  // length t
  Stage1Output stage1;
  Var difference;  // U, empty when unused
  CrossAttentionOutput vat;
  CrossAttentionOutput avt;
};

ForwardTrace forward_graph(const FeatureSequence& features, const AvacaConfig& config, const ParameterVars& params);

// Inference on frozen parameters.
ScoreVector forward(const FeatureSequence& features, const AvacaConfig& config, const ModelParameters& params);

}  // namespace avaca
