#include "avaca/error.hpp"
#include "avaca/model.hpp"

namespace avaca {

std::string to_string(AudioMode mode) {
  switch (mode) {
    case AudioMode::kFocused: return "focused";
    case AudioMode::kPlain: return "plain";
    case AudioMode::kZeroed: return "zeroed";
  }
  return "unknown";
}

AudioMode parse_audio_mode(const std::string& text) {
  if (text == "focused") return AudioMode::kFocused;
  if (text == "plain") return AudioMode::kPlain;
  if (text == "zeroed") return AudioMode::kZeroed;
  throw ParameterError("unknown audio mode '" + text + "' (expected focused, plain or zeroed)");
}

std::string to_string(ToggleTarget target) { return target == ToggleTarget::kAvt ? "avt" : "vat"; }

ToggleTarget parse_toggle_target(const std::string& text) {
  if (text == "avt") return ToggleTarget::kAvt;
  if (text == "vat") return ToggleTarget::kVat;
  throw ParameterError("unknown toggle target '" + text + "' (expected avt or vat)");
}

void AvacaConfig::validate() const {
  if (d_visual == 0 || d_audio == 0 || d_model == 0 || visual_channels == 0) {
    throw ParameterError("model widths must be >= 1");
  }
  if (heads == 0) throw ParameterError("heads must be >= 1");
  if (d_model % heads != 0) {
    throw ParameterError("d_model " + std::to_string(d_model) + " is not divisible by heads " +
                         std::to_string(heads));
  }
}

void to_json(nlohmann::json& j, const AvacaConfig& c) {
  j = nlohmann::json{{"d_visual", c.d_visual},
                     {"d_audio", c.d_audio},
                     {"d_model", c.d_model},
                     {"heads", c.heads},
                     {"visual_channels", c.visual_channels},
                     {"audio_mode", to_string(c.audio_mode)},
                     {"toggle_target", to_string(c.toggle_target)},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, AvacaConfig& c) {
  AvacaConfig d;
  c.d_visual = j.value("d_visual", d.d_visual);
  c.d_audio = j.value("d_audio", d.d_audio);
  c.d_model = j.value("d_model", d.d_model);
  c.heads = j.value("heads", d.heads);
  c.visual_channels = j.value("visual_channels", d.visual_channels);
  c.audio_mode = parse_audio_mode(j.value("audio_mode", to_string(d.audio_mode)));
  c.toggle_target = parse_toggle_target(j.value("toggle_target", to_string(d.toggle_target)));
  c.seed = j.value("seed", d.seed);
}

}  // namespace avaca
