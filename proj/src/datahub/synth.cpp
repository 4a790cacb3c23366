#include <cmath>
#include <numbers>

#include "avaca/datahub.hpp"
#include "avaca/error.hpp"
#include "avaca/rng.hpp"

namespace avaca {
namespace {

constexpr std::size_t kSceneRank = 3;
constexpr double kSceneEnergy = 0.5;  // per-entry variance of the scene background
constexpr double kMinWindow = 0.6;    // anomalies cover 60-100% of a video's clips

// Random direction scaled to unit RMS per entry, so amplitudes compare
// directly with the per-entry noise level.
std::vector<double> signature(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  const double scale = std::sqrt(static_cast<double>(dim) / norm);
  for (double& x : v) x *= scale;
  return v;
}

struct Modality {
  std::size_t dim;
  std::vector<std::vector<double>> basis;  // scene background, kSceneRank × dim
};

Modality make_modality(Rng& rng, std::size_t dim) {
  Modality m{dim, {}};
  for (std::size_t r = 0; r < kSceneRank; ++r) {
    std::vector<double> b(dim);
    for (double& x : b) x = rng.normal();
    m.basis.push_back(std::move(b));
  }
  return m;
}

// Smooth low-rank scene signal plus white noise.
Array background(Rng& rng, const Modality& m, std::size_t t, double noise) {
  const double amp = std::sqrt(2.0 * kSceneEnergy / kSceneRank);
  Array out({t, m.dim});
  for (std::size_t r = 0; r < kSceneRank; ++r) {
    const double freq = rng.uniform(0.5, 2.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t j = 0; j < t; ++j) {
      const double a = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(j) / static_cast<double>(t) + phase);
      for (std::size_t c = 0; c < m.dim; ++c) out(j, c) += a * m.basis[r][c];
    }
  }
  for (double& x : out.mutable_data()) x += noise * rng.normal();
  return out;
}

struct Window {
  std::size_t begin, end;
};

Window draw_window(Rng& rng, std::size_t t) {
  const double frac = rng.uniform(kMinWindow, 1.0);
  const std::size_t len = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * static_cast<double>(t))));
  const std::size_t begin = rng.below(t - len + 1);
  return {begin, begin + len};
}

}  // namespace

void SynthSpec::validate() const {
  if (classes.empty()) throw ParameterError("synth spec: no classes");
  for (const auto& [name, count] : classes) {
    if (name.empty() || name.find_first_of(",\n\r") != std::string::npos) {
      throw ParameterError("synth spec: invalid class name '" + name + "'");
    }
  }
  if (t_min < 2 || t_max < t_min) throw ParameterError("synth spec: need 2 <= t_min <= t_max");
  if (d_visual == 0 || d_audio == 0) throw ParameterError("synth spec: widths must be >= 1");
  if (!(anomaly_strength >= 0.0)) throw ParameterError("synth spec: anomaly_strength must be >= 0");
  if (!(audio_informativeness >= 0.0 && audio_informativeness <= 1.0)) {
    throw ParameterError("synth spec: audio_informativeness must lie in [0, 1]");
  }
  if (!(visual_confuser_rate >= 0.0 && visual_confuser_rate <= 1.0)) {
    throw ParameterError("synth spec: visual_confuser_rate must lie in [0, 1]");
  }
  if (!(noise >= 0.0)) throw ParameterError("synth spec: noise must be >= 0");
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"classes", s.classes},
                     {"t_min", s.t_min},
                     {"t_max", s.t_max},
                     {"d_visual", s.d_visual},
                     {"d_audio", s.d_audio},
                     {"anomaly_strength", s.anomaly_strength},
                     {"audio_informativeness", s.audio_informativeness},
                     {"seed", s.seed},
                     {"visual_confuser_rate", s.visual_confuser_rate},
                     {"noise", s.noise}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  const SynthSpec d;
  if (!j.contains("classes")) throw FormatError("synth spec: missing 'classes'");
  s.classes = j.at("classes").get<std::map<std::string, std::size_t>>();
  s.t_min = j.value("t_min", d.t_min);
  s.t_max = j.value("t_max", d.t_max);
  s.d_visual = j.value("d_visual", d.d_visual);
  s.d_audio = j.value("d_audio", d.d_audio);
  s.anomaly_strength = j.value("anomaly_strength", d.anomaly_strength);
  s.audio_informativeness = j.value("audio_informativeness", d.audio_informativeness);
  s.seed = j.value("seed", d.seed);
  s.visual_confuser_rate = j.value("visual_confuser_rate", d.visual_confuser_rate);
  s.noise = j.value("noise", d.noise);
}

SynthSpec default_synth_spec() {
  SynthSpec s;
  s.classes = {{"normal", 50},
               {"pedestrians", 10},
               {"pedestrians crossing the road", 10},
               {"bicycle", 10},
               {"bus", 10},
               {"heavy goods vehicle", 10}};
  return s;
}

Manifest synthesize_dataset(const SynthSpec& spec, const std::filesystem::path& output_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(output_dir / "visual", ec);
  if (!ec) std::filesystem::create_directories(output_dir / "audio", ec);
  if (ec) throw IoError("cannot create dataset directory " + output_dir.string() + ": " + ec.message());

  Rng scene_rng(derive_seed(spec.seed, 0));
  const Modality visual = make_modality(scene_rng, spec.d_visual);
  const Modality audio = make_modality(scene_rng, spec.d_audio);

  std::vector<std::string> anomaly_classes;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> signatures;
  for (const auto& [name, count] : spec.classes) {
    if (name == kNormalClass) continue;
    anomaly_classes.push_back(name);
    auto sv = signature(scene_rng, spec.d_visual);
    auto sa = signature(scene_rng, spec.d_audio);
    signatures.emplace(name, std::make_pair(std::move(sv), std::move(sa)));
  }

  const double visual_amp = spec.anomaly_strength * (1.0 - spec.audio_informativeness);
  const double audio_amp = spec.anomaly_strength * spec.audio_informativeness;

  Manifest manifest;
  manifest.seed = spec.seed;
  manifest.base_dir = output_dir;
  std::size_t index = 0;
  for (const auto& [name, count] : spec.classes) {
    for (std::size_t n = 0; n < count; ++n, ++index) {
      Rng rng(derive_seed(spec.seed, 1000 + index));
      const std::size_t t = spec.t_min + rng.below(spec.t_max - spec.t_min + 1);
      Array v = background(rng, visual, t, spec.noise);
      Array a = background(rng, audio, t, spec.noise);

      const bool anomalous = name != kNormalClass;
      if (anomalous) {
        const auto& [sv, sa] = signatures.at(name);
        const Window w = draw_window(rng, t);
        for (std::size_t j = w.begin; j < w.end; ++j) {
          // Audio events are bursty so that clip-to-clip differences carry them.
          const double burst = rng.uniform(0.0, 2.0);
          for (std::size_t c = 0; c < spec.d_visual; ++c) v(j, c) += visual_amp * sv[c];
          for (std::size_t c = 0; c < spec.d_audio; ++c) a(j, c) += audio_amp * burst * sa[c];
        }
      } else if (!anomaly_classes.empty() && rng.uniform() < spec.visual_confuser_rate) {
        const auto& sv = signatures.at(anomaly_classes[rng.below(anomaly_classes.size())]).first;
        const Window w = draw_window(rng, t);
        for (std::size_t j = w.begin; j < w.end; ++j) {
          for (std::size_t c = 0; c < spec.d_visual; ++c) v(j, c) += visual_amp * sv[c];
        }
      }

      char id[32];
      std::snprintf(id, sizeof(id), "syn_%05zu", index);
      VideoRecord rec;
      rec.video_id = id;
      rec.scene = "synthetic";
      rec.class_name = name;
      rec.label = anomalous ? 1 : 0;
      rec.visual_path = "visual/" + rec.video_id + ".avf";
      rec.audio_path = "audio/" + rec.video_id + ".avf";
      write_feature_file(output_dir / rec.visual_path, v);
      write_feature_file(output_dir / rec.audio_path, a);
      manifest.records.push_back(std::move(rec));
    }
  }
  write_manifest(manifest, output_dir / "manifest.csv");
  return manifest;
}

}  // namespace avaca
