#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avaca/array.hpp"
#include "avaca/model.hpp"

namespace avaca {

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split split);
Split parse_split(const std::string& text);

inline constexpr const char* kNormalClass = "normal";

// Label vocabulary of the three Maltese traffic scenes, normal first.
inline constexpr std::array<const char*, 11> kMavadClasses = {
    "normal",   "pedestrians",         "pedestrians crossing the road", "bicycle",
    "bus",      "exit side street",    "heavy goods vehicle",           "obstruction",
    "u-turn",   "scooter",             "horse"};

struct VideoRecord {
  std::string video_id;
  std::string scene;
  std::string class_name;
  int label = 0;  // 0 iff class_name == "normal"
  std::string visual_path;
  std::string audio_path;
  std::optional<Split> split;

  bool operator==(const VideoRecord&) const = default;
};

struct Manifest {
  std::vector<VideoRecord> records;
  std::optional<std::uint64_t> seed;  // creation seed, if known
  // Directory relative feature paths are resolved against. Not serialized.
  std::filesystem::path base_dir;

  std::vector<std::string> scenes() const;
  std::vector<const VideoRecord*> in_split(Split split) const;
  std::filesystem::path resolve(const std::string& path) const;
  // Unique ids and label/class consistency.
  void validate() const;

  bool operator==(const Manifest& other) const { return records == other.records && seed == other.seed; }
};

// CSV with header video_id,scene,class_name,label,visual_path,audio_path,split.
// An optional leading "# seed=<n>" line carries the creation seed.
Manifest parse_manifest(const std::string& text, const std::string& source = "<manifest>");
std::string format_manifest(const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);
// Relative record paths are rebased from manifest.base_dir onto the directory of `path`.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// AVF1: "AVF1", u32 rows, u32 cols (little-endian), rows·cols f32 LE, row-major.
void write_feature_file(const std::filesystem::path& path, const Array& matrix);
Array read_feature_file(const std::filesystem::path& path);
std::vector<char> encode_feature_file(const Array& matrix);
Array decode_feature_file(const std::vector<char>& bytes, const std::string& source = "<bytes>");

FeatureSequence load_features(const std::filesystem::path& visual_path, const std::filesystem::path& audio_path);
FeatureSequence load_features(const Manifest& manifest, const VideoRecord& record);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

// Per class: shuffle with the seed, then largest-remainder rounding of the
// ratios. Singleton classes go to train; two-member classes to train + test.
Manifest stratified_split(const Manifest& manifest, SplitRatios ratios, std::uint64_t seed);

FeatureSequence zero_audio(const FeatureSequence& features);

struct SynthSpec {
  std::map<std::string, std::size_t> classes;  // class name -> video count
  std::size_t t_min = 8;
  std::size_t t_max = 16;
  std::size_t d_visual = 2304;
  std::size_t d_audio = 128;
  double anomaly_strength = 1.5;
  double audio_informativeness = 0.7;  // 1.0: anomaly visible only in audio
  std::uint64_t seed = 42;
  // Share of normal videos carrying a benign event whose visual signature
  // matches an anomaly class but has no audio counterpart.
  double visual_confuser_rate = 0.25;
  double noise = 1.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

// A 100-video spec over five anomaly classes.
SynthSpec default_synth_spec();

// Writes visual/<id>.avf, audio/<id>.avf and manifest.csv under output_dir.
Manifest synthesize_dataset(const SynthSpec& spec, const std::filesystem::path& output_dir);

}  // namespace avaca
