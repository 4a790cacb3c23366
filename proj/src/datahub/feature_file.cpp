#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "avaca/datahub.hpp"
#include "avaca/error.hpp"

namespace avaca {
namespace {

constexpr char kMagic[4] = {'A', 'V', 'F', '1'};
constexpr std::size_t kHeaderBytes = 12;

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace

std::vector<char> encode_feature_file(const Array& matrix) {
  if (matrix.rank() != 2) throw DimensionError("feature file payload must be a matrix, got " + shape_string(matrix.shape()));
  std::vector<char> out(kMagic, kMagic + 4);
  out.reserve(kHeaderBytes + 4 * matrix.size());
  put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
  for (double v : matrix.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Array decode_feature_file(const std::vector<char>& bytes, const std::string& source) {
  if (bytes.size() < kHeaderBytes) {
    throw TruncationError(source + ": " + std::to_string(bytes.size()) + " bytes is shorter than the AVF1 header");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError(source + ": bad magic, expected AVF1");
  const std::uint64_t rows = get_u32(bytes.data() + 4);
  const std::uint64_t cols = get_u32(bytes.data() + 8);
  const std::uint64_t expected = kHeaderBytes + 4 * rows * cols;
  if (bytes.size() != expected) {
    throw TruncationError(source + ": header declares " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " (" + std::to_string(expected) + " bytes) but file has " + std::to_string(bytes.size()));
  }
  std::vector<double> data(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes.data() + kHeaderBytes + 4 * i)));
  }
  try {
    return Array({rows, cols}, std::move(data));
  } catch (const NumericError& e) {
    throw FormatError(source + ": " + e.what());
  }
}

void write_feature_file(const std::filesystem::path& path, const Array& matrix) {
  const auto bytes = encode_feature_file(matrix);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write feature file " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing feature file " + path.string());
}

Array read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_feature_file(bytes, path.string());
}

FeatureSequence load_features(const std::filesystem::path& visual_path, const std::filesystem::path& audio_path) {
  FeatureSequence f;
  f.visual = read_feature_file(visual_path);
  f.audio = read_feature_file(audio_path);
  if (f.visual.rows() != f.audio.rows()) {
    throw AlignmentError("visual file " + visual_path.string() + " has " + std::to_string(f.visual.rows()) +
                         " rows but audio file " + audio_path.string() + " has " + std::to_string(f.audio.rows()));
  }
  return f;
}

FeatureSequence load_features(const Manifest& manifest, const VideoRecord& record) {
  FeatureSequence f = load_features(manifest.resolve(record.visual_path), manifest.resolve(record.audio_path));
  f.video_id = record.video_id;
  return f;
}

FeatureSequence zero_audio(const FeatureSequence& features) {
  FeatureSequence out = features;
  out.audio = Array::zeros(features.audio.shape());
  return out;
}

}  // namespace avaca
