#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "avaca/error.hpp"
#include "avaca/trainer.hpp"

namespace avaca {
namespace {

constexpr char kMagic[4] = {'A', 'V', 'C', 'K'};

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_bytes(std::vector<char>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(const std::vector<char>& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  const char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw TruncationError(source_ + ": truncated while reading " + what + " at byte " + std::to_string(pos_));
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint32_t u32(const char* what) {
    const char* p = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }

  std::uint64_t u64(const char* what) {
    const char* p = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }

  std::string text(const char* what) {
    const std::uint32_t n = u32(what);
    const char* p = take(n, what);
    return {p, n};
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<char>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

nlohmann::json config_json(const CheckpointConfig& config) {
  return nlohmann::json{{"format_version", 1}, {"model", config.model}, {"loss", config.loss}};
}

}  // namespace

std::vector<char> encode_checkpoint(const ModelParameters& params, const CheckpointConfig& config) {
  std::vector<char> out(kMagic, kMagic + 4);
  put_bytes(out, config_json(config).dump());
  put_u32(out, static_cast<std::uint32_t>(params.arrays.size()));
  for (const auto& [name, a] : params.arrays) {
    put_bytes(out, name);
    const std::size_t rows = a.rank() == 0 ? 0 : a.shape()[0];
    put_u32(out, static_cast<std::uint32_t>(rows));
    put_u32(out, static_cast<std::uint32_t>(rows == 0 ? 0 : a.size() / rows));
    for (double v : a.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& source) {
  Reader in(bytes, source);
  if (std::memcmp(in.take(4, "magic"), kMagic, 4) != 0) throw FormatError(source + ": bad magic, expected AVCK");

  Checkpoint ck;
  const std::string config_text = in.text("config");
  try {
    const auto j = nlohmann::json::parse(config_text);
    ck.config.model = j.at("model").get<AvacaConfig>();
    ck.config.loss = j.at("loss").get<LossConfig>();
    ck.config.model.validate();
    ck.config.loss.validate();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": invalid embedded config: " + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(source + ": invalid embedded config: " + e.what());
  }

  std::map<std::string, Shape> expected;
  for (auto& [name, shape] : parameter_layout(ck.config.model)) expected.emplace(name, shape);

  const std::uint32_t count = in.u32("parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.text("parameter name");
    const std::uint64_t rows = in.u32("rows");
    const std::uint64_t cols = in.u32("cols");
    const char* payload = in.take(8 * rows * cols, "parameter payload");
    auto it = expected.find(name);
    if (it == expected.end()) throw FormatError(source + ": unknown parameter '" + name + "' for the stored config");
    const Shape& shape = it->second;
    if (shape[0] != rows || shape_size(shape) != rows * cols) {
      throw FormatError(source + ": parameter '" + name + "' stored as " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " but the config implies " + shape_string(shape));
    }
    std::vector<double> data(rows * cols);
    for (std::size_t k = 0; k < data.size(); ++k) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[8 * k + b])) << (8 * b);
      data[k] = std::bit_cast<double>(v);
    }
    if (!ck.params.arrays.emplace(name, Array(shape, std::move(data))).second) {
      throw FormatError(source + ": parameter '" + name + "' appears twice");
    }
  }
  if (!in.done()) throw FormatError(source + ": trailing bytes after the last parameter");
  for (const auto& [name, shape] : expected) {
    if (!ck.params.arrays.contains(name)) throw FormatError(source + ": missing parameter '" + name + "'");
  }
  return ck;
}

void save_checkpoint(const ModelParameters& params, const CheckpointConfig& config, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params, config);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

}  // namespace avaca
