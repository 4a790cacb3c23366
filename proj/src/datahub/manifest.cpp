#include <fstream>
#include <set>
#include <sstream>

#include "avaca/datahub.hpp"
#include "avaca/error.hpp"

namespace avaca {
namespace {

constexpr const char* kHeader = "video_id,scene,class_name,label,visual_path,audio_path,split";
constexpr std::size_t kColumns = 7;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string at_line(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

void check_field(const std::string& value, const std::string& what) {
  if (value.find_first_of(",\n\r") != std::string::npos) {
    throw FormatError("manifest field " + what + " '" + value + "' contains a comma or line break");
  }
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw FormatError("unknown split '" + text + "' (expected train, val or test)");
}

std::vector<std::string> Manifest::scenes() const {
  std::set<std::string> seen;
  for (const auto& r : records) seen.insert(r.scene);
  return {seen.begin(), seen.end()};
}

std::vector<const VideoRecord*> Manifest::in_split(Split split) const {
  std::vector<const VideoRecord*> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(&r);
  }
  return out;
}

std::filesystem::path Manifest::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

void Manifest::validate() const {
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.video_id).second) throw FormatError("duplicate video_id '" + r.video_id + "'");
    if ((r.label == 0) != (r.class_name == kNormalClass) || (r.label != 0 && r.label != 1)) {
      throw FormatError("video '" + r.video_id + "': label " + std::to_string(r.label) +
                        " is inconsistent with class '" + r.class_name + "'");
    }
  }
}

Manifest parse_manifest(const std::string& text, const std::string& source) {
  Manifest manifest;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::set<std::string> ids;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line.starts_with("#")) {
        const auto pos = line.find("seed=");
        if (pos != std::string::npos) {
          try {
            manifest.seed = std::stoull(line.substr(pos + 5));
          } catch (const std::exception&) {
            throw FormatError(at_line(source, line_no) + "malformed seed comment");
          }
        }
        continue;
      }
      if (line != kHeader) {
        throw FormatError(at_line(source, line_no) + "expected header '" + kHeader + "', got '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;

    const auto fields = split_fields(line);
    if (fields.size() != kColumns) {
      throw FormatError(at_line(source, line_no) + "expected " + std::to_string(kColumns) + " columns, got " +
                        std::to_string(fields.size()));
    }
    VideoRecord r;
    r.video_id = fields[0];
    r.scene = fields[1];
    r.class_name = fields[2];
    if (fields[3] == "0") {
      r.label = 0;
    } else if (fields[3] == "1") {
      r.label = 1;
    } else {
      throw FormatError(at_line(source, line_no) + "label must be 0 or 1, got '" + fields[3] + "'");
    }
    r.visual_path = fields[4];
    r.audio_path = fields[5];
    if (!fields[6].empty()) {
      try {
        r.split = parse_split(fields[6]);
      } catch (const FormatError& e) {
        throw FormatError(at_line(source, line_no) + e.what());
      }
    }
    if (r.video_id.empty()) throw FormatError(at_line(source, line_no) + "empty video_id");
    if (!ids.insert(r.video_id).second) {
      throw FormatError(at_line(source, line_no) + "duplicate video_id '" + r.video_id + "'");
    }
    if ((r.label == 0) != (r.class_name == kNormalClass)) {
      throw FormatError(at_line(source, line_no) + "label " + fields[3] + " is inconsistent with class '" +
                        r.class_name + "'");
    }
    manifest.records.push_back(std::move(r));
  }
  if (!header_seen) throw FormatError(source + ": missing header '" + std::string(kHeader) + "'");
  return manifest;
}

std::string format_manifest(const Manifest& manifest) {
  manifest.validate();
  std::ostringstream out;
  if (manifest.seed) out << "# seed=" << *manifest.seed << "\n";
  out << kHeader << "\n";
  for (const auto& r : manifest.records) {
    check_field(r.video_id, "video_id");
    check_field(r.scene, "scene");
    check_field(r.class_name, "class_name");
    check_field(r.visual_path, "visual_path");
    check_field(r.audio_path, "audio_path");
    out << r.video_id << ',' << r.scene << ',' << r.class_name << ',' << r.label << ',' << r.visual_path << ','
        << r.audio_path << ',' << (r.split ? to_string(*r.split) : "") << "\n";
  }
  return out.str();
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  Manifest m = parse_manifest(buffer.str(), path.string());
  m.base_dir = path.parent_path();
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  // Relative paths are rewritten so they still resolve from the new location.
  Manifest rebased = manifest;
  if (!manifest.base_dir.empty()) {
    const std::filesystem::path target = std::filesystem::absolute(path).parent_path();
    for (auto& r : rebased.records) {
      for (std::string* p : {&r.visual_path, &r.audio_path}) {
        if (std::filesystem::path(*p).is_absolute()) continue;
        const auto full = std::filesystem::absolute(manifest.base_dir / *p).lexically_normal();
        *p = full.lexically_relative(target).generic_string();
      }
    }
  }
  const std::string text = format_manifest(rebased);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << text;
  if (!out) throw IoError("failed writing manifest " + path.string());
}

}  // namespace avaca
