#pragma once

// Model artifact container: one JSON header line followed by named binary
// blocks of little-endian float64 values.
//
//   {"format_version":1,"kind":"svm","config":{...},"split":"...","seed":7,
//    "blocks":[{"name":"coef","count":12},...], ...}\n
//   <block 0 bytes><block 1 bytes>...

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddp/core.hpp"
#include "ddp/media.hpp"

namespace ddp {

inline constexpr int kArtifactFormatVersion = 1;

struct Prediction {
  std::string unit_id;
  double score = 0.5;  // P(deceptive)
  Label label = Label::deceptive;
};

inline Prediction make_prediction(std::string unit_id, double score) {
  require(score >= 0.0 && score <= 1.0, "prediction score outside [0,1]");
  return Prediction{std::move(unit_id), score, label_from_score(score)};
}

struct Artifact {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::vector<double>>> blocks;

  void add_block(std::string name, std::vector<double> values) {
    blocks.emplace_back(std::move(name), std::move(values));
  }

  const std::vector<double>& block(const std::string& name) const {
    for (const auto& [n, v] : blocks)
      if (n == name) return v;
    throw DataError("artifact has no block '" + name + "'");
  }

  std::string kind() const { return header.value("kind", std::string{}); }

  void expect_kind(const std::string& k) const {
    if (kind() != k) throw DataError("artifact kind '" + kind() + "' where '" + k + "' was expected");
  }
};

inline Artifact new_artifact(const std::string& kind) {
  Artifact a;
  a.header["format_version"] = kArtifactFormatVersion;
  a.header["kind"] = kind;
  return a;
}

inline std::string serialize_artifact(const Artifact& a) {
  nlohmann::ordered_json header = a.header;
  header["format_version"] = kArtifactFormatVersion;
  header["blocks"] = nlohmann::ordered_json::array();
  for (const auto& [name, values] : a.blocks)
    header["blocks"].push_back({{"name", name}, {"count", values.size()}});
  std::string out = header.dump() + "\n";
  for (const auto& [name, values] : a.blocks) {
    for (double v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
    }
  }
  return out;
}

inline Artifact deserialize_artifact(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw DataError("artifact has no header line");
  Artifact a;
  try {
    auto parsed = nlohmann::ordered_json::parse(bytes.substr(0, nl));
    if (!parsed.is_object()) throw DataError("artifact header is not an object");
    a.header = std::move(parsed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt artifact header: ") + e.what());
  }
  const int version = a.header.value("format_version", -1);
  if (version != kArtifactFormatVersion)
    throw DataError("artifact format_version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kArtifactFormatVersion) + ")");
  std::size_t offset = nl + 1;
  for (const auto& b : a.header.at("blocks")) {
    const auto count = b.at("count").get<std::size_t>();
    if (offset + count * 8 > bytes.size()) throw DataError("truncated artifact block");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + 8 * i + k])) << (8 * k);
      std::memcpy(&values[i], &bits, 8);
    }
    offset += count * 8;
    a.blocks.emplace_back(b.at("name").get<std::string>(), std::move(values));
  }
  if (offset != bytes.size()) throw DataError("trailing bytes after artifact blocks");
  a.header.erase("blocks");
  return a;
}

inline void save_artifact(const std::filesystem::path& path, const Artifact& a) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::write_file_bytes(path, serialize_artifact(a));
}

inline Artifact load_artifact(const std::filesystem::path& path) {
  return deserialize_artifact(detail::read_file_bytes(path));
}

}  // namespace ddp
