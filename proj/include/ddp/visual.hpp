#pragma once

// Frame preparation for the visual model: pluggable face detection,
// single-face filtering, margin crops and bilinear resizing.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddp/core.hpp"
#include "ddp/media.hpp"

namespace ddp {

enum class VisualMode { single_face, full_frame };

inline VisualMode parse_visual_mode(std::string_view s) {
  if (s == "single_face") return VisualMode::single_face;
  if (s == "full_frame") return VisualMode::full_frame;
  throw UsageError("unknown visual mode '" + std::string(s) + "'");
}

inline std::string_view to_string(VisualMode m) {
  return m == VisualMode::single_face ? "single_face" : "full_frame";
}

struct VisualConfig {
  int image_size = 64;
  double crop_margin = 0.2;
  VisualMode mode = VisualMode::single_face;

  void validate() const {
    if (image_size < 8) throw UsageError("image_size must be >= 8");
    if (!(crop_margin >= 0.0)) throw UsageError("crop_margin must be >= 0");
  }
};

struct FaceBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  double confidence = 1.0;

  friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

/// Raised when a detector fails on a frame; the message names the frame.
struct DetectorError : DataError {
  using DataError::DataError;
};

inline std::string frame_id(const Frame& f) {
  return f.source_video + "@" + std::to_string(std::llround(f.timestamp_s * 100.0)) + "cs";
}

class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
  /// Raw detections; may extend outside the image.
  virtual std::vector<FaceBox> detect(const Frame& frame) const = 0;
};

/// Deterministic detector for tests: a fixed answer, or a function of the frame.
class StubDetector final : public FaceDetector {
 public:
  explicit StubDetector(std::vector<FaceBox> boxes) : fn_([b = std::move(boxes)](const Frame&) { return b; }) {}
  explicit StubDetector(std::function<std::vector<FaceBox>(const Frame&)> fn) : fn_(std::move(fn)) {}
  std::string name() const override { return "stub"; }
  std::string version() const override { return "1"; }
  std::vector<FaceBox> detect(const Frame& frame) const override { return fn_(frame); }

 private:
  std::function<std::vector<FaceBox>(const Frame&)> fn_;
};

/// Reports the whole image as the single face.
class FullImageDetector final : public FaceDetector {
 public:
  std::string name() const override { return "full_image"; }
  std::string version() const override { return "1"; }
  std::vector<FaceBox> detect(const Frame& frame) const override {
    return {FaceBox{0.0, 0.0, static_cast<double>(frame.pixels.width),
                    static_cast<double>(frame.pixels.height), 1.0}};
  }
};

// ---------------------------------------------------------------------------
// Detection cache: one JSON line per frame, {timestamp_s, boxes:[...]}

using DetectionLog = std::map<long long, std::vector<FaceBox>>;  // centisecond -> boxes

inline long long centiseconds(double t) { return std::llround(t * 100.0); }

inline nlohmann::ordered_json box_to_json(const FaceBox& b) {
  return {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"confidence", b.confidence}};
}

inline FaceBox box_from_json(const nlohmann::json& j) {
  return FaceBox{j.at("x"), j.at("y"), j.at("w"), j.at("h"), j.value("confidence", 1.0)};
}

inline void write_detection_log(const std::filesystem::path& path, const DetectionLog& log) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write detection cache " + path.string());
  for (const auto& [cs, boxes] : log) {
    nlohmann::ordered_json j;
    j["timestamp_s"] = static_cast<double>(cs) / 100.0;
    j["boxes"] = nlohmann::ordered_json::array();
    for (const auto& b : boxes) j["boxes"].push_back(box_to_json(b));
    out << j.dump() << '\n';
  }
}

inline DetectionLog read_detection_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open detection cache " + path.string());
  DetectionLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto& boxes = log[centiseconds(j.at("timestamp_s").get<double>())];
      for (const auto& b : j.at("boxes")) boxes.push_back(box_from_json(b));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt detection cache " + path.string() + ": " + e.what());
    }
  }
  return log;
}

/// Replays detections recorded in per-video logs (<dir>/<video_id>.jsonl).
class ReplayDetector final : public FaceDetector {
 public:
  explicit ReplayDetector(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string name() const override { return "replay"; }
  std::string version() const override { return "1"; }
  std::vector<FaceBox> detect(const Frame& frame) const override {
    auto it = logs_.find(frame.source_video);
    if (it == logs_.end()) {
      const auto path = dir_ / (frame.source_video + ".jsonl");
      if (!std::filesystem::exists(path))
        throw DetectorError("no recorded detections for frame " + frame_id(frame));
      it = logs_.emplace(frame.source_video, read_detection_log(path)).first;
    }
    auto hit = it->second.find(centiseconds(frame.timestamp_s));
    if (hit == it->second.end()) throw DetectorError("no recorded detections for frame " + frame_id(frame));
    return hit->second;
  }

 private:
  std::filesystem::path dir_;
  mutable std::map<std::string, DetectionLog> logs_;
};

/// Adapter for an external detector process (for example an MTCNN script).
/// The command receives a PPM path as its last argument and prints a JSON
/// array of {x, y, w, h, confidence} objects.
class ExternalCommandDetector final : public FaceDetector {
 public:
  ExternalCommandDetector(std::string command, std::string version)
      : command_(std::move(command)), version_(std::move(version)) {}
  std::string name() const override { return "command:" + command_; }
  std::string version() const override { return version_; }
  std::vector<FaceBox> detect(const Frame& frame) const override {
    const auto tmp = std::filesystem::temp_directory_path() /
                     ("ddp_detect_" + Fnv64{}.add(frame_id(frame)).hex() + ".ppm");
    detail::write_file_bytes(tmp, encode_ppm(frame.pixels));
    std::string out;
    FILE* pipe = ::popen((command_ + " '" + tmp.string() + "' 2>/dev/null").c_str(), "r");
    if (!pipe) throw DetectorError("cannot launch detector for frame " + frame_id(frame));
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = ::pclose(pipe);
    std::filesystem::remove(tmp);
    if (status != 0) throw DetectorError("detector failed on frame " + frame_id(frame));
    try {
      std::vector<FaceBox> boxes;
      for (const auto& b : nlohmann::json::parse(out)) boxes.push_back(box_from_json(b));
      return boxes;
    } catch (const nlohmann::json::exception&) {
      throw DetectorError("unparseable detector output for frame " + frame_id(frame));
    }
  }

 private:
  std::string command_;
  std::string version_;
};

// ---------------------------------------------------------------------------
// Geometry

/// Intersects the box with the image; returns nullopt when nothing is left.
inline std::optional<FaceBox> clamp_box(const FaceBox& b, int width, int height) {
  const double x0 = std::clamp(b.x, 0.0, static_cast<double>(width));
  const double y0 = std::clamp(b.y, 0.0, static_cast<double>(height));
  const double x1 = std::clamp(b.x + b.w, 0.0, static_cast<double>(width));
  const double y1 = std::clamp(b.y + b.h, 0.0, static_cast<double>(height));
  if (!(x1 > x0) || !(y1 > y0)) return std::nullopt;
  return FaceBox{x0, y0, x1 - x0, y1 - y0, std::clamp(b.confidence, 0.0, 1.0)};
}

inline std::vector<FaceBox> detect_faces(const Frame& frame, const FaceDetector& detector) {
  std::vector<FaceBox> raw;
  try {
    raw = detector.detect(frame);
  } catch (const DetectorError&) {
    throw;
  } catch (const std::exception& e) {
    throw DetectorError("detector '" + detector.name() + "' failed on frame " + frame_id(frame) +
                        ": " + e.what());
  }
  std::vector<FaceBox> out;
  for (const auto& b : raw)
    if (auto c = clamp_box(b, frame.pixels.width, frame.pixels.height)) out.push_back(*c);
  return out;
}

/// Bilinear resize with half-pixel centers and edge clamping.
inline Image resize_image(const Image& src, int target_h, int target_w) {
  require(src.height >= 1 && src.width >= 1, "resize_image: empty source");
  require(target_h >= 1 && target_w >= 1, "resize_image: empty target");
  Image out(target_h, target_w);
  const double sy = static_cast<double>(src.height) / target_h;
  const double sx = static_cast<double>(src.width) / target_w;
  for (int y = 0; y < target_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(y0, x0, c) * (1.0 - wx) + src.at(y0, x1, c) * wx;
        const double bot = src.at(y1, x0, c) * (1.0 - wx) + src.at(y1, x1, c) * wx;
        out.at(y, x, c) = static_cast<float>(std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0));
      }
    }
  }
  return out;
}

inline Image resize_image(const Image& src, int target) { return resize_image(src, target, target); }

inline Image crop_image(const Image& src, int x0, int y0, int x1, int y1) {
  require(0 <= x0 && x0 < x1 && x1 <= src.width && 0 <= y0 && y0 < y1 && y1 <= src.height,
          "crop_image: region outside image");
  Image out(y1 - y0, x1 - x0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int c = 0; c < 3; ++c) out.at(y - y0, x - x0, c) = src.at(y, x, c);
  return out;
}

/// Box grown by margin * size on every side, snapped outward to pixels and
/// clamped to the image.
inline Image crop_face(const Image& img, const FaceBox& box, double margin) {
  const double mx = margin * box.w, my = margin * box.h;
  const int x0 = std::clamp(static_cast<int>(std::floor(box.x - mx)), 0, img.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(box.y - my)), 0, img.height - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(box.x + box.w + mx)), x0 + 1, img.width);
  const int y1 = std::clamp(static_cast<int>(std::ceil(box.y + box.h + my)), y0 + 1, img.height);
  return crop_image(img, x0, y0, x1, y1);
}

/// single_face keeps frames with exactly one detection and crops to it;
/// full_frame keeps every frame whole. Survivors are resized to
/// image_size x image_size.
inline std::vector<Frame> filter_and_crop(const std::vector<Frame>& frames, const FaceDetector& detector,
                                          const VisualConfig& config) {
  config.validate();
  std::vector<Frame> out;
  for (const auto& f : frames) {
    if (config.mode == VisualMode::full_frame) {
      out.push_back(Frame{resize_image(f.pixels, config.image_size), f.timestamp_s, f.source_video});
      continue;
    }
    const auto boxes = detect_faces(f, detector);
    if (boxes.size() != 1) continue;
    out.push_back(Frame{resize_image(crop_face(f.pixels, boxes.front(), config.crop_margin), config.image_size),
                        f.timestamp_s, f.source_video});
  }
  return out;
}

}  // namespace ddp
