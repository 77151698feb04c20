#pragma once

// Seeded synthetic corpus with class signal in every modality.
//
//   deceptive: 3 kHz tone burst, bright frames (mean > 0.7), markers A
//   truthful:  300 Hz tone burst, dark frames (mean < 0.3),  markers B
//
// Each channel also carries seeded noise: white noise on the audio (a lower
// floor under the deceptive tone), pixel noise on the frames, and marker swaps plus filler words in transcripts.
// Per-frame face detections are written alongside for the replay detector;
// some frames carry a second face so single-face filtering has work to do.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "ddp/core.hpp"
#include "ddp/dataset.hpp"
#include "ddp/media.hpp"
#include "ddp/visual.hpp"

namespace ddp {

struct SyntheticSpec {
  int frame_size = 64;
  double fps = 10.0;
  int sample_rate = 22050;
  int min_frames = 40;  // 4.0 s: one full acoustic chunk
  int max_frames = 48;  // trailing remainder below the keep fraction
  double deceptive_tone_hz = 3000.0;
  double truthful_tone_hz = 300.0;
  double tone_amplitude = 0.3;
  double deceptive_noise_sd = 0.03;
  double truthful_noise_sd = 0.08;
  double pixel_noise_sd = 0.08;
  double two_face_rate = 0.15;
  double marker_swap_rate = 0.1;
};

inline const std::vector<std::string>& synthetic_markers(Label l) {
  static const std::vector<std::string> deceptive{"honestly", "swear", "definitely", "absolutely"};
  static const std::vector<std::string> truthful{"remember", "think", "maybe", "probably"};
  return l == Label::deceptive ? deceptive : truthful;
}

inline const std::vector<std::string>& synthetic_fillers() {
  static const std::vector<std::string> words{"court",  "evening", "car",    "street", "morning", "friend",
                                              "house",  "work",    "phone",  "money",  "door",    "night",
                                              "window", "office",  "dinner", "week",   "road",    "store"};
  return words;
}

inline std::string synthetic_video_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "syn_%03d", i);
  return buf;
}

namespace detail {

inline Image synthetic_frame(Rng& rng, Label label, const SyntheticSpec& s, const std::vector<FaceBox>& faces) {
  const bool dec = label == Label::deceptive;
  const double base = dec ? rng.uniform(0.75, 0.85) : rng.uniform(0.15, 0.25);
  Image img(s.frame_size, s.frame_size);
  for (int y = 0; y < s.frame_size; ++y)
    for (int x = 0; x < s.frame_size; ++x) {
      double shade = base;
      for (const auto& f : faces)
        if (x >= f.x && x < f.x + f.w && y >= f.y && y < f.y + f.h) shade = base + (dec ? -0.05 : 0.05);
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<float>(std::clamp(shade + s.pixel_noise_sd * rng.normal(), 0.0, 1.0));
    }
  return img;
}

inline FaceBox synthetic_face(Rng& rng, double cx, double cy, int size) {
  const double w = rng.uniform(0.35, 0.45) * size;
  return FaceBox{std::round(cx - w / 2 + rng.uniform(-2, 2)), std::round(cy - w / 2 + rng.uniform(-2, 2)),
                 std::round(w), std::round(w), 0.99};
}

}  // namespace detail

/// Writes media/, transcripts/, detections/ and manifest.jsonl under
/// `out_dir` and returns the manifest path. Manifest paths are relative to
/// the manifest's directory.
inline std::filesystem::path generate_synthetic_corpus(int n_videos, std::uint64_t seed,
                                                       const std::filesystem::path& out_dir,
                                                       const SyntheticSpec& spec = {}) {
  namespace fs = std::filesystem;
  if (n_videos < 8 || n_videos % 2 != 0) throw UsageError("synthetic corpus needs an even n_videos >= 8");
  std::error_code ec;
  fs::create_directories(out_dir / "media", ec);
  fs::create_directories(out_dir / "transcripts", ec);
  fs::create_directories(out_dir / "detections", ec);
  if (ec || !fs::is_directory(out_dir / "detections"))
    throw DataError("cannot create synthetic corpus under " + out_dir.string());

  // Balanced labels in a seeded order.
  std::vector<Label> labels;
  for (int i = 0; i < n_videos; ++i) labels.push_back(i < n_videos / 2 ? Label::deceptive : Label::truthful);
  Rng order(derive_seed(seed, "synthetic:labels"));
  order.shuffle(labels);

  std::vector<VideoRecord> records;
  for (int i = 0; i < n_videos; ++i) {
    const std::string id = synthetic_video_id(i);
    const Label label = labels[static_cast<std::size_t>(i)];
    Rng rng(derive_seed(seed, "synthetic:" + id));
    const int n_frames = static_cast<int>(rng.between(spec.min_frames, spec.max_frames));
    const double duration = n_frames / spec.fps;

    std::vector<Image> frames;
    DetectionLog log;
    const double c = spec.frame_size / 2.0;
    for (int k = 0; k < n_frames; ++k) {
      std::vector<FaceBox> faces;
      if (rng.uniform() < spec.two_face_rate) {
        faces.push_back(detail::synthetic_face(rng, c * 0.55, c, spec.frame_size / 2));
        faces.push_back(detail::synthetic_face(rng, c * 1.45, c, spec.frame_size / 2));
      } else {
        faces.push_back(detail::synthetic_face(rng, c, c, spec.frame_size));
      }
      frames.push_back(detail::synthetic_frame(rng, label, spec, faces));
      log[centiseconds(k / spec.fps)] = faces;
    }

    RawAudio audio;
    audio.sample_rate = spec.sample_rate;
    const auto n_samples = static_cast<std::size_t>(std::llround(duration * spec.sample_rate));
    const double f0 = label == Label::deceptive ? spec.deceptive_tone_hz : spec.truthful_tone_hz;
    const double burst_on = rng.uniform(0.1, 0.3), burst_off = duration - rng.uniform(0.1, 0.3);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double noise_sd = label == Label::deceptive ? spec.deceptive_noise_sd : spec.truthful_noise_sd;
    std::vector<double> ch(n_samples);
    for (std::size_t t = 0; t < n_samples; ++t) {
      const double time = static_cast<double>(t) / spec.sample_rate;
      double v = noise_sd * rng.normal();
      if (time >= burst_on && time < burst_off)
        v += spec.tone_amplitude * std::sin(2.0 * std::numbers::pi * f0 * time + phase);
      ch[t] = v;
    }
    audio.channels.push_back(std::move(ch));

    std::string text;
    const auto& fill = synthetic_fillers();
    const int n_words = static_cast<int>(rng.between(12, 20));
    std::vector<std::string> words;
    for (int w = 0; w < n_words; ++w) words.push_back(fill[rng.below(fill.size())]);
    const Label other = label == Label::deceptive ? Label::truthful : Label::deceptive;
    for (int m = 0; m < 3; ++m) {
      const auto& src = synthetic_markers(rng.uniform() < spec.marker_swap_rate ? other : label);
      const auto pos = static_cast<std::size_t>(rng.below(words.size() + 1));
      words.insert(words.begin() + static_cast<long>(pos), src[rng.below(src.size())]);
    }
    for (std::size_t w = 0; w < words.size(); ++w) text += (w ? " " : "") + words[w];
    text += ".\n";

    const std::string media_rel = "media/" + id + ".ddpv";
    const std::string text_rel = "transcripts/" + id + ".txt";
    detail::write_file_bytes(out_dir / media_rel, encode_ddpv(frames, spec.fps, audio));
    detail::write_file_bytes(out_dir / text_rel, text);
    write_detection_log(out_dir / "detections" / (id + ".jsonl"), log);

    VideoRecord r;
    r.id = id;
    r.dataset_tag = DatasetTag::synthetic;
    r.media_path = media_rel;
    r.transcript_path = text_rel;
    r.label = label;
    r.duration_s = duration;
    records.push_back(std::move(r));
  }
  const auto manifest = out_dir / "manifest.jsonl";
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace ddp
