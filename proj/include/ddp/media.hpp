#pragma once

// Demuxing: timestamped frames, a mono audio track and the transcript text of
// each video. Decoding sits behind MediaDecoder; the library ships a decoder
// for its own raw container (.ddpv) and an adapter that shells out to ffmpeg.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddp/core.hpp"

namespace ddp {

/// Interleaved H x W x 3 RGB image with values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double mean() const {
    double s = 0.0;
    for (float v : data) s += v;
    return data.empty() ? 0.0 : s / static_cast<double>(data.size());
  }
  friend bool operator==(const Image&, const Image&) = default;
};

struct IngestConfig {
  double frame_step_s = 0.1;
  int target_sample_rate = 16000;

  void validate() const {
    if (!(frame_step_s > 0.0)) throw UsageError("frame_step_s must be positive");
    if (target_sample_rate <= 0) throw UsageError("target_sample_rate must be positive");
  }
};

struct Frame {
  Image pixels;
  double timestamp_s = 0.0;
  std::string source_video;
};

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string source_video;
  double start_s = 0.0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  /// Identifier used for per-clip seeding and cache records.
  std::string clip_id() const {
    return source_video + "@" + std::to_string(std::llround(start_s * 1000.0)) + "ms";
  }
};

struct RawDocument {
  std::string text;
  std::string source_video;
};

/// Decoded multichannel audio at its native rate.
struct RawAudio {
  int sample_rate = 0;
  std::vector<std::vector<double>> channels;
};

/// One opened media file.
class MediaSource {
 public:
  virtual ~MediaSource() = default;
  virtual double duration_s() const = 0;
  virtual Image frame_at(double t) const = 0;
  virtual bool has_audio() const = 0;
  virtual RawAudio audio() const = 0;
};

/// Decoders are instantiated once per worker; implementations need not be
/// thread-safe.
class MediaDecoder {
 public:
  virtual ~MediaDecoder() = default;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<MediaSource> open(const std::filesystem::path& path) const = 0;
};

// ---------------------------------------------------------------------------
// .ddpv container: "DDPV 1\n", a JSON header line, uint8 RGB frames, then
// little-endian float32 interleaved audio.

struct DdpvHeader {
  int width = 0;
  int height = 0;
  double fps = 10.0;
  int n_frames = 0;
  int sample_rate = 0;
  int channels = 0;
  std::int64_t n_samples = 0;  // per channel
};

namespace detail {

inline void put_f32le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
}

inline float get_f32le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline std::uint8_t quantize_u8(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace detail

/// Serialize frames (all of one size) and interleaved audio into .ddpv bytes.
inline std::string encode_ddpv(const std::vector<Image>& frames, double fps,
                               const RawAudio& audio) {
  DdpvHeader h;
  h.n_frames = static_cast<int>(frames.size());
  h.fps = fps;
  if (!frames.empty()) {
    h.height = frames.front().height;
    h.width = frames.front().width;
  }
  h.sample_rate = audio.sample_rate;
  h.channels = static_cast<int>(audio.channels.size());
  h.n_samples = audio.channels.empty() ? 0 : static_cast<std::int64_t>(audio.channels[0].size());
  nlohmann::ordered_json j{{"width", h.width},           {"height", h.height},
                           {"fps", h.fps},               {"n_frames", h.n_frames},
                           {"sample_rate", h.sample_rate}, {"channels", h.channels},
                           {"n_samples", h.n_samples}};
  std::string out = "DDPV 1\n" + j.dump() + "\n";
  for (const auto& f : frames) {
    require(f.height == h.height && f.width == h.width, "encode_ddpv: frame size mismatch");
    for (float v : f.data) out.push_back(static_cast<char>(detail::quantize_u8(v)));
  }
  for (std::int64_t i = 0; i < h.n_samples; ++i)
    for (const auto& ch : audio.channels) detail::put_f32le(out, static_cast<float>(ch[i]));
  return out;
}

class DdpvSource final : public MediaSource {
 public:
  explicit DdpvSource(std::string bytes) : bytes_(std::move(bytes)) {
    const auto nl1 = bytes_.find('\n');
    if (nl1 == std::string::npos || bytes_.compare(0, nl1, "DDPV 1") != 0)
      throw DataError("not a DDPV stream");
    const auto nl2 = bytes_.find('\n', nl1 + 1);
    if (nl2 == std::string::npos) throw DataError("truncated DDPV header");
    try {
      const auto j = nlohmann::json::parse(bytes_.substr(nl1 + 1, nl2 - nl1 - 1));
      header_.width = j.at("width");
      header_.height = j.at("height");
      header_.fps = j.at("fps");
      header_.n_frames = j.at("n_frames");
      header_.sample_rate = j.at("sample_rate");
      header_.channels = j.at("channels");
      header_.n_samples = j.at("n_samples");
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("corrupt DDPV header: ") + e.what());
    }
    if (header_.n_frames < 0 || header_.channels < 0 || header_.n_samples < 0 ||
        !(header_.fps > 0.0) || (header_.n_frames > 0 && (header_.width <= 0 || header_.height <= 0)))
      throw DataError("corrupt DDPV header values");
    payload_ = nl2 + 1;
    const std::size_t frame_bytes =
        static_cast<std::size_t>(header_.n_frames) * header_.width * header_.height * 3;
    const std::size_t audio_bytes =
        static_cast<std::size_t>(header_.n_samples) * header_.channels * 4;
    if (bytes_.size() != payload_ + frame_bytes + audio_bytes)
      throw DataError("DDPV payload size mismatch (truncated or corrupt file)");
    audio_offset_ = payload_ + frame_bytes;
  }

  const DdpvHeader& header() const { return header_; }

  double duration_s() const override { return header_.n_frames / header_.fps; }

  Image frame_at(double t) const override {
    require(header_.n_frames > 0, "frame_at on a stream without frames");
    int idx = static_cast<int>(std::floor(t * header_.fps + 1e-9));
    idx = std::clamp(idx, 0, header_.n_frames - 1);
    Image img(header_.height, header_.width);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + payload_ +
                    static_cast<std::size_t>(idx) * img.data.size();
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = p[i] / 255.0f;
    return img;
  }

  bool has_audio() const override { return header_.channels > 0 && header_.sample_rate > 0; }

  RawAudio audio() const override {
    if (!has_audio()) throw DataError("stream has no audio");
    RawAudio a;
    a.sample_rate = header_.sample_rate;
    a.channels.assign(header_.channels, std::vector<double>(header_.n_samples));
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + audio_offset_;
    for (std::int64_t i = 0; i < header_.n_samples; ++i)
      for (int c = 0; c < header_.channels; ++c, p += 4) a.channels[c][i] = detail::get_f32le(p);
    return a;
  }

 private:
  std::string bytes_;
  DdpvHeader header_;
  std::size_t payload_ = 0;
  std::size_t audio_offset_ = 0;
};

class DdpvDecoder final : public MediaDecoder {
 public:
  std::string name() const override { return "ddpv"; }
  std::unique_ptr<MediaSource> open(const std::filesystem::path& path) const override {
    return std::make_unique<DdpvSource>(detail::read_file_bytes(path));
  }
};

/// Adapter for arbitrary containers through the ffmpeg/ffprobe executables.
class FfmpegDecoder final : public MediaDecoder {
 public:
  explicit FfmpegDecoder(std::string ffmpeg = "ffmpeg", std::string ffprobe = "ffprobe")
      : ffmpeg_(std::move(ffmpeg)), ffprobe_(std::move(ffprobe)) {}

  std::string name() const override { return "ffmpeg"; }

  std::unique_ptr<MediaSource> open(const std::filesystem::path& path) const override {
    if (!std::filesystem::exists(path)) throw DataError("media file not found: " + path.string());
    const std::string probe = run(ffprobe_ +
                                  " -v error -print_format json -show_streams -show_format " +
                                  quote(path.string()));
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(probe);
    } catch (const nlohmann::json::exception&) {
      throw DataError("ffprobe could not read " + path.string());
    }
    auto src = std::make_unique<Source>(this, path);
    try {
      src->duration = std::stod(j.at("format").at("duration").get<std::string>());
      for (const auto& s : j.at("streams")) {
        const auto type = s.value("codec_type", "");
        if (type == "video" && src->width == 0) {
          src->width = s.at("width");
          src->height = s.at("height");
        } else if (type == "audio" && src->channels == 0) {
          src->channels = s.value("channels", 1);
          src->rate = std::stoi(s.at("sample_rate").get<std::string>());
        }
      }
    } catch (const std::exception& e) {
      throw DataError("unusable ffprobe output for " + path.string() + ": " + e.what());
    }
    return src;
  }

 private:
  struct Source final : MediaSource {
    Source(const FfmpegDecoder* d, std::filesystem::path p) : dec(d), path(std::move(p)) {}
    const FfmpegDecoder* dec;
    std::filesystem::path path;
    double duration = 0.0;
    int width = 0, height = 0, channels = 0, rate = 0;

    double duration_s() const override { return duration; }
    Image frame_at(double t) const override {
      if (width <= 0) throw DataError("no video stream in " + path.string());
      char ts[32];
      std::snprintf(ts, sizeof ts, "%.3f", t);
      const std::string raw = run(dec->ffmpeg_ + " -v error -ss " + ts + " -i " +
                                  quote(path.string()) +
                                  " -frames:v 1 -f rawvideo -pix_fmt rgb24 -");
      Image img(height, width);
      if (raw.size() != img.data.size()) throw DataError("short frame read from " + path.string());
      for (std::size_t i = 0; i < raw.size(); ++i)
        img.data[i] = static_cast<unsigned char>(raw[i]) / 255.0f;
      return img;
    }
    bool has_audio() const override { return channels > 0; }
    RawAudio audio() const override {
      if (!has_audio()) throw DataError("no audio stream in " + path.string());
      const std::string raw = run(dec->ffmpeg_ + " -v error -i " + quote(path.string()) +
                                  " -vn -f f32le -acodec pcm_f32le -");
      RawAudio a;
      a.sample_rate = rate;
      a.channels.assign(channels, {});
      const std::size_t n = raw.size() / 4 / channels;
      const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
      for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < channels; ++c, p += 4) a.channels[c].push_back(detail::get_f32le(p));
      return a;
    }
  };

  static std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) out += (c == '\'') ? std::string("'\\''") : std::string(1, c);
    return out + "'";
  }

  static std::string run(const std::string& cmd) {
    FILE* pipe = ::popen((cmd + " 2>/dev/null").c_str(), "r");
    if (!pipe) throw DataError("cannot launch: " + cmd);
    std::string out;
    std::array<char, 65536> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    if (status != 0) throw DataError("media tool failed (status " + std::to_string(status) + "): " + cmd);
    return out;
  }

  std::string ffmpeg_;
  std::string ffprobe_;
};

/// .ddpv goes to the built-in decoder, anything else to ffmpeg.
inline std::unique_ptr<MediaSource> open_media(const std::filesystem::path& path) {
  if (path.extension() == ".ddpv") return DdpvDecoder{}.open(path);
  return FfmpegDecoder{}.open(path);
}

// ---------------------------------------------------------------------------
// Extraction

/// Number of frames sampled at t = 0, step, 2*step, ... strictly below duration.
inline std::size_t frame_count(double duration_s, double step_s) {
  if (!(duration_s > 0.0)) return 0;
  return static_cast<std::size_t>(std::ceil(duration_s / step_s - 1e-9));
}

inline std::vector<Frame> extract_frames(const MediaSource& source, const std::string& video_id,
                                         const IngestConfig& config) {
  config.validate();
  const std::size_t n = frame_count(source.duration_s(), config.frame_step_s);
  std::vector<Frame> frames;
  frames.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * config.frame_step_s;
    frames.push_back(Frame{source.frame_at(t), t, video_id});
  }
  return frames;
}

inline std::vector<Frame> extract_frames(const std::filesystem::path& video,
                                         const std::string& video_id, const IngestConfig& config) {
  return extract_frames(*open_media(video), video_id, config);
}

/// Linear-interpolation resampler; output length round(n * to / from).
inline std::vector<double> resample_linear(const std::vector<double>& in, int from_rate,
                                           int to_rate) {
  require(from_rate > 0 && to_rate > 0, "resample_linear: rates must be positive");
  if (from_rate == to_rate || in.empty()) return in;
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in.size()) * to_rate / from_rate));
  std::vector<double> out(out_len);
  const double ratio = static_cast<double>(from_rate) / to_rate;
  for (std::size_t j = 0; j < out_len; ++j) {
    const double pos = static_cast<double>(j) * ratio;
    const auto i0 = std::min(static_cast<std::size_t>(pos), in.size() - 1);
    const auto i1 = std::min(i0 + 1, in.size() - 1);
    const double frac = pos - static_cast<double>(i0);
    out[j] = in[i0] + (in[i1] - in[i0]) * std::min(frac, 1.0);
  }
  return out;
}

/// Mono, resampled and clamped to [-1, 1].
inline AudioClip to_mono_clip(const RawAudio& raw, const std::string& video_id,
                              const IngestConfig& config) {
  config.validate();
  if (raw.channels.empty() || raw.sample_rate <= 0) throw DataError("no audio stream in " + video_id);
  const std::size_t n = raw.channels[0].size();
  std::vector<double> mono(n, 0.0);
  for (const auto& ch : raw.channels) {
    if (ch.size() != n) throw DataError("ragged audio channels in " + video_id);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(ch[i])) throw DataError("non-finite audio sample in " + video_id);
      mono[i] += ch[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(raw.channels.size());
  for (auto& v : mono) v *= inv;
  AudioClip clip;
  clip.samples = resample_linear(mono, raw.sample_rate, config.target_sample_rate);
  for (auto& v : clip.samples) v = std::clamp(v, -1.0, 1.0);
  clip.sample_rate = config.target_sample_rate;
  clip.source_video = video_id;
  return clip;
}

inline AudioClip extract_audio(const MediaSource& source, const std::string& video_id,
                               const IngestConfig& config) {
  if (!source.has_audio()) throw DataError("no audio stream in " + video_id);
  return to_mono_clip(source.audio(), video_id, config);
}

inline AudioClip extract_audio(const std::filesystem::path& video, const std::string& video_id,
                               const IngestConfig& config) {
  return extract_audio(*open_media(video), video_id, config);
}

// ---------------------------------------------------------------------------
// Transcripts

inline bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

/// BOM stripped, CRLF and lone CR normalized to "\n".
inline std::string normalize_transcript_bytes(std::string bytes) {
  if (bytes.size() >= 3 && bytes.compare(0, 3, "\xEF\xBB\xBF") == 0) bytes.erase(0, 3);
  std::string out;
  out.reserve(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] == '\r') {
      out.push_back('\n');
      if (i + 1 < bytes.size() && bytes[i + 1] == '\n') ++i;
    } else {
      out.push_back(bytes[i]);
    }
  }
  return out;
}

inline RawDocument load_transcript(const std::filesystem::path& path,
                                   const std::string& video_id = {}) {
  if (!std::filesystem::is_regular_file(path)) throw DataError("transcript not found: " + path.string());
  std::string bytes = detail::read_file_bytes(path);
  if (!is_valid_utf8(bytes)) throw DataError("transcript is not valid UTF-8: " + path.string());
  return RawDocument{normalize_transcript_bytes(std::move(bytes)), video_id};
}

// ---------------------------------------------------------------------------
// Demux cache: <dir>/frames/<centiseconds>.ppm and <dir>/audio.raw

inline std::string frame_cache_name(double timestamp_s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08lld.ppm", static_cast<long long>(std::llround(timestamp_s * 100.0)));
  return buf;
}

inline std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.data.size());
  for (float v : img.data) out.push_back(static_cast<char>(detail::quantize_u8(v)));
  return out;
}

inline Image decode_ppm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw DataError("unsupported PPM image");
  in.get();
  Image img(h, w);
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() != offset + img.data.size()) throw DataError("truncated PPM image");
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<unsigned char>(bytes[offset + i]) / 255.0f;
  return img;
}

inline void write_frame_cache(const std::filesystem::path& dir, const std::vector<Frame>& frames) {
  const auto fdir = dir / "frames";
  std::filesystem::create_directories(fdir);
  for (const auto& f : frames)
    detail::write_file_bytes(fdir / frame_cache_name(f.timestamp_s), encode_ppm(f.pixels));
}

inline std::vector<Frame> read_frame_cache(const std::filesystem::path& dir,
                                           const std::string& video_id) {
  const auto fdir = dir / "frames";
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(fdir))
    for (const auto& e : std::filesystem::directory_iterator(fdir))
      if (e.path().extension() == ".ppm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Frame> frames;
  for (const auto& p : files) {
    const double t = std::stod(p.stem().string()) / 100.0;
    frames.push_back(Frame{decode_ppm(detail::read_file_bytes(p)), t, video_id});
  }
  return frames;
}

inline void write_audio_cache(const std::filesystem::path& dir, const AudioClip& clip) {
  std::filesystem::create_directories(dir);
  std::string out = "rate=" + std::to_string(clip.sample_rate) + "\n";
  for (double v : clip.samples) detail::put_f32le(out, static_cast<float>(v));
  detail::write_file_bytes(dir / "audio.raw", out);
}

inline AudioClip read_audio_cache(const std::filesystem::path& dir, const std::string& video_id) {
  const std::string bytes = detail::read_file_bytes(dir / "audio.raw");
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos || bytes.compare(0, 5, "rate=") != 0)
    throw DataError("corrupt audio cache in " + dir.string());
  AudioClip clip;
  clip.sample_rate = std::stoi(bytes.substr(5, nl - 5));
  clip.source_video = video_id;
  const std::size_t n = (bytes.size() - nl - 1) / 4;
  if (n * 4 != bytes.size() - nl - 1) throw DataError("truncated audio cache in " + dir.string());
  clip.samples.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + nl + 1;
  for (std::size_t i = 0; i < n; ++i) clip.samples[i] = detail::get_f32le(p + 4 * i);
  return clip;
}

}  // namespace ddp
