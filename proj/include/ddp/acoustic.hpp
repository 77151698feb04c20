#pragma once

// Acoustic pipeline: fixed-length chunking, time-shift and spectrogram
// masking augmentation, mel spectrograms, the 25-slot feature vector and
// z-score normalization.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddp/core.hpp"
#include "ddp/dsp.hpp"
#include "ddp/media.hpp"

namespace ddp {

struct AcousticConfig {
  double chunk_len_s = 4.0;
  double remainder_keep_fraction = 0.5;
  std::size_t frame_len = 512;
  std::size_t hop = 160;
  double rolloff_fraction = 0.85;
  std::size_t n_mel_summary_bands = 9;

  void validate() const {
    if (!(chunk_len_s > 0.0)) throw UsageError("chunk_len_s must be positive");
    if (!(remainder_keep_fraction > 0.0 && remainder_keep_fraction <= 1.0))
      throw UsageError("remainder_keep_fraction must lie in (0,1]");
    if (frame_len < 2 || hop == 0 || hop > frame_len) throw UsageError("need 0 < hop <= frame_len");
    if (!(rolloff_fraction > 0.0 && rolloff_fraction < 1.0))
      throw UsageError("rolloff_fraction must lie in (0,1)");
    if (n_mel_summary_bands != 9)
      throw UsageError("the 25-slot feature layout requires 9 mel summary bands");
  }
};

struct MelConfig {
  int sample_rate = 16000;
  std::size_t n_fft = 512;
  std::size_t hop = 160;
  std::size_t n_mels = 64;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 means sample_rate / 2

  double effective_f_max() const { return f_max > 0.0 ? f_max : sample_rate / 2.0; }

  void validate() const {
    if (sample_rate <= 0) throw UsageError("mel sample_rate must be positive");
    if (n_fft < 2 || hop == 0) throw UsageError("mel n_fft/hop invalid");
    if (n_mels < 1) throw UsageError("n_mels must be >= 1");
    if (!(f_min >= 0.0 && f_min < effective_f_max() && effective_f_max() <= sample_rate / 2.0))
      throw UsageError("mel band edges must satisfy f_min < f_max <= sample_rate/2");
  }
};

struct MelSpectrogram {
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  std::vector<double> values;  // dB, row-major [mel][frame]
  MelConfig config;
  std::string source_clip;

  double& at(std::size_t mel, std::size_t t) { return values[mel * n_frames + t]; }
  double at(std::size_t mel, std::size_t t) const { return values[mel * n_frames + t]; }
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
};

inline constexpr std::size_t kAcousticDims = 25;

/// Fixed slot layout of AcousticFeatureVector::values.
namespace acoustic_slot {
inline constexpr std::size_t chroma = 0;      // 12 pitch classes
inline constexpr std::size_t mel_bands = 12;  // 9 log band energies
inline constexpr std::size_t zcr = 21;
inline constexpr std::size_t rms = 22;
inline constexpr std::size_t rolloff = 23;
inline constexpr std::size_t bandwidth = 24;
}  // namespace acoustic_slot

struct AcousticFeatureVector {
  std::array<double, kAcousticDims> values{};
  std::string clip_id;
  double start_s = 0.0;
  /// Set for clips with no spectral energy; such rows are never trained on
  /// and are scored as abstentions.
  bool abstain = false;
};

struct AugmentConfig {
  double max_shift_fraction = 0.2;
  std::size_t n_freq_masks = 1;
  std::size_t max_freq_width = 8;
  std::size_t n_time_masks = 1;
  std::size_t max_time_width = 8;
  std::uint64_t seed = 0;
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::string fitted_on;
};

// ---------------------------------------------------------------------------
// Chunking

/// Zero-pads `clip` to exactly target_len samples.
inline AudioClip pad_silence(AudioClip clip, std::size_t target_len) {
  if (clip.samples.size() > target_len)
    throw ContractError("pad_silence: clip longer than target length");
  clip.samples.resize(target_len, 0.0);
  return clip;
}

/// Non-overlapping windows of chunk_len_s. A trailing partial window is kept
/// (zero-padded) only if it covers at least remainder_keep_fraction of a chunk.
inline std::vector<AudioClip> chunk_audio(const AudioClip& clip, const AcousticConfig& config) {
  config.validate();
  if (clip.samples.empty()) throw DataError("chunk_audio: empty clip from " + clip.source_video);
  require(clip.sample_rate > 0, "chunk_audio: sample_rate must be positive");
  const auto chunk_len =
      static_cast<std::size_t>(std::llround(config.chunk_len_s * clip.sample_rate));
  require(chunk_len > 0, "chunk_audio: chunk shorter than one sample");
  std::vector<AudioClip> chunks;
  const std::size_t n = clip.samples.size();
  for (std::size_t begin = 0, i = 0; begin < n; begin += chunk_len, ++i) {
    const std::size_t end = std::min(begin + chunk_len, n);
    if (end - begin < chunk_len &&
        static_cast<double>(end - begin) < config.remainder_keep_fraction * static_cast<double>(chunk_len))
      break;
    AudioClip c;
    c.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(end));
    c.sample_rate = clip.sample_rate;
    c.source_video = clip.source_video;
    c.start_s = clip.start_s + static_cast<double>(i) * config.chunk_len_s;
    chunks.push_back(pad_silence(std::move(c), chunk_len));
  }
  return chunks;
}

// ---------------------------------------------------------------------------
// Augmentation (training data only)

/// out[(i + k) mod n] = in[i].
inline AudioClip circular_shift(AudioClip clip, long k) {
  const auto n = static_cast<long>(clip.samples.size());
  if (n == 0) return clip;
  std::vector<double> out(clip.samples.size());
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(((i + k) % n + n) % n)] = clip.samples[i];
  clip.samples = std::move(out);
  return clip;
}

/// Shift drawn uniformly from [-max_shift, max_shift] where
/// max_shift = floor(max_shift_fraction * n). Seeded per (clip id, seed).
inline long draw_time_shift(const AudioClip& clip, const AugmentConfig& config) {
  const auto max_shift = static_cast<long>(
      std::floor(config.max_shift_fraction * static_cast<double>(clip.samples.size())));
  if (max_shift <= 0) return 0;
  Rng rng(derive_seed(config.seed, "time_shift:" + clip.clip_id()));
  return static_cast<long>(rng.between(-max_shift, max_shift));
}

inline AudioClip time_shift(const AudioClip& clip, const AugmentConfig& config) {
  if (clip.samples.empty()) throw DataError("time_shift: empty clip");
  return circular_shift(clip, draw_time_shift(clip, config));
}

struct Stripe {
  std::size_t start = 0;
  std::size_t width = 0;
};

struct MaskPlan {
  std::vector<Stripe> freq;
  std::vector<Stripe> time;
};

inline MaskPlan draw_masks(std::size_t n_mels, std::size_t n_frames, const std::string& source_clip,
                           const AugmentConfig& config) {
  if ((config.n_freq_masks > 0 && config.max_freq_width >= n_mels) ||
      (config.n_time_masks > 0 && config.max_time_width >= n_frames))
    throw ContractError("spec_augment: mask width must be smaller than the axis");
  Rng rng(derive_seed(config.seed, "spec_augment:" + source_clip));
  MaskPlan plan;
  auto draw = [&](std::size_t max_w, std::size_t axis) {
    const auto w = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(max_w)));
    const auto s = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(axis - w)));
    return Stripe{s, w};
  };
  for (std::size_t i = 0; i < config.n_freq_masks; ++i) plan.freq.push_back(draw(config.max_freq_width, n_mels));
  for (std::size_t i = 0; i < config.n_time_masks; ++i) plan.time.push_back(draw(config.max_time_width, n_frames));
  return plan;
}

/// Sets every masked cell to the mean of the unmasked input matrix.
inline MelSpectrogram apply_masks(MelSpectrogram mel, const MaskPlan& plan) {
  const double fill = mel.mean();
  for (const auto& s : plan.freq)
    for (std::size_t m = s.start; m < s.start + s.width && m < mel.n_mels; ++m)
      for (std::size_t t = 0; t < mel.n_frames; ++t) mel.at(m, t) = fill;
  for (const auto& s : plan.time)
    for (std::size_t t = s.start; t < s.start + s.width && t < mel.n_frames; ++t)
      for (std::size_t m = 0; m < mel.n_mels; ++m) mel.at(m, t) = fill;
  return mel;
}

inline MelSpectrogram spec_augment(const MelSpectrogram& mel, const AugmentConfig& config) {
  return apply_masks(mel, draw_masks(mel.n_mels, mel.n_frames, mel.source_clip, config));
}

// ---------------------------------------------------------------------------
// Mel spectrogram

inline MelSpectrogram mel_spectrogram(const AudioClip& clip, const MelConfig& config) {
  config.validate();
  if (clip.samples.size() < config.n_fft)
    throw DataError("mel_spectrogram: clip shorter than n_fft (" + clip.clip_id() + ")");
  const auto fb = dsp::mel_filterbank(config.n_mels, config.n_fft, config.sample_rate,
                                      config.f_min, config.effective_f_max());
  const auto window = dsp::hann_window(config.n_fft);
  MelSpectrogram mel;
  mel.n_mels = config.n_mels;
  mel.n_frames = 1 + (clip.samples.size() - config.n_fft) / config.hop;
  mel.values.assign(mel.n_mels * mel.n_frames, 0.0);
  mel.config = config;
  mel.source_clip = clip.clip_id();
  std::vector<double> power(fb.n_bins);
  for (std::size_t t = 0; t < mel.n_frames; ++t) {
    const std::span<const double> frame(clip.samples.data() + t * config.hop, config.n_fft);
    const auto mag = dsp::magnitude_spectrum(frame, window);
    for (std::size_t k = 0; k < mag.size(); ++k) power[k] = mag[k] * mag[k];
    const auto bands = dsp::apply_filterbank(fb, power);
    for (std::size_t m = 0; m < mel.n_mels; ++m) mel.at(m, t) = dsp::power_to_db(bands[m]);
  }
  return mel;
}

// ---------------------------------------------------------------------------
// 25-slot feature vector

/// Per-frame means over (frame_len, hop) Hann frames. ZCR, RMS and mel band
/// energies average over all frames; chroma, rolloff and bandwidth average
/// over frames that carry spectral energy. A clip with no such frame is
/// returned flagged `abstain`.
inline AcousticFeatureVector acoustic_features(const AudioClip& clip, const AcousticConfig& acfg,
                                               const MelConfig& mcfg) {
  acfg.validate();
  mcfg.validate();
  if (clip.samples.size() < acfg.frame_len)
    throw DataError("acoustic_features: clip shorter than one frame (" + clip.clip_id() + ")");
  const double rate = clip.sample_rate;
  const auto window = dsp::hann_window(acfg.frame_len);
  const auto freqs = dsp::bin_frequencies(acfg.frame_len, rate);
  const auto fb = dsp::mel_filterbank(acfg.n_mel_summary_bands, acfg.frame_len, rate, mcfg.f_min,
                                      std::min(mcfg.effective_f_max(), rate / 2.0));
  const std::size_t n_frames = 1 + (clip.samples.size() - acfg.frame_len) / acfg.hop;

  AcousticFeatureVector out;
  out.clip_id = clip.clip_id();
  out.start_s = clip.start_s;
  auto& v = out.values;
  std::size_t voiced = 0;
  std::vector<double> power(freqs.size());
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::span<const double> frame(clip.samples.data() + t * acfg.hop, acfg.frame_len);
    v[acoustic_slot::zcr] += dsp::zero_crossing_rate(frame);
    v[acoustic_slot::rms] += dsp::rms(frame);
    const auto mag = dsp::magnitude_spectrum(frame, window);
    for (std::size_t k = 0; k < mag.size(); ++k) power[k] = mag[k] * mag[k];
    const auto bands = dsp::apply_filterbank(fb, power);
    for (std::size_t b = 0; b < bands.size(); ++b) v[acoustic_slot::mel_bands + b] += dsp::power_to_db(bands[b]);

    double total = 0.0, voiced_energy = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k) {
      total += mag[k];
      if (freqs[k] > 0.0) voiced_energy += mag[k] * mag[k];
    }
    if (!(total > 0.0) || !(voiced_energy > 0.0)) continue;
    ++voiced;
    const auto chroma = dsp::chroma_profile(mag, freqs);
    for (std::size_t c = 0; c < 12; ++c) v[acoustic_slot::chroma + c] += chroma[c];
    v[acoustic_slot::rolloff] += dsp::spectral_rolloff(mag, freqs, acfg.rolloff_fraction);
    v[acoustic_slot::bandwidth] += dsp::spectral_bandwidth(mag, freqs);
  }
  const double inv_all = 1.0 / static_cast<double>(n_frames);
  v[acoustic_slot::zcr] *= inv_all;
  v[acoustic_slot::rms] *= inv_all;
  for (std::size_t b = 0; b < 9; ++b) v[acoustic_slot::mel_bands + b] *= inv_all;
  if (voiced == 0) {
    out.abstain = true;
    return out;
  }
  const double inv_voiced = 1.0 / static_cast<double>(voiced);
  for (std::size_t c = 0; c < 12; ++c) v[acoustic_slot::chroma + c] *= inv_voiced;
  v[acoustic_slot::rolloff] *= inv_voiced;
  v[acoustic_slot::bandwidth] *= inv_voiced;
  for (double x : v) check_finite(x, "acoustic features of " + out.clip_id);
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

using FeatureMatrix = std::vector<std::vector<double>>;

/// Population mean/std per column; std below 1e-12 is replaced by 1.
inline NormStats fit_normalizer(const FeatureMatrix& rows, std::string fitted_on = {}) {
  if (rows.empty()) throw DataError("fit_normalizer: empty matrix");
  const std::size_t d = rows.front().size();
  NormStats s;
  s.fitted_on = std::move(fitted_on);
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  for (const auto& r : rows) {
    require(r.size() == d, "fit_normalizer: ragged rows");
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
  }
  const double n = static_cast<double>(rows.size());
  for (auto& m : s.mean) m /= n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) s.std[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  for (auto& sd : s.std) {
    sd = std::sqrt(sd / n);
    if (sd < 1e-12) sd = 1.0;
  }
  return s;
}

inline std::vector<double> apply_normalizer(std::span<const double> row, const NormStats& stats) {
  require(row.size() == stats.mean.size(), "apply_normalizer: dimension mismatch");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - stats.mean[j]) / stats.std[j];
  return out;
}

inline FeatureMatrix apply_normalizer(const FeatureMatrix& rows, const NormStats& stats) {
  FeatureMatrix out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(apply_normalizer(r, stats));
  return out;
}

}  // namespace ddp
