#pragma once

// Spectral kernels: FFT, Hann window, mel filterbank and the per-frame
// descriptors (ZCR, RMS, rolloff, bandwidth, chroma).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "ddp/core.hpp"

namespace ddp::dsp {

inline constexpr double kPi = std::numbers::pi;

/// Pitch of C0 in Hz; chroma class 0 is C.
inline constexpr double kC0Hz = 16.3516;

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Periodic Hann window of length n.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 FFT; falls back to a direct DFT for other sizes.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  if (!is_power_of_two(n)) {
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t t = 0; t < n; ++t)
        acc += a[t] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * t % n) / static_cast<double>(n));
      out[k] = acc;
    }
    a.swap(out);
    return;
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

/// |X_k| for k = 0..n/2 of the windowed frame.
inline std::vector<double> magnitude_spectrum(std::span<const double> frame,
                                              std::span<const double> window) {
  require(frame.size() == window.size(), "magnitude_spectrum: window length mismatch");
  std::vector<std::complex<double>> buf(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i] * window[i];
  fft(buf);
  std::vector<double> mag(frame.size() / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
  return mag;
}

inline std::vector<double> bin_frequencies(std::size_t n_fft, double sample_rate) {
  std::vector<double> f(n_fft / 2 + 1);
  for (std::size_t k = 0; k < f.size(); ++k)
    f[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
  return f;
}

/// Triangular filters with peaks equally spaced on the mel scale. Row j spans
/// [edge_j, edge_{j+2}] with unit peak at edge_{j+1}.
struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  std::vector<double> center_hz;  // n_mels
  std::vector<double> weights;    // n_mels x n_bins, row-major

  double weight(std::size_t mel, std::size_t bin) const { return weights[mel * n_bins + bin]; }

  /// Index of the filter whose peak is closest to f.
  std::size_t nearest_band(double f) const {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n_mels; ++j)
      if (std::abs(center_hz[j] - f) < std::abs(center_hz[best] - f)) best = j;
    return best;
  }
};

inline MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate,
                                    double f_min, double f_max) {
  require(n_mels >= 1, "mel_filterbank: n_mels must be >= 1");
  require(f_min < f_max && f_max <= sample_rate / 2.0 + 1e-9,
          "mel_filterbank: need f_min < f_max <= sample_rate/2");
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_fft / 2 + 1;
  const double m_lo = hz_to_mel(f_min), m_hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  fb.center_hz.assign(edges.begin() + 1, edges.end() - 1);
  const auto freqs = bin_frequencies(n_fft, sample_rate);
  fb.weights.assign(n_mels * fb.n_bins, 0.0);
  for (std::size_t j = 0; j < n_mels; ++j) {
    const double lo = edges[j], c = edges[j + 1], hi = edges[j + 2];
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = freqs[k];
      double w = 0.0;
      if (f >= lo && f <= c)
        w = (f - lo) / (c - lo);
      else if (f > c && f <= hi)
        w = (hi - f) / (hi - c);
      fb.weights[j * fb.n_bins + k] = w;
    }
  }
  return fb;
}

/// Σ_k w_jk · power_k for every band.
inline std::vector<double> apply_filterbank(const MelFilterbank& fb, std::span<const double> power) {
  require(power.size() == fb.n_bins, "apply_filterbank: bin count mismatch");
  std::vector<double> out(fb.n_mels, 0.0);
  for (std::size_t j = 0; j < fb.n_mels; ++j) {
    double acc = 0.0;
    const double* w = &fb.weights[j * fb.n_bins];
    for (std::size_t k = 0; k < fb.n_bins; ++k) acc += w[k] * power[k];
    out[j] = acc;
  }
  return out;
}

inline double power_to_db(double p) { return 10.0 * std::log10(p + 1e-10); }

// ---------------------------------------------------------------------------
// Descriptors

/// Fraction of adjacent pairs whose signs differ; zero counts as positive.
inline double zero_crossing_rate(std::span<const double> s) {
  if (s.size() < 2) throw DataError("zero_crossing_rate needs at least 2 samples");
  std::size_t crossings = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    if ((s[i] >= 0.0) != (s[i + 1] >= 0.0)) ++crossings;
  return static_cast<double>(crossings) / static_cast<double>(s.size() - 1);
}

inline double rms(std::span<const double> s) {
  if (s.empty()) throw DataError("rms of an empty sequence");
  double acc = 0.0;
  for (double v : s) acc += v * v;
  return std::sqrt(acc / static_cast<double>(s.size()));
}

namespace detail {
inline double checked_total(std::span<const double> mags, std::span<const double> freqs,
                            const char* what) {
  require(mags.size() == freqs.size(), std::string(what) + ": magnitude/frequency length mismatch");
  double total = 0.0;
  for (double m : mags) {
    require(m >= 0.0, std::string(what) + ": negative magnitude");
    total += m;
  }
  if (!(total > 0.0)) throw DataError(std::string(what) + ": all-zero spectrum");
  return total;
}
}  // namespace detail

/// Frequency of the first bin at which cumulative magnitude reaches
/// fraction * total.
inline double spectral_rolloff(std::span<const double> mags, std::span<const double> freqs,
                               double fraction) {
  require(fraction > 0.0 && fraction < 1.0, "spectral_rolloff: fraction outside (0,1)");
  const double total = detail::checked_total(mags, freqs, "spectral_rolloff");
  const double target = fraction * total;
  double cum = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    cum += mags[k];
    if (cum >= target) return freqs[k];
  }
  return freqs.back();
}

inline double spectral_centroid(std::span<const double> mags, std::span<const double> freqs) {
  const double total = detail::checked_total(mags, freqs, "spectral_centroid");
  double acc = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) acc += mags[k] * freqs[k];
  return acc / total;
}

/// Magnitude-weighted standard deviation of frequency about the centroid.
inline double spectral_bandwidth(std::span<const double> mags, std::span<const double> freqs) {
  const double total = detail::checked_total(mags, freqs, "spectral_bandwidth");
  const double c = spectral_centroid(mags, freqs);
  double acc = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) acc += mags[k] * (freqs[k] - c) * (freqs[k] - c);
  return std::sqrt(acc / total);
}

inline int pitch_class(double f) {
  const long n = std::lround(12.0 * std::log2(f / kC0Hz));
  return static_cast<int>(((n % 12) + 12) % 12);
}

/// Squared magnitudes folded onto 12 pitch classes, scaled to max 1. The DC
/// bin (and any f <= 0) is excluded.
inline std::vector<double> chroma_profile(std::span<const double> mags,
                                          std::span<const double> freqs) {
  require(mags.size() == freqs.size(), "chroma_profile: magnitude/frequency length mismatch");
  std::vector<double> chroma(12, 0.0);
  bool voiced = false;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    if (freqs[k] <= 0.0 || mags[k] <= 0.0) continue;
    voiced = true;
    chroma[pitch_class(freqs[k])] += mags[k] * mags[k];
  }
  if (!voiced) throw DataError("chroma_profile: no voiced bins");
  const double mx = *std::max_element(chroma.begin(), chroma.end());
  if (!(mx > 0.0)) throw DataError("chroma_profile: spectral energy underflows");
  for (auto& v : chroma) v /= mx;
  return chroma;
}

}  // namespace ddp::dsp
