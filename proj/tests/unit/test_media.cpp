#include <gtest/gtest.h>

#include <cmath>

#include "ddp/media.hpp"
#include "support/test_util.hpp"

using namespace ddp;
using ddp::testing::TempDir;

namespace {

// In-process source of known duration; frame brightness encodes the time.
class FakeSource final : public MediaSource {
 public:
  FakeSource(double duration, RawAudio audio = {}) : duration_(duration), audio_(std::move(audio)) {}
  double duration_s() const override { return duration_; }
  Image frame_at(double t) const override { return Image(2, 3, static_cast<float>(std::min(t / 100.0, 1.0))); }
  bool has_audio() const override { return !audio_.channels.empty(); }
  RawAudio audio() const override { return audio_; }

 private:
  double duration_;
  RawAudio audio_;
};

RawAudio mono(std::vector<double> x, int rate) {
  RawAudio a;
  a.sample_rate = rate;
  a.channels.push_back(std::move(x));
  return a;
}

}  // namespace

TEST(ExtractFrames, ThreeSeconds) {
  const auto frames = extract_frames(FakeSource(3.0), "v", IngestConfig{});
  ASSERT_EQ(frames.size(), 30u);
  EXPECT_DOUBLE_EQ(frames.front().timestamp_s, 0.0);
  EXPECT_NEAR(frames.back().timestamp_s, 2.9, 1e-12);
  for (const auto& f : frames) EXPECT_EQ(f.source_video, "v");
}

TEST(ExtractFrames, ShorterThanOneStep) {
  const auto frames = extract_frames(FakeSource(0.05), "v", IngestConfig{});
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_DOUBLE_EQ(frames[0].timestamp_s, 0.0);
}

TEST(ExtractFrames, ZeroDurationIsEmpty) {
  EXPECT_TRUE(extract_frames(FakeSource(0.0), "v", IngestConfig{}).empty());
}

TEST(ExtractFrames, FuzzedDurationsMatchCeil) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    IngestConfig c;
    c.frame_step_s = rng.uniform() < 0.5 ? 0.1 : rng.uniform(0.01, 0.5);
    // Durations on the step grid and off it.
    const double d = rng.uniform() < 0.3 ? static_cast<double>(rng.between(1, 200)) * c.frame_step_s
                                         : rng.uniform(0.001, 20.0);
    const auto frames = extract_frames(FakeSource(d), "v", c);
    const double ratio = d / c.frame_step_s;
    const double nearest = std::round(ratio);
    const auto expected = static_cast<std::size_t>(std::abs(ratio - nearest) < 1e-9 ? nearest : std::ceil(ratio));
    ASSERT_EQ(frames.size(), expected) << "d=" << d << " step=" << c.frame_step_s;
    for (std::size_t k = 1; k < frames.size(); ++k) ASSERT_GT(frames[k].timestamp_s, frames[k - 1].timestamp_s);
    if (!frames.empty()) ASSERT_LT(frames.back().timestamp_s, d);
  }
}

TEST(ExtractFrames, CorruptFileIsDataError) {
  TempDir dir("media_corrupt");
  detail::write_file_bytes(dir.path() / "bad.ddpv", "DDPV 1\n{\"width\":2}\n");
  EXPECT_THROW(extract_frames(dir.path() / "bad.ddpv", "bad", IngestConfig{}), DataError);
  detail::write_file_bytes(dir.path() / "junk.ddpv", "garbage");
  EXPECT_THROW(extract_frames(dir.path() / "junk.ddpv", "junk", IngestConfig{}), DataError);
}

TEST(ExtractAudio, IdentityAtTargetRate) {
  std::vector<double> x(1000);
  Rng rng(1);
  for (auto& v : x) v = rng.uniform(-0.9, 0.9);
  const auto clip = extract_audio(FakeSource(1.0, mono(x, 16000)), "v", IngestConfig{});
  EXPECT_EQ(clip.samples, x);
  EXPECT_EQ(clip.sample_rate, 16000);
  EXPECT_EQ(clip.source_video, "v");
}

TEST(ExtractAudio, UpsampleLength) {
  const auto clip = extract_audio(FakeSource(1.0, mono(std::vector<double>(8000, 0.1), 8000)), "v", IngestConfig{});
  EXPECT_EQ(clip.samples.size(), 16000u);
}

TEST(ExtractAudio, OppositeChannelsCancel) {
  std::vector<double> x(4410);
  Rng rng(2);
  for (auto& v : x) v = rng.uniform(-1, 1);
  std::vector<double> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  RawAudio a;
  a.sample_rate = 44100;
  a.channels = {x, neg};
  const auto clip = extract_audio(FakeSource(0.1, a), "v", IngestConfig{});
  EXPECT_EQ(clip.samples.size(), 1600u);
  for (double v : clip.samples) EXPECT_EQ(v, 0.0);
}

TEST(ExtractAudio, NoAudioIsDataError) {
  EXPECT_THROW(extract_audio(FakeSource(1.0), "v", IngestConfig{}), DataError);
}

TEST(ExtractAudio, RangeFinitenessAndDeterminism) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(static_cast<std::size_t>(rng.between(10, 3000)));
    for (auto& v : x) v = rng.uniform(-1.5, 1.5);  // out-of-range input gets clamped
    const int rate = static_cast<int>(rng.between(4000, 48000));
    const auto a = extract_audio(FakeSource(1.0, mono(x, rate)), "v", IngestConfig{});
    const auto b = extract_audio(FakeSource(1.0, mono(x, rate)), "v", IngestConfig{});
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_EQ(a.samples.size(), static_cast<std::size_t>(std::llround(x.size() * 16000.0 / rate)));
    for (double v : a.samples) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_LE(std::abs(v), 1.0);
    }
  }
}

TEST(ResampleLinear, MatchesInterpolationOracle) {
  const std::vector<double> x{0.0, 1.0, 0.0, -1.0};
  // 2 -> 3 Hz: source positions 0, 2/3, 4/3, 2, 8/3, 10/3 (the last holds the edge).
  const auto z = resample_linear(x, 2, 3);
  ASSERT_EQ(z.size(), 6u);
  const double expect[] = {0.0, 2.0 / 3, 2.0 / 3, 0.0, -2.0 / 3, -1.0};
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(z[i], expect[i], 1e-12) << i;
}

TEST(Transcript, Normalization) {
  TempDir dir("transcript");
  detail::write_file_bytes(dir.path() / "a.txt", "I um did not");
  EXPECT_EQ(load_transcript(dir.path() / "a.txt", "a").text, "I um did not");
  detail::write_file_bytes(dir.path() / "b.txt", "\xEF\xBB\xBFline one\r\nline two\rthree");
  EXPECT_EQ(load_transcript(dir.path() / "b.txt").text, "line one\nline two\nthree");
  detail::write_file_bytes(dir.path() / "c.txt", "");
  EXPECT_EQ(load_transcript(dir.path() / "c.txt").text, "");
  detail::write_file_bytes(dir.path() / "d.txt", "caf\xC3\xA9");
  EXPECT_EQ(load_transcript(dir.path() / "d.txt").text, "caf\xC3\xA9");
}

TEST(Transcript, Errors) {
  TempDir dir("transcript_err");
  EXPECT_THROW(load_transcript(dir.path() / "missing.txt"), DataError);
  detail::write_file_bytes(dir.path() / "bad.txt", "ok \xC3\x28 bad");
  EXPECT_THROW(load_transcript(dir.path() / "bad.txt"), DataError);
  detail::write_file_bytes(dir.path() / "overlong.txt", "\xC0\xAF");
  EXPECT_THROW(load_transcript(dir.path() / "overlong.txt"), DataError);
}

TEST(Ddpv, RoundTripThroughFile) {
  TempDir dir("ddpv");
  std::vector<Image> frames;
  for (int k = 0; k < 5; ++k) {
    Image img(4, 6);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>((i * 7 + k * 31) % 256) / 255.0f;
    frames.push_back(img);
  }
  RawAudio audio;
  audio.sample_rate = 8000;
  audio.channels = {std::vector<double>(800, 0.25), std::vector<double>(800, -0.5)};
  detail::write_file_bytes(dir.path() / "v.ddpv", encode_ddpv(frames, 10.0, audio));
  const auto src = open_media(dir.path() / "v.ddpv");
  EXPECT_DOUBLE_EQ(src->duration_s(), 0.5);
  const auto got = extract_frames(*src, "v", IngestConfig{});
  ASSERT_EQ(got.size(), 5u);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(got[k].pixels, frames[k]) << k;
  const auto clip = extract_audio(*src, "v", IngestConfig{});
  EXPECT_EQ(clip.samples.size(), 1600u);
  for (double v : clip.samples) EXPECT_NEAR(v, -0.125, 1e-7);
}

TEST(DemuxCache, RoundTrip) {
  TempDir dir("cache");
  std::vector<Frame> frames;
  for (int k = 0; k < 3; ++k) {
    Image img(3, 2);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i + k) / 255.0f;
    frames.push_back(Frame{img, k * 0.1, "v"});
  }
  write_frame_cache(dir.path(), frames);
  const auto back = read_frame_cache(dir.path(), "v");
  ASSERT_EQ(back.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(back[k].pixels, frames[k].pixels);
    EXPECT_NEAR(back[k].timestamp_s, frames[k].timestamp_s, 1e-12);
  }
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples = {0.5, -0.25, 0.125};
  write_audio_cache(dir.path(), clip);
  const auto a = read_audio_cache(dir.path(), "v");
  EXPECT_EQ(a.sample_rate, 16000);
  EXPECT_EQ(a.samples, clip.samples);
  EXPECT_EQ(detail::read_file_bytes(dir.path() / "audio.raw").substr(0, 11), "rate=16000\n");
}
