#include <gtest/gtest.h>

#include <cmath>

#include "ddp/visual.hpp"
#include "support/test_util.hpp"

using namespace ddp;
using ddp::testing::TempDir;

namespace {

Frame frame(int h, int w, float fill = 0.5f, double t = 0.0, const std::string& id = "v") {
  return Frame{Image(h, w, fill), t, id};
}

Image random_image(Rng& rng, int h, int w) {
  Image img(h, w);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

}  // namespace

TEST(DetectFaces, StubCounts) {
  const auto f = frame(32, 32);
  EXPECT_TRUE(detect_faces(f, StubDetector(std::vector<FaceBox>{})).empty());
  const StubDetector two({FaceBox{1, 1, 5, 5, 0.9}, FaceBox{10, 10, 5, 5, 0.8}});
  EXPECT_EQ(detect_faces(f, two).size(), 2u);
}

TEST(DetectFaces, ClampedWithinBoundsOnFuzz) {
  Rng rng(40);
  for (int i = 0; i < 1000; ++i) {
    const int w = static_cast<int>(rng.between(1, 100)), h = static_cast<int>(rng.between(1, 100));
    const FaceBox raw{rng.uniform(-50, 150), rng.uniform(-50, 150), rng.uniform(0.1, 120), rng.uniform(0.1, 120),
                      rng.uniform(-0.5, 1.5)};
    const auto boxes = detect_faces(frame(h, w), StubDetector({raw}));
    // Oracle: the intersection of [x, x+w) x [y, y+h) with the image rectangle.
    const double ix0 = std::max(raw.x, 0.0), ix1 = std::min(raw.x + raw.w, static_cast<double>(w));
    const double iy0 = std::max(raw.y, 0.0), iy1 = std::min(raw.y + raw.h, static_cast<double>(h));
    if (ix1 <= ix0 || iy1 <= iy0) {
      ASSERT_TRUE(boxes.empty());
      continue;
    }
    ASSERT_EQ(boxes.size(), 1u);
    const auto& b = boxes[0];
    ASSERT_DOUBLE_EQ(b.x, ix0);
    ASSERT_DOUBLE_EQ(b.y, iy0);
    ASSERT_NEAR(b.w, ix1 - ix0, 1e-12);
    ASSERT_NEAR(b.h, iy1 - iy0, 1e-12);
    ASSERT_GT(b.w, 0.0);
    ASSERT_GT(b.h, 0.0);
    ASSERT_LE(b.x + b.w, w + 1e-9);
    ASSERT_LE(b.y + b.h, h + 1e-9);
    ASSERT_GE(b.confidence, 0.0);
    ASSERT_LE(b.confidence, 1.0);
  }
}

TEST(DetectFaces, FailureCarriesFrameId) {
  const StubDetector broken([](const Frame&) -> std::vector<FaceBox> { throw std::runtime_error("model crashed"); });
  try {
    detect_faces(frame(8, 8, 0.5f, 1.2, "clip7"), broken);
    FAIL() << "expected DetectorError";
  } catch (const DetectorError& e) {
    EXPECT_NE(std::string(e.what()).find("clip7@120cs"), std::string::npos) << e.what();
  }
}

TEST(FilterAndCrop, SingleFaceRule) {
  VisualConfig c;
  const std::vector<Frame> frames{frame(40, 40, 0.5f, 0.0), frame(40, 40, 0.5f, 0.1), frame(40, 40, 0.5f, 0.2)};
  // Frame 0: two faces, frame 1: none, frame 2: one.
  const StubDetector det([](const Frame& f) -> std::vector<FaceBox> {
    const long cs = std::lround(f.timestamp_s * 100);
    if (cs == 0) return {FaceBox{0, 0, 10, 10, 1}, FaceBox{20, 20, 10, 10, 1}};
    if (cs == 10) return {};
    return {FaceBox{5, 5, 20, 20, 1}};
  });
  const auto out = filter_and_crop(frames, det, c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].timestamp_s, 0.2, 1e-12);
  EXPECT_EQ(out[0].pixels.height, 64);
  EXPECT_EQ(out[0].pixels.width, 64);
  for (float v : out[0].pixels.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  c.mode = VisualMode::full_frame;
  EXPECT_EQ(filter_and_crop(frames, det, c).size(), 3u);
}

TEST(FilterAndCrop, CropUsesMarginAroundBox) {
  // Bright square face on a dark background; margin 0 keeps only the face.
  Image img(50, 50, 0.0f);
  for (int y = 10; y < 30; ++y)
    for (int x = 20; x < 40; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 1.0f;
  VisualConfig c;
  c.crop_margin = 0.0;
  c.image_size = 16;
  const auto out = filter_and_crop({Frame{img, 0, "v"}}, StubDetector({FaceBox{20, 10, 20, 20, 1}}), c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_FLOAT_EQ(static_cast<float>(out[0].pixels.mean()), 1.0f);
  c.crop_margin = 0.2;
  const auto wide = filter_and_crop({Frame{img, 0, "v"}}, StubDetector({FaceBox{20, 10, 20, 20, 1}}), c);
  EXPECT_LT(wide[0].pixels.mean(), 1.0);
}

TEST(FilterAndCrop, ReplayReproducesFrameSet) {
  TempDir dir("replay");
  Rng rng(41);
  std::vector<Frame> frames;
  DetectionLog log;
  for (int k = 0; k < 40; ++k) {
    frames.push_back(Frame{random_image(rng, 24, 24), k * 0.1, "vid"});
    std::vector<FaceBox> boxes;
    for (auto n = rng.between(0, 2); n > 0; --n)
      boxes.push_back(FaceBox{rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(4, 12), rng.uniform(4, 12), 0.9});
    log[centiseconds(k * 0.1)] = boxes;
  }
  write_detection_log(dir.path() / "vid.jsonl", log);
  const StubDetector live([&](const Frame& f) { return log.at(centiseconds(f.timestamp_s)); });
  const ReplayDetector replay(dir.path());
  VisualConfig c;
  const auto a = filter_and_crop(frames, live, c);
  const auto b = filter_and_crop(frames, replay, c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].timestamp_s, b[i].timestamp_s);
    EXPECT_EQ(a[i].pixels, b[i].pixels);
    EXPECT_EQ(log.at(centiseconds(a[i].timestamp_s)).size(), 1u);
  }
  EXPECT_THROW(detect_faces(Frame{Image(4, 4), 0, "missing"}, replay), DetectorError);
}

TEST(Resize, IdentityAndConstant) {
  Rng rng(42);
  const auto img = random_image(rng, 12, 12);
  EXPECT_EQ(resize_image(img, 12), img);
  const auto out = resize_image(Image(7, 13, 0.37f), 20);
  for (float v : out.data) EXPECT_FLOAT_EQ(v, 0.37f);
}

TEST(Resize, CheckerboardMatchesBilinearFormula) {
  Image src(2, 2);
  const float board[2][2] = {{1.0f, 0.0f}, {0.0f, 1.0f}};
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      for (int c = 0; c < 3; ++c) src.at(y, x, c) = board[y][x];
  const auto out = resize_image(src, 4);
  // Half-pixel centers: output pixel i samples source coordinate (i + 0.5) / 2 - 0.5,
  // clamped to [0, 1]: 0, 0.25, 0.75, 1.
  const double coord[4] = {0.0, 0.25, 0.75, 1.0};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const double fy = coord[y], fx = coord[x];
      const double want = (1 - fy) * (1 - fx) * 1.0 + (1 - fy) * fx * 0.0 + fy * (1 - fx) * 0.0 + fy * fx * 1.0;
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(y, x, c), want, 1e-6) << y << "," << x;
    }
  EXPECT_NEAR(out.at(1, 1, 0), 0.625, 1e-6);
}

TEST(Resize, OutputShapeAndRangeOnFuzz) {
  Rng rng(43);
  for (int i = 0; i < 100; ++i) {
    const auto img = random_image(rng, static_cast<int>(rng.between(1, 40)), static_cast<int>(rng.between(1, 40)));
    const int t = static_cast<int>(rng.between(8, 70));
    const auto out = resize_image(img, t);
    ASSERT_EQ(out.height, t);
    ASSERT_EQ(out.width, t);
    ASSERT_EQ(out.data.size(), static_cast<std::size_t>(t * t * 3));
    for (float v : out.data) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
  }
}

TEST(DetectionLog, RoundTrip) {
  TempDir dir("detlog");
  DetectionLog log;
  log[0] = {FaceBox{1.5, 2, 3, 4, 0.75}};
  log[10] = {};
  log[20] = {FaceBox{0, 0, 1, 1, 1}, FaceBox{2, 2, 3, 3, 0.5}};
  write_detection_log(dir.path() / "x.jsonl", log);
  EXPECT_EQ(read_detection_log(dir.path() / "x.jsonl"), log);
}

TEST(VisualConfig, Validation) {
  VisualConfig c;
  c.image_size = 4;
  EXPECT_THROW(c.validate(), UsageError);
  EXPECT_THROW(parse_visual_mode("grayscale"), UsageError);
}
