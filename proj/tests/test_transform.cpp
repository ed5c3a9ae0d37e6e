#include "smart/transform.hpp"

#include "smart/image_io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace smart {
namespace {

const SpriteLibrary& lib() {
  static const SpriteLibrary l = SpriteLibrary::builtin();
  return l;
}

Sprite solid_sprite(std::uint8_t alpha, int w = 5, int h = 4) {
  Sprite s;
  s.pixels = RgbaImage(w, h, 0);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) s.pixels.set_pixel(x, y, {200, 100, 50, alpha});
  s.anchor = {w / 2, h - 1};
  s.native_scale_width_px = w;
  return s;
}

InsertionGeometry unit_geometry(int cx, int cy) {
  InsertionGeometry g;
  g.center_anchor = {cx, cy};
  g.px_per_offset = 1.0;
  return g;
}

TEST(Geometry, DefaultPlacementAt64x48) {
  const auto g = InsertionGeometry::for_image(64, 48);
  EXPECT_EQ(g.center_anchor, Eigen::Vector2i(32, 37));
  // 101x62 sprite scaled by 0.1 -> 10x6, anchor (5, 5)
  const PixelBox b = placement_box(lib().get("rear-red"), g, 0);
  EXPECT_EQ(b.x0, 27);
  EXPECT_EQ(b.y0, 32);
  EXPECT_EQ(b.x1, 36);
  EXPECT_EQ(b.y1, 37);
}

TEST(Geometry, SweepIsMirrorSymmetric) {
  const auto g = InsertionGeometry::for_image(640, 480);
  const Sprite& s = lib().get("rear-red");
  const PixelBox c = placement_box(s, g, 0);
  for (int d : {100, 200, 300, 400}) {
    const PixelBox l = placement_box(s, g, -d), r = placement_box(s, g, d);
    EXPECT_EQ(l.x0 + r.x0, 2 * c.x0) << d;
    EXPECT_EQ(l.x1 + r.x1, 2 * c.x1) << d;
    EXPECT_EQ(l.y0, c.y0);
  }
}

TEST(Compositor, FullSweepStaysInFrame) {
  std::mt19937_64 rng(3);
  for (auto [w, h] : {std::pair{64, 48}, {320, 160}, {640, 480}}) {
    const RgbImage img = test::random_frame(rng, w, h);
    const auto g = InsertionGeometry::for_image(w, h);
    for (int d = -400; d <= 400; d += 100) EXPECT_NO_THROW(insert_object(img, lib().get("front-blue"), g, d));
  }
}

TEST(Compositor, OutOfFrameThrows) {
  const RgbImage img(64, 48);
  const auto g = InsertionGeometry::for_image(64, 48);
  EXPECT_THROW(insert_object(img, lib().get("rear-red"), g, 1000), OutOfBounds);
  EXPECT_THROW(insert_object(img, solid_sprite(255), unit_geometry(1, 20), 0), OutOfBounds);
}

TEST(Compositor, ChangesOnlyInsideBox) {
  std::mt19937_64 rng(99);
  const auto g = InsertionGeometry::for_image(64, 48);
  for (int trial = 0; trial < 20; ++trial) {
    const RgbImage img = test::random_frame(rng);
    for (int d : {-400, -100, 0, 300}) {
      const RgbImage out = insert_object(img, lib().get("rear-grey"), g, d);
      const PixelBox changed = test::diff_box(img, out);
      const PixelBox allowed = placement_box(lib().get("rear-grey"), g, d);
      ASSERT_FALSE(changed.empty());
      EXPECT_GE(changed.x0, allowed.x0);
      EXPECT_GE(changed.y0, allowed.y0);
      EXPECT_LE(changed.x1, allowed.x1);
      EXPECT_LE(changed.y1, allowed.y1);
    }
  }
}

TEST(Compositor, AlphaOverArithmetic) {
  RgbImage img(9, 9);
  for (int c = 0; c < 3; ++c) img.channel(c).setConstant(10);
  const RgbImage opaque = insert_object(img, solid_sprite(255), unit_geometry(4, 6), 0);
  EXPECT_EQ(opaque.pixel(4, 5), (std::array<std::uint8_t, 3>{200, 100, 50}));
  // (200*128 + 10*127 + 127) / 255 = 105, (100*128 + 1397)/255 = 55, (50*128 + 1397)/255 = 30
  const RgbImage half = insert_object(img, solid_sprite(128), unit_geometry(4, 6), 0);
  EXPECT_EQ(half.pixel(4, 5), (std::array<std::uint8_t, 3>{105, 55, 30}));
  EXPECT_EQ(half.pixel(0, 0), img.pixel(0, 0));
}

TEST(Compositor, TransparentSpriteIsIdentity) {
  std::mt19937_64 rng(5);
  const RgbImage img = test::random_frame(rng);
  const RgbImage out = insert_object(img, solid_sprite(0, 12, 8), unit_geometry(32, 40), -3);
  EXPECT_TRUE(out == img);
}

TEST(Compositor, Deterministic) {
  std::mt19937_64 rng(6);
  const RgbImage img = test::random_frame(rng);
  const auto g = InsertionGeometry::for_image(64, 48);
  EXPECT_EQ(encode_png(insert_object(img, lib().get("rear-red"), g, 200)),
            encode_png(insert_object(img, lib().get("rear-red"), g, 200)));
}

TEST(Compositor, ColourVariantsShareMask) {
  const RgbImage img(64, 48);
  const auto g = InsertionGeometry::for_image(64, 48);
  const auto red = test::diff_box(img, insert_object(img, lib().get("rear-red"), g, 0));
  const auto blue = test::diff_box(img, insert_object(img, lib().get("rear-blue"), g, 0));
  EXPECT_EQ(red.x0, blue.x0);
  EXPECT_EQ(red.x1, blue.x1);
  EXPECT_EQ(red.y0, blue.y0);
  EXPECT_EQ(red.y1, blue.y1);
}

TEST(SpriteLibrary, MissingAndInvalid) {
  EXPECT_THROW(lib().get("rear-green"), MissingSprite);
  SpriteLibrary l;
  Sprite bad = solid_sprite(255);
  bad.pixels.at(0, 0, 3) = 255;
  EXPECT_THROW(l.add("bad", bad), InvalidValue);
  EXPECT_EQ(lib().ids().size(), 6u);
}

TEST(SpriteLibrary, LoadsManifest) {
  const auto dir = test::temp_dir("sprites");
  write_png(dir / "box.png", solid_sprite(255, 7, 6).pixels);
  std::ofstream(dir / "sprites.json")
      << R"({"sprites":[{"id":"box","file":"box.png","anchor":[3,5],"native_scale_width_px":70}]})";
  const auto l = SpriteLibrary::load(dir / "sprites.json");
  ASSERT_TRUE(l.contains("box"));
  EXPECT_EQ(l.get("box").anchor, Eigen::Vector2i(3, 5));
  EXPECT_EQ(l.get("box").native_scale_width_px, 70.0);
  std::ofstream(dir / "broken.json") << R"({"sprites":[{"id":"x"}]})";
  EXPECT_THROW(SpriteLibrary::load(dir / "broken.json"), Error);
}

TEST(Snow, IntensityZeroIsIdentity) {
  std::mt19937_64 rng(8);
  const RgbImage img = test::random_frame(rng);
  EXPECT_TRUE(apply_snow(img, 0.0, 42) == img);
}

TEST(Snow, RangeChecked) {
  const RgbImage img(8, 8);
  EXPECT_THROW(apply_snow(img, 1.01, 0), IntensityOutOfRange);
  EXPECT_THROW(apply_snow(img, -0.1, 0), IntensityOutOfRange);
}

TEST(Snow, ChannelsAndLuminanceMonotone) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const RgbImage img = test::random_frame(rng);
    RgbImage prev = img;
    double prev_lum = mean_luminance(img);
    for (double t : {0.2, 0.4, 0.6, 0.8, 1.0}) {
      const RgbImage cur = apply_snow(img, t, 1234);
      for (int c = 0; c < 3; ++c) ASSERT_TRUE((cur.channel(c) >= prev.channel(c)).all());
      const double lum = mean_luminance(cur);
      ASSERT_GE(lum, prev_lum);
      prev = cur;
      prev_lum = lum;
    }
  }
}

TEST(Snow, SeededAndWhitening) {
  const RgbImage black(64, 48);
  const RgbImage a = apply_snow(black, 1.0, 7), b = apply_snow(black, 1.0, 7), c = apply_snow(black, 1.0, 8);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  // haze alone lifts black to round(255 * 0.55) = 140
  EXPECT_GE(a.channel(0).minCoeff(), 140);
  const auto cover = snow_coverage(64, 48, 7);
  EXPECT_GE(cover.minCoeff(), 0.55);
  EXPECT_LE(cover.maxCoeff(), 1.0);
}

TEST(GenerateMg, SnowConfigAddsWeatherOnTopOfCar) {
  std::mt19937_64 rng(1);
  const SourceFrame src{0, std::make_shared<const RgbImage>(test::random_frame(rng, 64, 48, 0, 60)), std::nullopt};
  TransformContext ctx;
  ctx.sprites = &lib();
  const auto& spec = test::bundled("SMG4");
  const RgbImage car = generate_mg(ctx, src, spec.configs[0]);
  const RgbImage snow = generate_mg(ctx, src, spec.configs[3]);
  EXPECT_TRUE(snow == apply_snow(car, 0.6, ctx.seed));
  TransformContext none;
  EXPECT_THROW(generate_mg(none, src, spec.configs[0]), MissingSprite);
}

}  // namespace
}  // namespace smart
