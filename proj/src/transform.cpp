#include "smart/transform.hpp"

#include "smart/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace smart {
namespace {

int round_half_away(double v) { return static_cast<int>(std::lround(v)); }

// (s * a + d * (255 - a)) / 255, rounded half away from zero.
std::uint8_t alpha_over(std::uint8_t src, std::uint8_t dst, std::uint8_t alpha) {
  const int premul = src * alpha;
  return static_cast<std::uint8_t>((premul + dst * (255 - alpha) + 127) / 255);
}

struct Rgb {
  std::uint8_t r, g, b;
};

void fill_rect(RgbaImage& img, int x0, int y0, int x1, int y1, Rgb c, std::uint8_t a = 255) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) img.set_pixel(x, y, {c.r, c.g, c.b, a});
}

// 101 x 62 sedan, anchored at the bottom-centre of its tyres.
Sprite draw_sedan(Rgb body, bool front_facing) {
  constexpr int kW = 101, kH = 62;
  RgbaImage px(kW, kH, 0);
  const Rgb dark{28, 28, 30};
  const Rgb trim{70, 72, 76};
  const Rgb glass = front_facing ? Rgb{96, 118, 140} : Rgb{44, 54, 66};
  const Rgb lamp = front_facing ? Rgb{250, 240, 205} : Rgb{215, 25, 25};

  fill_rect(px, 18, 3, 82, 15, body);          // cabin
  fill_rect(px, 22, 5, 78, 13, glass);         // window
  fill_rect(px, 4, 15, 96, 52, body);          // body
  fill_rect(px, 4, 44, 96, 48, trim);          // bumper
  fill_rect(px, 8, 24, 20, 30, lamp);          // lamps
  fill_rect(px, 80, 24, 92, 30, lamp);
  fill_rect(px, 42, 34, 58, 41, {232, 232, 226});  // plate
  fill_rect(px, 8, 49, 22, 60, dark);          // tyres
  fill_rect(px, 78, 49, 92, 60, dark);
  // softened cabin corners
  for (auto [x, y] : {std::pair{18, 3}, {82, 3}, {4, 15}, {96, 15}}) px.at(x, y, 3) = 128;

  Sprite s;
  s.pixels = std::move(px);
  s.anchor = {50, 60};
  s.native_scale_width_px = kW;
  return s;
}

// splitmix64 finaliser, used to decorrelate the seed.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

void Sprite::validate() const {
  if (pixels.empty()) throw InvalidValue("sprite has no pixels");
  const auto& a = pixels.channel(3);
  const int w = pixels.width(), h = pixels.height();
  if (w < 3 || h < 3) throw InvalidValue("sprite smaller than 3x3");
  const bool border_clear = (a.row(0) == 0).all() && (a.row(h - 1) == 0).all() && (a.col(0) == 0).all() &&
                            (a.col(w - 1) == 0).all();
  if (!border_clear) throw InvalidValue("sprite needs a fully transparent 1 px border");
  if (anchor.x() < 0 || anchor.x() >= w || anchor.y() < 0 || anchor.y() >= h)
    throw InvalidValue("sprite anchor outside sprite");
  if (!(native_scale_width_px > 0.0)) throw InvalidValue("sprite native_scale_width_px must be > 0");
}

void SpriteLibrary::add(std::string id, Sprite sprite) {
  sprite.validate();
  sprites_.insert_or_assign(std::move(id), std::move(sprite));
}

const Sprite& SpriteLibrary::get(const std::string& id) const {
  auto it = sprites_.find(id);
  if (it == sprites_.end()) throw MissingSprite("unknown sprite '" + id + "'");
  return it->second;
}

std::vector<std::string> SpriteLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : sprites_) out.push_back(id);
  return out;
}

SpriteLibrary SpriteLibrary::builtin() {
  SpriteLibrary lib;
  const std::pair<const char*, Rgb> colours[] = {
      {"red", {182, 30, 36}}, {"blue", {32, 62, 168}}, {"grey", {128, 130, 136}}};
  for (const auto& [name, rgb] : colours) {
    lib.add(std::string("rear-") + name, draw_sedan(rgb, false));
    lib.add(std::string("front-") + name, draw_sedan(rgb, true));
  }
  return lib;
}

SpriteLibrary SpriteLibrary::load(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ParseError("cannot open sprite manifest " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  SpriteLibrary lib;
  try {
    for (const auto& entry : doc.at("sprites")) {
      Sprite s;
      s.pixels = read_png_rgba(manifest.parent_path() / entry.at("file").get<std::string>());
      const auto& anchor = entry.at("anchor");
      s.anchor = {anchor.at(0).get<int>(), anchor.at(1).get<int>()};
      s.native_scale_width_px = entry.value("native_scale_width_px", static_cast<double>(s.pixels.width()));
      lib.add(entry.at("id").get<std::string>(), std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  return lib;
}

InsertionGeometry InsertionGeometry::for_image(int width, int height) {
  InsertionGeometry g;
  const double size_factor = width / 640.0;
  g.center_anchor = {width / 2, round_half_away(0.78 * height)};
  g.px_per_offset = 0.6 * size_factor;
  g.scale_policy = [size_factor](int) { return size_factor; };
  return g;
}

Sprite scale_sprite(const Sprite& sprite, double factor) {
  if (!(factor > 0.0)) throw InvalidValue("sprite scale factor must be > 0");
  const int w = sprite.pixels.width(), h = sprite.pixels.height();
  const int sw = std::max(1, round_half_away(w * factor));
  const int sh = std::max(1, round_half_away(h * factor));
  if (sw == w && sh == h) return sprite;

  Sprite out;
  out.pixels = RgbaImage(sw, sh);
  for (int y = 0; y < sh; ++y) {
    const int sy = std::min(h - 1, static_cast<int>((y + 0.5) * h / sh));
    for (int x = 0; x < sw; ++x) {
      const int sx = std::min(w - 1, static_cast<int>((x + 0.5) * w / sw));
      out.pixels.set_pixel(x, y, sprite.pixels.pixel(sx, sy));
    }
  }
  out.anchor = {std::min(sw - 1, static_cast<int>((sprite.anchor.x() + 0.5) * sw / w)),
                std::min(sh - 1, static_cast<int>((sprite.anchor.y() + 0.5) * sh / h))};
  out.native_scale_width_px = sprite.native_scale_width_px * factor;
  return out;
}

namespace {

Sprite placed_sprite(const Sprite& sprite, const InsertionGeometry& geometry, int offset) {
  const double base = sprite.native_scale_width_px / sprite.pixels.width();
  return scale_sprite(sprite, base * geometry.scale_policy(offset));
}

PixelBox box_of(const Sprite& scaled, const InsertionGeometry& geometry, int offset) {
  PixelBox b;
  b.x0 = geometry.center_anchor.x() + round_half_away(offset * geometry.px_per_offset) - scaled.anchor.x();
  b.y0 = geometry.center_anchor.y() - scaled.anchor.y();
  b.x1 = b.x0 + scaled.pixels.width() - 1;
  b.y1 = b.y0 + scaled.pixels.height() - 1;
  return b;
}

}  // namespace

PixelBox placement_box(const Sprite& sprite, const InsertionGeometry& geometry, int lateral_offset_px) {
  return box_of(placed_sprite(sprite, geometry, lateral_offset_px), geometry, lateral_offset_px);
}

RgbImage insert_object(const RgbImage& image, const Sprite& sprite, const InsertionGeometry& geometry,
                       int lateral_offset_px) {
  const Sprite scaled = placed_sprite(sprite, geometry, lateral_offset_px);
  const PixelBox box = box_of(scaled, geometry, lateral_offset_px);
  if (box.x0 < 0 || box.y0 < 0 || box.x1 >= image.width() || box.y1 >= image.height())
    throw OutOfBounds("sprite box [" + std::to_string(box.x0) + "," + std::to_string(box.y0) + "]-[" +
                      std::to_string(box.x1) + "," + std::to_string(box.y1) + "] exceeds " +
                      std::to_string(image.width()) + "x" + std::to_string(image.height()) + " image");

  RgbImage out = image;
  for (int y = 0; y < scaled.pixels.height(); ++y) {
    for (int x = 0; x < scaled.pixels.width(); ++x) {
      const std::uint8_t a = scaled.pixels.at(x, y, 3);
      if (a == 0) continue;
      for (int c = 0; c < 3; ++c) {
        auto& dst = out.at(box.x0 + x, box.y0 + y, c);
        dst = alpha_over(scaled.pixels.at(x, y, c), dst, a);
      }
    }
  }
  return out;
}

RgbImage insert_object(const RgbImage& image, const SpriteLibrary& sprites, const InsertionGeometry& geometry,
                       const MGConfig& config) {
  return insert_object(image, sprites.get(config.sprite_id), geometry, config.lateral_offset_px);
}

Eigen::ArrayXXd snow_coverage(int width, int height, std::uint64_t seed, const SnowParams& params) {
  // rows = height, cols = width
  Eigen::ArrayXXd cover = Eigen::ArrayXXd::Constant(height, width, std::clamp(params.haze, 0.0, 1.0));
  std::mt19937_64 rng(mix64(seed));
  const double sigma = std::max(0.6, params.flake_sigma_px * width / 640.0);
  const int reach = static_cast<int>(std::ceil(3.0 * sigma));
  const auto flakes = static_cast<long>(params.flakes_per_kpx * width * height / 1000.0);
  for (long i = 0; i < flakes; ++i) {
    const double cx = unit_double(rng) * width;
    const double cy = unit_double(rng) * height;
    const int xi = static_cast<int>(cx), yi = static_cast<int>(cy);
    for (int y = std::max(0, yi - reach); y <= std::min(height - 1, yi + reach); ++y) {
      for (int x = std::max(0, xi - reach); x <= std::min(width - 1, xi + reach); ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double a = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        cover(y, x) = std::max(cover(y, x), a);
      }
    }
  }
  return cover;
}

RgbImage apply_snow(const RgbImage& image, double intensity, std::uint64_t seed, const SnowParams& params) {
  if (!(intensity >= 0.0 && intensity <= 1.0))
    throw IntensityOutOfRange("snow intensity outside [0, 1]: " + std::to_string(intensity));
  if (intensity == 0.0 || image.empty()) return image;

  const Eigen::ArrayXXd cover = snow_coverage(image.width(), image.height(), seed, params);
  RgbImage out(image.width(), image.height());
  for (int c = 0; c < 3; ++c) {
    const Eigen::ArrayXXd src = image.channel(c).cast<double>();
    // layer = src + (255 - src) * cover, blended with opacity = intensity
    const Eigen::ArrayXXd blended = src + intensity * (255.0 - src) * cover;
    out.channel(c) = blended.round().min(255.0).cast<std::uint8_t>();
  }
  return out;
}

InsertionGeometry TransformContext::geometry_for(const RgbImage& image) const {
  return geometry ? *geometry : InsertionGeometry::for_image(image.width(), image.height());
}

RgbImage generate_mg(const TransformContext& ctx, const SourceFrame& source, const MGConfig& config) {
  if (!ctx.sprites) throw MissingSprite("no sprite library loaded");
  if (!source.image) throw InvalidValue("source frame has no image");
  RgbImage out = insert_object(*source.image, *ctx.sprites, ctx.geometry_for(*source.image), config);
  if (config.kind == TransformKind::ObjectPlusSnow)
    out = apply_snow(out, config.snow_intensity.value_or(0.0), ctx.seed, ctx.snow);
  return out;
}

}  // namespace smart
