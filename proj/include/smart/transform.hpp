#pragma once

#include "smart/core_types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace smart {

/// RGBA vehicle sprite. The anchor marks the ground-contact centre; at the
/// reference 640 px frame width the sprite is drawn native_scale_width_px wide.
struct Sprite {
  RgbaImage pixels;
  Eigen::Vector2i anchor{0, 0};
  double native_scale_width_px = 0.0;

  /// Requires an alpha channel with a fully transparent 1 px border.
  void validate() const;
};

class SpriteLibrary {
 public:
  void add(std::string id, Sprite sprite);
  const Sprite& get(const std::string& id) const;  // MissingSprite
  bool contains(const std::string& id) const { return sprites_.count(id) != 0; }
  std::vector<std::string> ids() const;

  /// Procedural sedans: rear-{red,blue,grey} (forward-moving) and
  /// front-{red,blue,grey} (oncoming). Colour variants share one alpha mask.
  static SpriteLibrary builtin();

  /// Reads a JSON manifest {"sprites":[{"id","file","anchor":[x,y],
  /// "native_scale_width_px"}]}; files resolve relative to the manifest.
  static SpriteLibrary load(const std::filesystem::path& manifest);

 private:
  std::map<std::string, Sprite> sprites_;
};

/// Maps MGConfig offsets onto image coordinates.
struct InsertionGeometry {
  Eigen::Vector2i center_anchor{0, 0};
  double px_per_offset = 1.0;
  // Sprite scale factor as a function of lateral offset.
  std::function<double(int)> scale_policy = [](int) { return 1.0; };

  /// Anchor at (W/2, 0.78 H); offsets and sprites scale with W/640 and
  /// offsets are further compressed by 0.6 so the +-400 sweep stays in frame.
  static InsertionGeometry for_image(int width, int height);
};

/// Nearest-neighbour rescale of a sprite by `factor`.
Sprite scale_sprite(const Sprite& sprite, double factor);

/// Where insert_object would place the scaled sprite; may lie out of frame.
PixelBox placement_box(const Sprite& sprite, const InsertionGeometry& geometry, int lateral_offset_px);

/// Alpha-over of the sprite named by config.sprite_id. Pixels outside the
/// returned placement box are copied bit-exactly.
RgbImage insert_object(const RgbImage& image, const SpriteLibrary& sprites, const InsertionGeometry& geometry,
                       const MGConfig& config);
RgbImage insert_object(const RgbImage& image, const Sprite& sprite, const InsertionGeometry& geometry,
                       int lateral_offset_px);

struct SnowParams {
  double haze = 0.55;           // whitening coverage of the global haze layer
  double flakes_per_kpx = 8.0;  // flake density per 1000 pixels
  double flake_sigma_px = 1.5;  // at the 640 px reference width
};

/// Blends a seeded snow layer (Gaussian flakes over a whitening haze) with
/// opacity `intensity`. Every channel is non-decreasing in intensity.
RgbImage apply_snow(const RgbImage& image, double intensity, std::uint64_t seed, const SnowParams& params = {});

/// Per-pixel snow coverage in [0, 1] for a given size and seed.
Eigen::ArrayXXd snow_coverage(int width, int height, std::uint64_t seed, const SnowParams& params = {});

struct TransformContext {
  const SpriteLibrary* sprites = nullptr;
  // Derived from the frame size via InsertionGeometry::for_image when unset.
  std::optional<InsertionGeometry> geometry;
  std::uint64_t seed = 0;
  SnowParams snow;

  InsertionGeometry geometry_for(const RgbImage& image) const;
};

/// One follow-up image: insertion, then snow for ObjectPlusSnow.
RgbImage generate_mg(const TransformContext& ctx, const SourceFrame& source, const MGConfig& config);

}  // namespace smart
