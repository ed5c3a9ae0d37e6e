#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>

namespace smart {

/// Dense planar raster: one row-major Eigen plane per channel, rows = image
/// height, cols = image width.
template <typename Scalar, int Channels>
class Raster {
 public:
  using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, Scalar fill = Scalar(0)) {
    for (auto& p : planes_) p = Plane::Constant(height, width, fill);
  }

  int width() const { return static_cast<int>(planes_[0].cols()); }
  int height() const { return static_cast<int>(planes_[0].rows()); }
  bool empty() const { return planes_[0].size() == 0; }

  Plane& channel(int c) { return planes_[c]; }
  const Plane& channel(int c) const { return planes_[c]; }

  Scalar& at(int x, int y, int c) { return planes_[c](y, x); }
  Scalar at(int x, int y, int c) const { return planes_[c](y, x); }

  void set_pixel(int x, int y, const std::array<Scalar, Channels>& v) {
    for (int c = 0; c < Channels; ++c) planes_[c](y, x) = v[c];
  }
  std::array<Scalar, Channels> pixel(int x, int y) const {
    std::array<Scalar, Channels> v{};
    for (int c = 0; c < Channels; ++c) v[c] = planes_[c](y, x);
    return v;
  }

  bool same_size(const Raster& o) const { return width() == o.width() && height() == o.height(); }

  friend bool operator==(const Raster& a, const Raster& b) {
    if (!a.same_size(b)) return false;
    for (int c = 0; c < Channels; ++c)
      if ((a.planes_[c] != b.planes_[c]).any()) return false;
    return true;
  }

 private:
  std::array<Plane, Channels> planes_;
};

using RgbImage = Raster<std::uint8_t, 3>;
using RgbaImage = Raster<std::uint8_t, 4>;

/// Rec. 601 luma of every pixel, in 8-bit units.
inline Eigen::ArrayXXd luminance(const RgbImage& img) {
  return 0.299 * img.channel(0).template cast<double>() +
         0.587 * img.channel(1).template cast<double>() +
         0.114 * img.channel(2).template cast<double>();
}

inline double mean_luminance(const RgbImage& img) {
  if (img.empty()) return 0.0;
  return luminance(img).mean();
}

/// Pixel-exact bounding box, inclusive on both ends.
struct PixelBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  bool empty() const { return x1 < x0 || y1 < y0; }
  int width() const { return empty() ? 0 : x1 - x0 + 1; }
  int height() const { return empty() ? 0 : y1 - y0 + 1; }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

}  // namespace smart
