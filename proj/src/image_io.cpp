#include "smart/image_io.hpp"

#include "smart/errors.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

namespace smart {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw ImageIoError(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

template <int Channels>
Raster<std::uint8_t, Channels> read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ImageIoError("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp& p;
    png_infop& i;
    ~Guard() { png_destroy_read_struct(&p, &i, nullptr); }
  } guard{png, info};

  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if constexpr (Channels == 4) {
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
  } else {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const auto rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<png_size_t>(w) * Channels) throw ImageIoError("unexpected PNG layout in " + path.string());

  std::vector<std::uint8_t> buf(rowbytes * static_cast<std::size_t>(h));
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + rowbytes * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());

  Raster<std::uint8_t, Channels> out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Channels; ++c) out.at(x, y, c) = rows[y][x * Channels + c];
  return out;
}

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}
void no_flush(png_structp) {}

template <int Channels>
std::vector<std::uint8_t> encode(const Raster<std::uint8_t, Channels>& img) {
  if (img.empty()) throw ImageIoError("cannot encode an empty image");
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp& p;
    png_infop& i;
    ~Guard() { png_destroy_write_struct(&p, &i); }
  } guard{png, info};

  png_set_write_fn(png, &out, append_bytes, no_flush);
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE | PNG_FILTER_SUB | PNG_FILTER_UP);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               Channels == 4 ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * Channels);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < Channels; ++c) row[static_cast<std::size_t>(x) * Channels + c] = img.at(x, y, c);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  return out;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ImageIoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ImageIoError("short write to " + path.string());
}

}  // namespace

RgbImage read_png_rgb(const std::filesystem::path& path) { return read_png<3>(path); }
RgbaImage read_png_rgba(const std::filesystem::path& path) { return read_png<4>(path); }

std::vector<std::uint8_t> encode_png(const RgbImage& image) { return encode<3>(image); }
std::vector<std::uint8_t> encode_png(const RgbaImage& image) { return encode<4>(image); }

void write_png(const std::filesystem::path& path, const RgbImage& image) { write_bytes(path, encode_png(image)); }
void write_png(const std::filesystem::path& path, const RgbaImage& image) { write_bytes(path, encode_png(image)); }

}  // namespace smart
