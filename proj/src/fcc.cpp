#include "gtclean/fcc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

namespace gtclean {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::uint8_t stretch_to_byte(double v, double lo, double hi) {
  if (!(hi - lo > 1e-12)) return 127;
  const double scaled = std::round((v - lo) / (hi - lo) * 255.0);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

RgbImage render_fcc_chip(std::span<const CleanProfile* const> pixels, std::size_t step, int out_size) {
  if (pixels.empty()) throw DataError("render_fcc_chip: no pixels");
  if (out_size < 1) throw DataError("render_fcc_chip: out_size must be positive");
  int min_row = 0, max_row = 0, min_col = 0, max_col = 0;
  bool first = true;
  for (const CleanProfile* px : pixels) {
    if (!px->position) {
      throw DataError("render_fcc_chip: pixel '" + px->pixel_id +
                      "' has no spatial position; add row,col columns to the pixel file");
    }
    if (step >= px->bands[0].size()) throw DataError("render_fcc_chip: time step out of range");
    const auto [r, c] = *px->position;
    if (first) {
      min_row = max_row = r;
      min_col = max_col = c;
      first = false;
    }
    min_row = std::min(min_row, r);
    max_row = std::max(max_row, r);
    min_col = std::min(min_col, c);
    max_col = std::max(max_col, c);
  }
  const int rows = max_row - min_row + 1;
  const int cols = max_col - min_col + 1;

  // Channel order: R <- NIR, G <- RED, B <- GREEN.
  constexpr std::array<Band, 3> kChannels{Band::Nir, Band::Red, Band::Green};
  std::array<double, 3> lo{}, hi{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    std::vector<double> values;
    values.reserve(pixels.size());
    for (const CleanProfile* px : pixels) values.push_back(px->band(kChannels[ch])[step]);
    lo[ch] = percentile(values, 2.0);
    hi[ch] = percentile(values, 98.0);
  }

  std::vector<std::uint8_t> chip(static_cast<std::size_t>(rows * cols * 3), 0);
  for (const CleanProfile* px : pixels) {
    const int r = px->position->row - min_row;
    const int c = px->position->col - min_col;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      chip[static_cast<std::size_t>((r * cols + c) * 3) + ch] =
          stretch_to_byte(px->band(kChannels[ch])[step], lo[ch], hi[ch]);
    }
  }

  RgbImage img;
  img.width = out_size;
  img.height = out_size;
  img.data.resize(static_cast<std::size_t>(out_size) * static_cast<std::size_t>(out_size) * 3);
  for (int y = 0; y < out_size; ++y) {
    const int r = static_cast<int>(static_cast<long>(y) * rows / out_size);
    for (int x = 0; x < out_size; ++x) {
      const int c = static_cast<int>(static_cast<long>(x) * cols / out_size);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        img.data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(out_size) + static_cast<std::size_t>(x)) * 3 + ch] =
            chip[static_cast<std::size_t>((r * cols + c) * 3) + ch];
      }
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.data.data() + static_cast<std::size_t>(y) * image.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open '" + path.string() + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  RgbImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed reading PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("'" + path.string() + "' is not 8-bit RGB");
  }
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.data.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * 3);
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, img.data.data() + static_cast<std::size_t>(y) * img.width * 3, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace gtclean
