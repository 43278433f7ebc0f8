#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gtclean/preprocess.hpp"

namespace gtclean {

/// 8-bit RGB raster, row-major, channels interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  std::array<std::uint8_t, 3> at(int x, int y) const {
    const auto i = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x));
    return {data[i], data[i + 1], data[i + 2]};
  }
};

/// Linear-interpolated percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

/// Maps v from [lo, hi] to [0, 255] with clamping. A degenerate range maps to 127.
std::uint8_t stretch_to_byte(double v, double lo, double hi);

/// NIR/RED/GREEN false colour composite of one plot at grid step `step`.
/// Each channel is stretched from its 2nd to 98th in-chip percentile; the
/// chip is upsampled by nearest neighbour to out_size x out_size. Cells with
/// no retained pixel stay black. Throws DataError when pixels carry no
/// row/col position or `step` is out of range.
RgbImage render_fcc_chip(std::span<const CleanProfile* const> pixels, std::size_t step, int out_size);

void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

}  // namespace gtclean
