#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gtclean/core.hpp"
#include "gtclean/preprocess.hpp"

namespace testutil {

using namespace gtclean;

inline Ring square(double x0, double y0, double side) {
  return {{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}};
}

inline Ring rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

/// Profile whose band b on day d equals value(b, d).
inline PixelProfile make_profile(const std::string& pixel, const std::string& plot, const std::vector<int>& days,
                                 const std::function<double(Band, int)>& value, const std::set<int>& cloudy = {}) {
  PixelProfile p;
  p.pixel_id = pixel;
  p.plot_id = plot;
  for (Band b : kBands) {
    for (int d : days) p.band(b).push_back({d, value(b, d), cloudy.count(d) > 0});
  }
  return p;
}

/// Clean profile carrying only an NDVI series (bands flat).
inline CleanProfile ndvi_profile(const std::string& pixel, const std::string& plot, std::vector<double> ndvi) {
  CleanProfile c;
  c.pixel_id = pixel;
  c.plot_id = plot;
  for (auto& band : c.bands) band.assign(ndvi.size(), 0.1);
  c.ndvi = std::move(ndvi);
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gtclean_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
