#include "nfadetect/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfadetect {

namespace {

void check_dims(const GridD& src, int out_width, int out_height) {
  if (src.width < 1 || src.height < 1)
    throw std::invalid_argument("upsample: empty source grid");
  if (out_width < 1 || out_height < 1)
    throw std::invalid_argument("upsample: empty destination");
}

}  // namespace

GridD upsample_bilinear(const GridD& src, int out_width, int out_height) {
  check_dims(src, out_width, out_height);
  if (src.width == out_width && src.height == out_height) return src;
  GridD out(out_width, out_height);
  const double sx = static_cast<double>(src.width) / out_width;
  const double sy = static_cast<double>(src.height) / out_height;
  for (int y = 0; y < out_height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * src.at(x0, y0) + wx * src.at(x1, y0);
      const double bot = (1.0 - wx) * src.at(x0, y1) + wx * src.at(x1, y1);
      out.at(x, y) = (1.0 - wy) * top + wy * bot;
    }
  }
  return out;
}

GridD upsample_nearest(const GridD& src, int out_width, int out_height) {
  check_dims(src, out_width, out_height);
  if (src.width == out_width && src.height == out_height) return src;
  GridD out(out_width, out_height);
  const double sx = static_cast<double>(src.width) / out_width;
  const double sy = static_cast<double>(src.height) / out_height;
  for (int y = 0; y < out_height; ++y) {
    const int ys = std::clamp(static_cast<int>(std::floor((y + 0.5) * sy)), 0, src.height - 1);
    for (int x = 0; x < out_width; ++x) {
      const int xs = std::clamp(static_cast<int>(std::floor((x + 0.5) * sx)), 0, src.width - 1);
      out.at(x, y) = src.at(xs, ys);
    }
  }
  return out;
}

}  // namespace nfadetect
