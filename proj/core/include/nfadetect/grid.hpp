#pragma once

#include <cstddef>
#include <vector>

namespace nfadetect {

/// Dense H×W grid of doubles, row-major. Carrier for distance, NFA and
/// anomaly-score maps.
struct GridD {
  int width = 0;
  int height = 0;
  std::vector<double> v;

  GridD() = default;
  GridD(int w, int h, double fill = 0.0)
      : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return v.size(); }
};

/// Resample to out_width×out_height. Source samples sit at pixel centers;
/// destination centers map back with x_src = (x+0.5)*W_src/W_dst - 0.5,
/// clamped at the borders.
GridD upsample_bilinear(const GridD& src, int out_width, int out_height);
GridD upsample_nearest(const GridD& src, int out_width, int out_height);

}  // namespace nfadetect
