#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace nfadetect {

/// Read-only view of one channel of an ImageStack.
struct PlaneView {
  const float* data = nullptr;
  int width = 0;
  int height = 0;

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// H×W×C float raster, channel-major then row-major (data[c][y][x]).
/// Loaded images hold intensities in [0,1]; derived planes may not.
class ImageStack {
 public:
  ImageStack() = default;
  ImageStack(int width, int height, int channels, float fill = 0.0f)
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(width_) * height_; }

  float& at(int c, int x, int y) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  float at(int c, int x, int y) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  PlaneView plane(int c) const {
    return PlaneView{data_.data() + static_cast<std::size_t>(c) * plane_size(), width_, height_};
  }
  float* plane_data(int c) { return data_.data() + static_cast<std::size_t>(c) * plane_size(); }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_size(const ImageStack& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Fine-to-coarse stack of levels; level 0 is the input, level k+1 has
/// ceil-halved width and height.
struct ScalePyramid {
  std::vector<ImageStack> levels;
  int num_scales() const { return static_cast<int>(levels.size()); }
};

/// One diffuse plus four grazing-light views of the same sample, single
/// channel each, identical dimensions.
struct MultiLightSet {
  std::array<ImageStack, 5> views;
};

/// 2×2 box average then decimation, repeated num_scales-1 times. Odd
/// trailing rows/columns average over the available 1×2 / 2×1 / 1×1 block.
/// Throws std::invalid_argument if a downsampled level would be smaller
/// than 2×2.
ScalePyramid build_pyramid(const ImageStack& img, int num_scales);

/// Raw per-pixel PCA of the five views: basis sorted by descending
/// eigenvalue, signs fixed so each eigenvector's largest-magnitude entry is
/// positive. planes[i] holds the centered projection onto basis column i.
struct MultilightPca {
  int width = 0;
  int height = 0;
  std::array<double, 5> eigenvalues{};            // descending
  std::array<std::array<double, 5>, 5> basis{};   // basis[i] = eigenvector i
  std::array<double, 5> mean{};
  std::vector<std::vector<double>> planes;        // 5 planes, H*W each
};

MultilightPca multilight_project(const MultiLightSet& set);

/// Keeps the LAST keep_last projection planes (smallest variance
/// directions, where local structure concentrates) as channels, each plane
/// affinely rescaled to [0,1]. Constant planes map to 0.5.
ImageStack multilight_pca(const MultiLightSet& set, int keep_last);

}  // namespace nfadetect
