#include "nfadetect/image.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfadetect {

namespace {

ImageStack downsample_half(const ImageStack& in) {
  const int w = (in.width() + 1) / 2;
  const int h = (in.height() + 1) / 2;
  ImageStack out(w, h, in.channels());
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      const int y0 = 2 * y;
      const int y1 = std::min(2 * y + 1, in.height() - 1);
      for (int x = 0; x < w; ++x) {
        const int x0 = 2 * x;
        const int x1 = std::min(2 * x + 1, in.width() - 1);
        double sum = in.at(c, x0, y0);
        int count = 1;
        if (x1 != x0) {
          sum += in.at(c, x1, y0);
          ++count;
        }
        if (y1 != y0) {
          sum += in.at(c, x0, y1);
          ++count;
          if (x1 != x0) {
            sum += in.at(c, x1, y1);
            ++count;
          }
        }
        out.at(c, x, y) = static_cast<float>(sum / count);
      }
    }
  }
  return out;
}

}  // namespace

ScalePyramid build_pyramid(const ImageStack& img, int num_scales) {
  if (num_scales < 1) throw std::invalid_argument("build_pyramid: num_scales must be >= 1");
  if (img.width() < 1 || img.height() < 1 || img.channels() < 1)
    throw std::invalid_argument("build_pyramid: empty image");
  ScalePyramid pyr;
  pyr.levels.reserve(num_scales);
  pyr.levels.push_back(img);
  for (int k = 1; k < num_scales; ++k) {
    const ImageStack& prev = pyr.levels.back();
    const int w = (prev.width() + 1) / 2;
    const int h = (prev.height() + 1) / 2;
    if (w < 2 || h < 2)
      throw std::invalid_argument("build_pyramid: level " + std::to_string(k) +
                                  " would be smaller than 2x2");
    pyr.levels.push_back(downsample_half(prev));
  }
  return pyr;
}

MultilightPca multilight_project(const MultiLightSet& set) {
  const ImageStack& first = set.views[0];
  for (const ImageStack& v : set.views) {
    if (v.channels() != 1)
      throw std::invalid_argument("multilight_project: views must be single-channel");
    if (!v.same_size(first))
      throw std::invalid_argument("multilight_project: views of mismatched size");
  }
  const int w = first.width();
  const int h = first.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;

  Eigen::Matrix<double, 5, 1> mean = Eigen::Matrix<double, 5, 1>::Zero();
  Eigen::Matrix<double, 5, 5> second = Eigen::Matrix<double, 5, 5>::Zero();
  const float* planes[5];
  for (int j = 0; j < 5; ++j) planes[j] = set.views[j].plane(0).data;
  for (std::size_t p = 0; p < n; ++p) {
    Eigen::Matrix<double, 5, 1> v;
    for (int j = 0; j < 5; ++j) v[j] = planes[j][p];
    mean += v;
    second += v * v.transpose();
  }
  mean /= static_cast<double>(n);
  Eigen::Matrix<double, 5, 5> cov = second / static_cast<double>(n) - mean * mean.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("multilight_project: eigendecomposition failed");

  // Eigen returns ascending order; reverse to descending and fix signs.
  MultilightPca out;
  out.width = w;
  out.height = h;
  Eigen::Matrix<double, 5, 5> basis;
  for (int i = 0; i < 5; ++i) {
    out.eigenvalues[i] = solver.eigenvalues()[4 - i];
    Eigen::Matrix<double, 5, 1> vec = solver.eigenvectors().col(4 - i);
    int arg = 0;
    for (int j = 1; j < 5; ++j)
      if (std::fabs(vec[j]) > std::fabs(vec[arg])) arg = j;
    if (vec[arg] < 0.0) vec = -vec;
    basis.col(i) = vec;
    for (int j = 0; j < 5; ++j) out.basis[i][j] = vec[j];
    out.mean[i] = mean[i];
  }

  out.planes.assign(5, std::vector<double>(n, 0.0));
  for (std::size_t p = 0; p < n; ++p) {
    Eigen::Matrix<double, 5, 1> v;
    for (int j = 0; j < 5; ++j) v[j] = planes[j][p] - mean[j];
    const Eigen::Matrix<double, 5, 1> y = basis.transpose() * v;
    for (int i = 0; i < 5; ++i) out.planes[i][p] = y[i];
  }
  return out;
}

ImageStack multilight_pca(const MultiLightSet& set, int keep_last) {
  if (keep_last < 1 || keep_last > 5)
    throw std::invalid_argument("multilight_pca: keep_last must be in [1,5]");
  const MultilightPca pca = multilight_project(set);
  const std::size_t n = static_cast<std::size_t>(pca.width) * pca.height;
  ImageStack out(pca.width, pca.height, keep_last);
  for (int c = 0; c < keep_last; ++c) {
    const std::vector<double>& plane = pca.planes[5 - keep_last + c];
    double lo = plane[0], hi = plane[0];
    for (double v : plane) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    float* dst = out.plane_data(c);
    const double span = hi - lo;
    if (span < 1e-12 * std::max({std::fabs(lo), std::fabs(hi), 1.0})) {
      std::fill(dst, dst + n, 0.5f);
      continue;
    }
    for (std::size_t p = 0; p < n; ++p)
      dst[p] = static_cast<float>((plane[p] - lo) / span);
  }
  return out;
}

}  // namespace nfadetect
