#pragma once

#include <string>
#include <vector>

#include "nfadetect/image.hpp"

namespace nfadetect {

struct PatchPcaConfig {
  int patch_size = 17;      // odd, >= 3
  int num_components = 45;  // <= patch_size^2
};

/// Square 2-D kernel, row-major taps.
struct Kernel {
  int size = 0;
  std::vector<double> taps;
};

/// True when mirror padding would ever fold two nonzero taps onto the same
/// source pixel somewhere in the border region.
bool kernel_folds_collide(const Kernel& kernel);

/// Bank of filters applied by cross-correlation. PCA banks carry the patch
/// mean and eigenvalue spectrum; fixed banks leave those empty.
struct FilterBank {
  std::vector<Kernel> kernels;
  std::vector<double> eigenvalues;  // descending, floored; PCA banks only
  std::vector<double> patch_mean;   // s*s mean patch; PCA banks only
  bool degenerate = false;          // eigenvalue floor hit on the whole spectrum
  std::string tag;                  // "pca" | "gabor"

  int count() const { return static_cast<int>(kernels.size()); }
  int max_kernel_size() const;
};

struct GaborBankConfig {
  std::vector<int> kernel_sizes = {7, 9, 11, 13, 15, 17, 19, 23, 31};
  std::vector<double> orientations_deg = {0.0, 45.0, 90.0, 135.0};
  std::vector<double> phases = {0.0, 1.5707963267948966};  // {0, pi/2}
};

/// m feature planes over the source plane's grid, plane-major storage.
struct FeatureStack {
  int width = 0;
  int height = 0;
  int count = 0;  // m
  int scale_index = 0;
  int channel_index = 0;
  std::string extractor;           // "pca" | "gabor" | "external"
  double independence_len = 1.0;   // patch/filter size, or feature stride
  std::vector<double> planes;      // count * height * width

  double* plane_data(int i) {
    return planes.data() + static_cast<std::size_t>(i) * width * height;
  }
  const double* plane_data(int i) const {
    return planes.data() + static_cast<std::size_t>(i) * width * height;
  }
  double at(int i, int x, int y) const {
    return plane_data(i)[static_cast<std::size_t>(y) * width + x];
  }
};

/// Accumulates the mean and s²×s² covariance of every s×s patch of the
/// plane (mirror-padded, one patch per pixel), eigendecomposes, and returns
/// the top-m eigenvectors as kernels sorted by descending eigenvalue.
/// Eigenvector signs are fixed so the largest-magnitude tap is positive.
/// Eigenvalues are floored at 1e-12 relative to the total patch variance; a
/// constant plane floors the whole spectrum and sets `degenerate`.
FilterBank fit_patch_pca(PlaneView plane, const PatchPcaConfig& cfg);

/// Cross-correlates the plane with every kernel, mirror padding, output
/// size = input size. PCA banks project the mean-subtracted patch (a
/// per-kernel constant offset). Within r = size/2 of the border, mirroring
/// duplicates patch pixels, which distorts both the variance and the
/// cross-kernel correlations of the projections; kernels whose folds
/// collide therefore replicate the nearest fully-valid projection there,
/// keeping every emitted value a genuine interior statistic. Kernels
/// without fold collisions (e.g. a delta) are evaluated directly.
FeatureStack apply_bank(PlaneView plane, const FilterBank& bank);

/// Deterministic Gabor bank: for each (size, orientation, phase) a kernel
/// with wavelength size/2, Gaussian envelope sigma 0.4*size, aspect ratio
/// 1, then made zero-mean and unit L2 norm. Default configuration yields
/// 9*4*2 = 72 kernels with sizes spanning 7..31.
FilterBank build_gabor_bank(const GaborBankConfig& cfg);

/// Reads an NFAT activation tensor, PCA-decorrelates across channels
/// (samples = feature-grid positions), keeps the top num_components
/// planes, and bilinearly upsamples each to image_width×image_height. The
/// stack's independence length is the feature stride (image size over grid
/// size), or stilde_override when positive.
FeatureStack ingest_external_features(const std::string& path, int image_width, int image_height,
                                      int num_components, double stilde_override = 0.0);

}  // namespace nfadetect
