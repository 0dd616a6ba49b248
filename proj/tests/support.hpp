#pragma once

// Shared fixtures for the test binaries: seeded generators, KS statistic,
// scratch directories. Everything here is deterministic.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nfadetect/features.hpp"
#include "nfadetect/image.hpp"
#include "nfadetect/stats.hpp"

namespace testsupport {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed * 0x9e3779b97f4a7c15ull + 1); }

inline nfadetect::ImageStack gaussian_plane(int w, int h, std::uint64_t seed, float mean = 0.5f,
                                            float sigma = 0.1f) {
  auto gen = rng(seed);
  std::normal_distribution<float> dist(mean, sigma);
  nfadetect::ImageStack img(w, h, 1);
  for (float& v : img.data()) v = std::clamp(dist(gen), 0.0f, 1.0f);
  return img;
}

inline nfadetect::ImageStack uniform_plane(int w, int h, std::uint64_t seed) {
  auto gen = rng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  nfadetect::ImageStack img(w, h, 1);
  for (float& v : img.data()) v = dist(gen);
  return img;
}

/// One-sample Kolmogorov-Smirnov statistic against a theoretical CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    ks = std::max(ks, std::max(f - i / n, (i + 1) / n - f));
  }
  return ks;
}

/// Patch-PCA squared distances of a noise plane, subsampled every `s`
/// pixels on the interior so neighboring samples are independent.
inline std::vector<double> patch_pca_d2_samples(const nfadetect::ImageStack& img, int s, int m) {
  nfadetect::PatchPcaConfig cfg;
  cfg.patch_size = s;
  cfg.num_components = m;
  const nfadetect::FilterBank bank = fit_patch_pca(img.plane(0), cfg);
  const nfadetect::FeatureStack feat = apply_bank(img.plane(0), bank);
  const nfadetect::NormalityModel model = fit_normality(feat);
  const nfadetect::DistanceMap dist = mahalanobis_map(feat, model);
  std::vector<double> samples;
  for (int y = s; y + s < img.height(); y += s)
    for (int x = s; x + s < img.width(); x += s) samples.push_back(dist.d2.at(x, y));
  return samples;
}

/// Fresh scratch directory under the system temp root.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nfadetect_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
