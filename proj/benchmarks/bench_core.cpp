#include <benchmark/benchmark.h>

#include <random>

#include "nfadetect/detector.hpp"
#include "nfadetect/features.hpp"
#include "nfadetect/image.hpp"
#include "nfadetect/nfa.hpp"
#include "nfadetect/stats.hpp"

using namespace nfadetect;

namespace {

ImageStack noise_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 1);
  std::normal_distribution<float> dist(0.5f, 0.1f);
  ImageStack img(w, h, 1);
  for (float& v : img.data()) v = std::clamp(dist(rng), 0.0f, 1.0f);
  return img;
}

void BM_Chi2SfLog10(benchmark::State& state) {
  double x = 0.0;
  for (auto _ : state) {
    x += 0.37;
    if (x > 120.0) x = 0.1;
    benchmark::DoNotOptimize(chi2_sf_log10(x, 45.0));
  }
}
BENCHMARK(BM_Chi2SfLog10);

void BM_BinomialTailLog10(benchmark::State& state) {
  double k = 0.0;
  for (auto _ : state) {
    k += 0.13;
    if (k > 9.0) k = 0.0;
    benchmark::DoNotOptimize(binomial_tail_log10(9.0, k, 0.01));
  }
}
BENCHMARK(BM_BinomialTailLog10);

void BM_FitPatchPca(benchmark::State& state) {
  const ImageStack img = noise_image(static_cast<int>(state.range(0)),
                                     static_cast<int>(state.range(0)), 7);
  PatchPcaConfig cfg;
  cfg.patch_size = 17;
  cfg.num_components = 45;
  for (auto _ : state) benchmark::DoNotOptimize(fit_patch_pca(img.plane(0), cfg));
}
BENCHMARK(BM_FitPatchPca)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ApplyBank(benchmark::State& state) {
  const ImageStack img = noise_image(256, 256, 8);
  PatchPcaConfig cfg;
  cfg.patch_size = 17;
  cfg.num_components = 45;
  const FilterBank bank = fit_patch_pca(img.plane(0), cfg);
  for (auto _ : state) benchmark::DoNotOptimize(apply_bank(img.plane(0), bank));
}
BENCHMARK(BM_ApplyBank)->Unit(benchmark::kMillisecond);

void BM_PixelNfa(benchmark::State& state) {
  const ImageStack img = noise_image(256, 256, 9);
  PatchPcaConfig cfg;
  cfg.patch_size = 9;
  cfg.num_components = 16;
  const FilterBank bank = fit_patch_pca(img.plane(0), cfg);
  const FeatureStack feat = apply_bank(img.plane(0), bank);
  const DistanceMap dist = mahalanobis_map(feat, fit_normality(feat));
  for (auto _ : state) benchmark::DoNotOptimize(nfa_pixel(dist));
}
BENCHMARK(BM_PixelNfa)->Unit(benchmark::kMillisecond);

void BM_RegionGrowth(benchmark::State& state) {
  const ImageStack img = noise_image(128, 128, 10);
  PatchPcaConfig cfg;
  cfg.patch_size = 5;
  cfg.num_components = 1;
  const FilterBank bank = fit_patch_pca(img.plane(0), cfg);
  const FeatureStack feat = apply_bank(img.plane(0), bank);
  const auto comps = component_distance_maps(feat, fit_normality(feat));
  for (auto _ : state) benchmark::DoNotOptimize(nfa_region(comps[0], RegionNfaConfig{}));
}
BENCHMARK(BM_RegionGrowth)->Unit(benchmark::kMillisecond);

void BM_BuildPyramid(benchmark::State& state) {
  const ImageStack img = noise_image(1024, 1024, 11);
  for (auto _ : state) benchmark::DoNotOptimize(build_pyramid(img, 4));
}
BENCHMARK(BM_BuildPyramid)->Unit(benchmark::kMillisecond);

void BM_DetectSmall(benchmark::State& state) {
  const ImageStack img = noise_image(128, 128, 12);
  DetectorConfig cfg;
  cfg.num_scales = 2;
  cfg.patch_size = 9;
  cfg.num_components = 16;
  for (auto _ : state) benchmark::DoNotOptimize(run_detector(img, cfg));
}
BENCHMARK(BM_DetectSmall)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
