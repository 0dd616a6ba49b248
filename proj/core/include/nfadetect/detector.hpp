#pragma once

#include <string>
#include <vector>

#include "nfadetect/features.hpp"
#include "nfadetect/fusion.hpp"
#include "nfadetect/image.hpp"
#include "nfadetect/nfa.hpp"

namespace nfadetect {

enum class Extractor { pca, gabor, external };
enum class NfaStrategy { pixel, block, region };

std::string to_string(Extractor e);
std::string to_string(NfaStrategy s);
Extractor extractor_from_string(const std::string& s);
NfaStrategy strategy_from_string(const std::string& s);

/// Full pipeline configuration. Zero means "derive": num_components
/// resolves to 45 for pca and 5 for external (gabor uses the whole bank),
/// stilde to the patch size, the largest Gabor kernel, or the feature
/// stride.
struct DetectorConfig {
  Extractor extractor = Extractor::pca;
  NfaStrategy nfa = NfaStrategy::pixel;
  int num_scales = 4;
  int patch_size = 17;
  int num_components = 0;
  int block_size = 51;
  int block_stride = 10;
  double tail_p = 0.01;
  double stilde = 0.0;
  double threshold_as = 0.0;
  bool nearest_upsample = false;
  std::string features_path;
  int keep_last = 3;
  int threads = 0;  // 0 = hardware default
  unsigned long long seed = 0;
  GaborBankConfig gabor;
  bool keep_tested_maps = false;  // retain per-scale/channel maps (calibration)

  int resolved_components() const;
};

/// Everything one detection run produces. Each per-scale/channel map is
/// normalized to the ensemble test count (the run tests all of them), so
/// its values are directly comparable to epsilon. unit_log10_nfa lists the
/// value of every tested unit for the block (one per block) and region (one
/// per region) strategies; the pixel strategy's units are the native map
/// pixels, retained in tested_maps when keep_tested_maps is set.
struct DetectionResult {
  AnomalyMap anomaly;
  BinaryMask mask;
  RegionSet regions;  // region strategy: all scales/components, grown-frame coordinates
  std::vector<double> unit_log10_nfa;
  std::vector<NfaMap> tested_maps;
  bool any_detection = false;
};

/// Runs extractor -> normality -> NFA -> fusion -> segmentation on one
/// image. Throws std::invalid_argument for invalid configurations (e.g.
/// external without features_path, pyramid too deep for the image).
DetectionResult run_detector(const ImageStack& image, const DetectorConfig& cfg);

/// Flat `key = value` config-file round-trip used by the CLI.
std::string config_to_string(const DetectorConfig& cfg);

}  // namespace nfadetect
