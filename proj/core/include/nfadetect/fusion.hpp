#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nfadetect/grid.hpp"
#include "nfadetect/nfa.hpp"

namespace nfadetect {

/// Full-resolution anomaly scores AS = -log10(NFA); larger means rarer.
struct AnomalyMap {
  GridD score;
  std::vector<std::string> provenance;  // strategies/scales that were fused
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> on;  // 0 or 1, row-major

  std::size_t count() const;
};

/// Upsamples every per-scale map to the level-0 size (bilinear in log10
/// NFA, or nearest when nearest = true), takes the element-wise minimum and
/// negates. Map k must have the ceil-halved size of map k-1.
AnomalyMap fuse_scales(const std::vector<NfaMap>& per_scale, bool nearest = false);

/// mask = (AS > threshold_as); the default 0 corresponds to NFA = 1.
BinaryMask segment(const AnomalyMap& map, double threshold_as = 0.0);

/// 8-bit visualization: AS clipped to [-2, 10] then mapped affinely to
/// [0, 255].
std::vector<std::uint8_t> anomaly_to_gray8(const AnomalyMap& map);

}  // namespace nfadetect
