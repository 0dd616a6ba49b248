#include "nfadetect/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfadetect {

std::size_t BinaryMask::count() const {
  std::size_t c = 0;
  for (std::uint8_t v : on) c += v != 0;
  return c;
}

AnomalyMap fuse_scales(const std::vector<NfaMap>& per_scale, bool nearest) {
  if (per_scale.empty()) throw std::invalid_argument("fuse_scales: no maps");
  const int w0 = per_scale[0].log10_nfa.width;
  const int h0 = per_scale[0].log10_nfa.height;
  int w = w0, h = h0;
  for (std::size_t k = 1; k < per_scale.size(); ++k) {
    w = (w + 1) / 2;
    h = (h + 1) / 2;
    if (per_scale[k].log10_nfa.width != w || per_scale[k].log10_nfa.height != h)
      throw std::invalid_argument("fuse_scales: map " + std::to_string(k) +
                                  " does not match the ceil-halving pyramid");
  }

  GridD fused = per_scale[0].log10_nfa;
  for (std::size_t k = 1; k < per_scale.size(); ++k) {
    const GridD up = nearest ? upsample_nearest(per_scale[k].log10_nfa, w0, h0)
                             : upsample_bilinear(per_scale[k].log10_nfa, w0, h0);
    for (std::size_t p = 0; p < fused.size(); ++p) fused.v[p] = std::min(fused.v[p], up.v[p]);
  }

  AnomalyMap out;
  out.score = GridD(w0, h0);
  for (std::size_t p = 0; p < fused.size(); ++p) out.score.v[p] = -fused.v[p];
  for (std::size_t k = 0; k < per_scale.size(); ++k)
    out.provenance.push_back(per_scale[k].strategy + "@scale" + std::to_string(k));
  return out;
}

BinaryMask segment(const AnomalyMap& map, double threshold_as) {
  BinaryMask mask;
  mask.width = map.score.width;
  mask.height = map.score.height;
  mask.on.resize(map.score.size());
  for (std::size_t p = 0; p < map.score.size(); ++p)
    mask.on[p] = map.score.v[p] > threshold_as ? 1 : 0;
  return mask;
}

std::vector<std::uint8_t> anomaly_to_gray8(const AnomalyMap& map) {
  std::vector<std::uint8_t> out(map.score.size());
  for (std::size_t p = 0; p < map.score.size(); ++p) {
    const double clipped = std::clamp(map.score.v[p], -2.0, 10.0);
    out[p] = static_cast<std::uint8_t>(std::lround((clipped + 2.0) / 12.0 * 255.0));
  }
  return out;
}

}  // namespace nfadetect
