#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nfadetect/grid.hpp"
#include "nfadetect/stats.hpp"

namespace nfadetect {

/// Per-pixel number-of-false-alarms map, kept in log10 space. num_tests is
/// the size of this map's test family (pixels, blocks or region seeds
/// normalized by the independence length); a detector fusing several maps
/// rescales each one to the ensemble total.
struct NfaMap {
  GridD log10_nfa;
  std::string strategy;  // "pixel" | "block" | "region"
  int scale_index = 0;
  int component_index = -1;
  double num_tests = 0.0;
};

struct BlockNfaConfig {
  int block_size = 51;
  int stride = 10;
  double tail_p = 0.01;  // per-pixel candidate threshold p-value
};

struct RegionNfaConfig {
  double alpha = 0.316915;  // 4-connected configuration-count constants
  double beta = 4.062570;
  double tail_p = 0.01;     // seed threshold p-value on chi2(1)
};

/// 4-connected pixel set with its accumulated distance and final NFA.
/// growth_trace records log10 NFA after the seed and after each accepted
/// pixel; it is strictly decreasing by construction.
struct Region {
  std::vector<std::pair<int, int>> pixels;  // (x,y), sorted row-major
  double sum_d2 = 0.0;
  double log10_nfa = 0.0;
  std::vector<double> growth_trace;

  int size() const { return static_cast<int>(pixels.size()); }
};

struct RegionSet {
  std::vector<Region> regions;  // pairwise disjoint
};

/// NFA(x) = H*W * (1 - CDF_chi2(df)(d²(x))), in log10 space.
NfaMap nfa_pixel(const DistanceMap& dist);

/// Binomial-tail statistic over sliding w×w blocks: with candidates
/// L_B = {d² > tau}, tau the (1-p) chi-square quantile,
/// NFA(B) = (HW/w²) s² B(w²/s², |L_B|/s², p). Blocks slide with the
/// configured stride (plus edge-clamped final positions so every pixel is
/// covered) and each pixel takes the minimum over covering blocks.
/// block_values, when given, receives one log10 NFA per tested block.
NfaMap nfa_block(const DistanceMap& dist, const BlockNfaConfig& cfg,
                 std::vector<double>* block_values = nullptr);

/// Greedy growth of 4-connected regions seeded at local maxima of d² above
/// tau, in descending-d² order; a frontier pixel is added only if it
/// strictly lowers the region NFA. Pixels outside every region receive the
/// maximum NFA computed.
std::pair<RegionSet, NfaMap> nfa_region(const DistanceMap& dist, const RegionNfaConfig& cfg);

/// Region NFA formula, exposed for growth, tests and audits:
/// log10[(HW/st²) * alpha * beta^(N/st²) / (N/st²) * (1 - CDF_chi2(N/st²)(S/st²))].
double region_log10_nfa(double n_pixels, double sum_d2, double independence_len,
                        double image_pixels, const RegionNfaConfig& cfg);

/// Element-wise minimum of log10 NFA over same-sized maps.
NfaMap min_combine(const std::vector<NfaMap>& maps);

/// One region per line: `N_R log10_nfa x0,y0;x1,y1;...`.
void write_regions(const std::string& path, const RegionSet& set);
std::string regions_to_string(const RegionSet& set);

}  // namespace nfadetect
