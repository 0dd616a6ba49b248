#include "nfadetect/detector.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "nfadetect/stats.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nfadetect {

std::string to_string(Extractor e) {
  switch (e) {
    case Extractor::pca: return "pca";
    case Extractor::gabor: return "gabor";
    case Extractor::external: return "external";
  }
  return "?";
}

std::string to_string(NfaStrategy s) {
  switch (s) {
    case NfaStrategy::pixel: return "pixel";
    case NfaStrategy::block: return "block";
    case NfaStrategy::region: return "region";
  }
  return "?";
}

Extractor extractor_from_string(const std::string& s) {
  if (s == "pca") return Extractor::pca;
  if (s == "gabor") return Extractor::gabor;
  if (s == "external") return Extractor::external;
  throw std::invalid_argument("unknown extractor: " + s);
}

NfaStrategy strategy_from_string(const std::string& s) {
  if (s == "pixel") return NfaStrategy::pixel;
  if (s == "block") return NfaStrategy::block;
  if (s == "region") return NfaStrategy::region;
  throw std::invalid_argument("unknown NFA strategy: " + s);
}

int DetectorConfig::resolved_components() const {
  if (num_components > 0) return num_components;
  switch (extractor) {
    case Extractor::pca: return 45;
    case Extractor::external: return 5;
    case Extractor::gabor: return 0;  // the whole bank
  }
  return 0;
}

namespace {

void validate(const DetectorConfig& cfg) {
  if (cfg.num_scales < 1) throw std::invalid_argument("config: scales must be >= 1");
  if (!(cfg.tail_p > 0.0 && cfg.tail_p < 1.0))
    throw std::invalid_argument("config: tail-p must be in (0,1)");
  if (cfg.extractor == Extractor::external && cfg.features_path.empty())
    throw std::invalid_argument("config: the external extractor requires --features-path");
  if (cfg.extractor == Extractor::pca &&
      (cfg.patch_size < 3 || cfg.patch_size % 2 == 0))
    throw std::invalid_argument("config: patch-size must be odd and >= 3");
  if (cfg.nfa == NfaStrategy::block && cfg.block_stride < 1)
    throw std::invalid_argument("config: block-stride must be >= 1");
}

/// Extractor output -> normality -> one NFA map for this scale/channel.
/// Region statistics run per decorrelated component and are min-combined;
/// block and region unit values are appended to the result for calibration.
NfaMap strategy_map(const FeatureStack& feat, const DetectorConfig& cfg, DetectionResult* result) {
  const NormalityModel model = fit_normality(feat);
  switch (cfg.nfa) {
    case NfaStrategy::pixel:
      return nfa_pixel(mahalanobis_map(feat, model));
    case NfaStrategy::block: {
      const DistanceMap dist = mahalanobis_map(feat, model);
      BlockNfaConfig bc;
      bc.block_size = cfg.block_size;
      bc.stride = cfg.block_stride;
      bc.tail_p = cfg.tail_p;
      return nfa_block(dist, bc, result ? &result->unit_log10_nfa : nullptr);
    }
    case NfaStrategy::region: {
      const std::vector<DistanceMap> comps = component_distance_maps(feat, model);
      RegionNfaConfig rc;
      rc.tail_p = cfg.tail_p;
      std::vector<NfaMap> maps(comps.size());
      std::vector<RegionSet> sets(comps.size());
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < static_cast<int>(comps.size()); ++i) {
        auto [set, map] = nfa_region(comps[i], rc);
        map.component_index = i;
        maps[i] = std::move(map);
        sets[i] = std::move(set);
      }
      if (result) {
        for (RegionSet& set : sets) {
          for (Region& region : set.regions) {
            result->unit_log10_nfa.push_back(region.log10_nfa);
            result->regions.regions.push_back(std::move(region));
          }
        }
      }
      NfaMap combined = min_combine(maps);
      // Per-component maps share one seed family; the min is a rendering
      // choice, not extra tests.
      combined.num_tests = maps[0].num_tests;
      return combined;
    }
  }
  throw std::invalid_argument("config: unknown NFA strategy");
}

}  // namespace

DetectionResult run_detector(const ImageStack& image, const DetectorConfig& cfg) {
  validate(cfg);
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif

  DetectionResult result;

  // One entry per tested (scale, channel) map, with the slice of unit
  // values it contributed.
  struct MapEntry {
    NfaMap map;
    std::size_t unit_begin = 0;
    std::size_t unit_end = 0;
  };
  std::vector<MapEntry> entries;
  int num_scales_used = 0;

  if (cfg.extractor == Extractor::external) {
    FeatureStack feat = ingest_external_features(cfg.features_path, image.width(), image.height(),
                                                 cfg.resolved_components(), cfg.stilde);
    MapEntry entry;
    entry.unit_begin = result.unit_log10_nfa.size();
    entry.map = strategy_map(feat, cfg, &result);
    entry.unit_end = result.unit_log10_nfa.size();
    entry.map.scale_index = 0;
    entries.push_back(std::move(entry));
    num_scales_used = 1;
  } else {
    const FilterBank gabor_bank =
        cfg.extractor == Extractor::gabor ? build_gabor_bank(cfg.gabor) : FilterBank{};
    const int min_dim =
        cfg.extractor == Extractor::pca ? cfg.patch_size : gabor_bank.max_kernel_size();
    const ScalePyramid pyramid = build_pyramid(image, cfg.num_scales);
    for (const ImageStack& level : pyramid.levels)
      if (level.width() < min_dim || level.height() < min_dim)
        throw std::invalid_argument(
            "config: too many scales, the coarsest level is smaller than the filter support");

    for (int k = 0; k < pyramid.num_scales(); ++k) {
      const ImageStack& level = pyramid.levels[k];
      if (cfg.nfa == NfaStrategy::block &&
          (level.width() < cfg.block_size || level.height() < cfg.block_size)) {
        if (k == 0) throw std::invalid_argument("config: image smaller than the block size");
        break;  // coarser levels only get smaller
      }
      for (int c = 0; c < level.channels(); ++c) {
        FeatureStack feat;
        if (cfg.extractor == Extractor::pca) {
          PatchPcaConfig pc;
          pc.patch_size = cfg.patch_size;
          pc.num_components = cfg.resolved_components();
          const FilterBank bank = fit_patch_pca(level.plane(c), pc);
          feat = apply_bank(level.plane(c), bank);
        } else {
          feat = apply_bank(level.plane(c), gabor_bank);
        }
        feat.scale_index = k;
        feat.channel_index = c;
        if (cfg.stilde > 0.0) feat.independence_len = cfg.stilde;
        MapEntry entry;
        entry.unit_begin = result.unit_log10_nfa.size();
        entry.map = strategy_map(feat, cfg, &result);
        entry.unit_end = result.unit_log10_nfa.size();
        entry.map.scale_index = k;
        entry.map.component_index = c;
        entries.push_back(std::move(entry));
      }
      num_scales_used = k + 1;
    }
  }

  // The run tested every map above, so each one is rescaled from its own
  // family size to the ensemble total; a single map keeps its values.
  double total_tests = 0.0;
  for (const MapEntry& e : entries) total_tests += e.map.num_tests;
  for (MapEntry& e : entries) {
    const double offset = std::log10(total_tests / e.map.num_tests);
    if (offset == 0.0) continue;
    for (double& v : e.map.log10_nfa.v) v += offset;
    for (std::size_t u = e.unit_begin; u < e.unit_end; ++u)
      result.unit_log10_nfa[u] += offset;
  }
  // Regions were appended in unit order; carry the corrected values over.
  for (std::size_t i = 0; i < result.regions.regions.size(); ++i)
    result.regions.regions[i].log10_nfa = result.unit_log10_nfa[i];

  std::vector<NfaMap> per_scale(num_scales_used);
  {
    std::size_t idx = 0;
    for (int k = 0; k < num_scales_used; ++k) {
      std::vector<NfaMap> channel_maps;
      while (idx < entries.size() && entries[idx].map.scale_index == k)
        channel_maps.push_back(std::move(entries[idx++].map));
      per_scale[k] = min_combine(channel_maps);
      per_scale[k].scale_index = k;
    }
  }

  if (cfg.keep_tested_maps) result.tested_maps = per_scale;

  result.anomaly = fuse_scales(per_scale, cfg.nearest_upsample);
  result.mask = segment(result.anomaly, cfg.threshold_as);
  result.any_detection = result.mask.count() > 0;
  return result;
}

std::string config_to_string(const DetectorConfig& cfg) {
  char buf[128];
  std::string out;
  auto add = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  add("extractor", to_string(cfg.extractor));
  add("nfa", to_string(cfg.nfa));
  add("scales", std::to_string(cfg.num_scales));
  add("patch-size", std::to_string(cfg.patch_size));
  add("components", std::to_string(cfg.num_components));
  add("block-size", std::to_string(cfg.block_size));
  add("block-stride", std::to_string(cfg.block_stride));
  add("tail-p", num(cfg.tail_p));
  add("stilde", num(cfg.stilde));
  add("threshold-as", num(cfg.threshold_as));
  add("nearest-upsample", cfg.nearest_upsample ? "true" : "false");
  if (!cfg.features_path.empty()) add("features-path", cfg.features_path);
  add("keep-last", std::to_string(cfg.keep_last));
  add("threads", std::to_string(cfg.threads));
  add("seed", std::to_string(cfg.seed));
  return out;
}

}  // namespace nfadetect
