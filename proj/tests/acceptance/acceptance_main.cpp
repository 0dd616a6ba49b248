// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Dataset-dependent criteria are skipped with
// a note when MVTEC_ROOT is not set. Exit code = number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "nfadetect/detector.hpp"
#include "nfadetect/eval.hpp"
#include "nfadetect/features.hpp"
#include "nfadetect/fusion.hpp"
#include "nfadetect/image.hpp"
#include "nfadetect/nfa.hpp"
#include "nfadetect/stats.hpp"

using namespace nfadetect;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  bool skipped = false;
  std::string detail;
};

std::mt19937_64 seeded(std::uint64_t seed) { return std::mt19937_64(seed * 0x9e3779b97f4a7c15ull + 1); }

ImageStack noise_plane(int w, int h, std::uint64_t seed) {
  auto rng = seeded(seed);
  std::normal_distribution<float> dist(0.5f, 0.1f);
  ImageStack img(w, h, 1);
  for (float& v : img.data()) v = std::clamp(dist(rng), 0.0f, 1.0f);
  return img;
}

bool check(Outcome& out, bool ok, const std::string& what) {
  if (!ok) {
    out.pass = false;
    out.detail += (out.detail.empty() ? "" : "; ") + what;
  }
  return ok;
}

// --------------------------------------------------------------------------
// 1. Special-function oracles.
// --------------------------------------------------------------------------
Outcome criterion_special_functions() {
  Outcome out;
  double worst_chi2 = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double x = 0.05 * i;  // covers the bulk and a deep tail
    const double err = std::fabs(chi2_cdf(x, 2.0) - (-std::expm1(-0.5 * x)));
    worst_chi2 = std::max(worst_chi2, err);
  }
  check(out, worst_chi2 <= 1e-10,
        "chi2 df=2 closed-form error " + std::to_string(worst_chi2));

  double worst_rel = 0.0;
  for (int n = 1; n <= 30; ++n) {
    for (double p : {0.01, 0.1, 0.5}) {
      // Exact enumeration; binomial coefficients are integral in double up
      // to n = 30.
      std::vector<double> coeff(n + 1);
      coeff[0] = 1.0;
      for (int k = 1; k <= n; ++k) coeff[k] = coeff[k - 1] * (n - k + 1) / k;
      double tail = 0.0;
      for (int k = n; k >= 1; --k) {
        tail += coeff[k] * std::pow(p, k) * std::pow(1.0 - p, n - k);
        const double got = binomial_tail(n, k, p);
        worst_rel = std::max(worst_rel, std::fabs(got - tail) / tail);
      }
    }
  }
  check(out, worst_rel <= 1e-9, "binomial enumeration rel err " + std::to_string(worst_rel));
  out.detail = "chi2 err " + std::to_string(worst_chi2) + ", binomial rel err " +
               std::to_string(worst_rel);
  return out;
}

// --------------------------------------------------------------------------
// 2. Convolution vs explicit patch inner products.
// --------------------------------------------------------------------------
Outcome criterion_conv_vs_patch() {
  Outcome out;
  auto rng = seeded(2024);
  std::uniform_int_distribution<int> dim(12, 32);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int w = dim(rng), h = dim(rng);
    ImageStack img(w, h, 1);
    std::uniform_real_distribution<float> pix(0.0f, 1.0f);
    for (float& v : img.data()) v = pix(rng);

    PatchPcaConfig cfg;
    cfg.patch_size = 5;
    cfg.num_components = 10;
    const FilterBank bank = fit_patch_pca(img.plane(0), cfg);
    const FeatureStack feat = apply_bank(img.plane(0), bank);

    const int r = 2;
    for (int k = 0; k < bank.count(); ++k) {
      const double offset =
          std::inner_product(bank.kernels[k].taps.begin(), bank.kernels[k].taps.end(),
                             bank.patch_mean.begin(), 0.0);
      for (int y = r; y < h - r; ++y) {
        for (int x = r; x < w - r; ++x) {
          double dot = 0.0;
          for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 5; ++i)
              dot += img.at(0, x + i - r, y + j - r) * bank.kernels[k].taps[j * 5 + i];
          worst = std::max(worst, std::fabs(feat.at(k, x, y) - (dot - offset)));
        }
      }
    }
  }
  check(out, worst <= 1e-6, "max interior deviation " + std::to_string(worst));
  out.detail = "max interior deviation " + std::to_string(worst) + " over 50 planes";
  return out;
}

// --------------------------------------------------------------------------
// 3. Chi-square calibration of patch-PCA distances on noise.
// --------------------------------------------------------------------------
Outcome criterion_chi2_calibration() {
  Outcome out;
  const int s = 9, m = 3;
  std::vector<double> samples;
  for (int i = 0; samples.size() < 10000; ++i) {
    const ImageStack img = noise_plane(512, 512, 3000 + i);
    PatchPcaConfig cfg;
    cfg.patch_size = s;
    cfg.num_components = m;
    const FilterBank bank = fit_patch_pca(img.plane(0), cfg);
    const FeatureStack feat = apply_bank(img.plane(0), bank);
    const DistanceMap dist = mahalanobis_map(feat, fit_normality(feat));
    for (int y = s; y + s < 512; y += s)
      for (int x = s; x + s < 512; x += s) samples.push_back(dist.d2.at(x, y));
  }
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = chi2_cdf(samples[i], m);
    ks = std::max(ks, std::max(f - i / n, (i + 1) / n - f));
  }
  check(out, ks <= 0.05, "KS " + std::to_string(ks));
  out.detail = "KS " + std::to_string(ks) + " over " + std::to_string(samples.size()) +
               " s-subsampled interior distances";
  return out;
}

// --------------------------------------------------------------------------
// 4. False-alarm guarantee of the pixel statistic on noise.
// --------------------------------------------------------------------------
Outcome criterion_false_alarms() {
  Outcome out;
  NoiseSpec noise;
  noise.width = 256;
  noise.height = 256;
  noise.seed = 41;
  DetectorConfig defaults;  // pca+pixel, K=4, s=17, m=45
  const CalibrationReport full = calibrate_h0(noise, defaults, 100);
  check(out, full.mean_counts[0] <= 2.0,
        "mean detections at eps=1 " + std::to_string(full.mean_counts[0]));

  // Aggregate bound at eps=0.01: single-scale runs at 128x128 keep the
  // 1000-trial batch inside the time budget; the guarantee itself does not
  // depend on the image size.
  NoiseSpec small = noise;
  small.width = 128;
  small.height = 128;
  small.seed = 42;
  DetectorConfig single = defaults;
  single.num_scales = 1;
  const CalibrationReport agg = calibrate_h0(small, single, 1000);
  check(out, agg.mean_counts[2] <= 0.02,
        "mean detections at eps=0.01 " + std::to_string(agg.mean_counts[2]));
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "eps=1: %.3f <= 2 (100 trials, 256^2, defaults); eps=0.01: %.4f <= 0.02 "
                "(1000 trials, 128^2, K=1)",
                full.mean_counts[0], agg.mean_counts[2]);
  out.detail = buf;
  return out;
}

// --------------------------------------------------------------------------
// 5. Region statistic structural checks.
// --------------------------------------------------------------------------
Outcome criterion_region_structure() {
  Outcome out;

  // (c) configuration term at N/st^2 = 1 equals alpha * beta (derived from
  // the cited constants; note their printed product rounds to 1.2874894).
  RegionNfaConfig rc;
  const double term = std::pow(10.0, region_log10_nfa(1.0, 0.0, 1.0, 1.0, rc));
  const double expected = 0.316915 * 4.062570;
  check(out, std::fabs(term - expected) <= 1e-6,
        "configuration term " + std::to_string(term));

  // (a)+(b) plateau fixtures: rectangle, L-shape, single pixel.
  struct Fixture {
    const char* name;
    std::vector<std::pair<int, int>> pixels;
  };
  std::vector<Fixture> fixtures;
  Fixture rect{"rectangle", {}};
  for (int y = 8; y <= 10; ++y)
    for (int x = 10; x <= 13; ++x) rect.pixels.push_back({x, y});
  fixtures.push_back(rect);
  Fixture ell{"l-shape", {}};
  for (int y = 4; y <= 12; ++y) ell.pixels.push_back({6, y});
  for (int x = 7; x <= 12; ++x) ell.pixels.push_back({x, 12});
  fixtures.push_back(ell);
  fixtures.push_back({"single", {{20, 20}}});

  for (const Fixture& fx : fixtures) {
    DistanceMap d;
    d.d2 = GridD(32, 32, 0.0);
    d.degrees_of_freedom = 1.0;
    d.independence_len = 1.0;
    for (const auto& [x, y] : fx.pixels) d.d2.at(x, y) = 50.0;
    const auto [set, map] = nfa_region(d, rc);
    if (!check(out, set.regions.size() == 1, std::string(fx.name) + ": region count")) continue;
    const Region& region = set.regions[0];
    const std::set<std::pair<int, int>> want(fx.pixels.begin(), fx.pixels.end());
    const std::set<std::pair<int, int>> got(region.pixels.begin(), region.pixels.end());
    check(out, got == want, std::string(fx.name) + ": recovered set differs");
    bool decreasing = region.growth_trace.size() == fx.pixels.size();
    for (std::size_t i = 1; i < region.growth_trace.size(); ++i)
      decreasing = decreasing && region.growth_trace[i] < region.growth_trace[i - 1];
    check(out, decreasing, std::string(fx.name) + ": trace not strictly decreasing");
  }
  if (out.pass)
    out.detail = "3 plateau fixtures recovered exactly; config term " + std::to_string(term);
  return out;
}

// --------------------------------------------------------------------------
// 6. Fusion and segmentation algebra.
// --------------------------------------------------------------------------
Outcome criterion_fusion_algebra() {
  Outcome out;
  auto rng = seeded(66);
  std::uniform_real_distribution<double> dist(-5.0, 6.0);
  auto random_map = [&](int w, int h) {
    NfaMap m;
    m.log10_nfa = GridD(w, h);
    for (double& v : m.log10_nfa.v) v = dist(rng);
    return m;
  };

  bool bitwise = true;
  for (int i = 0; i < 25; ++i) {
    const NfaMap a = random_map(12, 9), b = random_map(12, 9), c = random_map(12, 9);
    bitwise = bitwise && min_combine({min_combine({a, b}), c}).log10_nfa.v ==
                             min_combine({a, min_combine({b, c})}).log10_nfa.v;
    bitwise = bitwise && min_combine({a, b}).log10_nfa.v == min_combine({b, a}).log10_nfa.v;
    bitwise = bitwise && min_combine({a, a}).log10_nfa.v == a.log10_nfa.v;
  }
  check(out, bitwise, "min-fusion algebra not bit-exact");

  bool monotone = true;
  for (int i = 0; i < 100; ++i) {
    AnomalyMap map;
    map.score = random_map(10, 10).log10_nfa;
    double thr = -5.0;
    for (int step = 0; step < 10; ++step) {
      const BinaryMask lo = segment(map, thr);
      const BinaryMask hi = segment(map, thr + 1.1);
      for (std::size_t p = 0; p < lo.on.size(); ++p)
        monotone = monotone && (!hi.on[p] || lo.on[p]);
      thr += 1.1;
    }
  }
  check(out, monotone, "segment not monotone");
  if (out.pass) out.detail = "bit-level algebra on 25 triples; monotone over 100 maps";
  return out;
}

// --------------------------------------------------------------------------
// 7+8. Desk-scale dataset reproduction and GAP direction (needs MVTEC_ROOT).
// --------------------------------------------------------------------------
struct DatasetOutcome {
  Outcome auc;
  Outcome gap;
};

DatasetOutcome criterion_dataset() {
  DatasetOutcome out;
  const char* root_env = std::getenv("MVTEC_ROOT");
  if (root_env == nullptr || !std::filesystem::is_directory(root_env)) {
    out.auc.skipped = true;
    out.auc.detail = "MVTEC_ROOT not set or missing; dataset reproduction skipped";
    out.gap.skipped = true;
    out.gap.detail = out.auc.detail;
    return out;
  }
  const std::filesystem::path root(root_env);
  std::vector<EvalRow> all_rows;

  // PCA + pixel on leather.
  DetectorConfig pca_cfg;
  const auto pca_rows = evaluate_dataset((root / "leather").string(), pca_cfg, "", nullptr);
  all_rows.insert(all_rows.end(), pca_rows.begin(), pca_rows.end());
  const double pca_auc = pca_rows.at(0).auc;
  check(out.auc, pca_auc >= 0.93, "leather pca+pixel AUC " + std::to_string(pca_auc));
  const double pca_gap = pca_rows.at(0).gap;
  check(out.gap, pca_gap >= 1.5, "leather pca+pixel GAP " + std::to_string(pca_gap));

  // Gabor + pixel mean over the five textures.
  DetectorConfig gabor_cfg;
  gabor_cfg.extractor = Extractor::gabor;
  double gabor_sum = 0.0;
  int gabor_count = 0;
  for (const char* cat : {"carpet", "grid", "leather", "tile", "wood"}) {
    const auto rows = evaluate_dataset((root / cat).string(), gabor_cfg, "", nullptr);
    gabor_sum += rows.at(0).auc;
    ++gabor_count;
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
  }
  const double gabor_mean = gabor_sum / gabor_count;
  check(out.auc, gabor_mean >= 0.80, "gabor+pixel texture mean AUC " + std::to_string(gabor_mean));

  // External features + region, only when an exported tensor tree exists.
  std::string external_note = "external row skipped (NFA_FEATURES_ROOT not set)";
  if (const char* feats = std::getenv("NFA_FEATURES_ROOT");
      feats != nullptr && std::filesystem::is_directory(feats)) {
    DetectorConfig ext_cfg;
    ext_cfg.extractor = Extractor::external;
    ext_cfg.nfa = NfaStrategy::region;
    const auto rows = evaluate_dataset((root / "leather").string(), ext_cfg,
                                       (std::filesystem::path(feats) / "leather").string(),
                                       nullptr);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    check(out.auc, rows.at(0).auc >= 0.94,
          "leather external+region AUC " + std::to_string(rows.at(0).auc));
    external_note = "external+region leather AUC " + std::to_string(rows.at(0).auc);
  }

  // GAP direction must hold for every variant that ran.
  for (const EvalRow& row : all_rows)
    check(out.gap, row.gap > 0.0, row.category + " " + row.variant + " gap not positive");

  char buf[256];
  std::snprintf(buf, sizeof(buf), "leather pca+pixel AUC %.4f (>=0.93); gabor mean %.4f (>=0.80); %s",
                pca_auc, gabor_mean, external_note.c_str());
  out.auc.detail = buf;
  std::snprintf(buf, sizeof(buf), "leather pca+pixel GAP %.3f (>=1.5); direction positive for %zu rows",
                pca_gap, all_rows.size());
  out.gap.detail = buf;
  return out;
}

// --------------------------------------------------------------------------
// 9. Metric kernel.
// --------------------------------------------------------------------------
Outcome criterion_metric_kernel() {
  Outcome out;
  const std::vector<double> scores = {1, 2, 3, 4};
  const std::vector<std::uint8_t> labels = {0, 1, 0, 1};
  const double auc = roc_auc(scores, labels);
  check(out, std::fabs(auc - 0.75) <= 1e-15, "four-point AUC " + std::to_string(auc));

  auto rng = seeded(99);
  std::uniform_real_distribution<double> sdist(-5.0, 5.0);
  std::bernoulli_distribution ldist(0.25);
  std::vector<double> s(2000), t(2000);
  std::vector<std::uint8_t> l(2000);
  l[0] = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = sdist(rng);
    if (i > 0) l[i] = ldist(rng) ? 1 : 0;
    t[i] = std::pow(10.0, s[i]);
  }
  const double drift = std::fabs(roc_auc(s, l) - roc_auc(t, l));
  check(out, drift <= 1e-12, "monotone-transform drift " + std::to_string(drift));
  out.detail = "four-point AUC exact; transform drift " + std::to_string(drift);
  return out;
}

int report(int id, const char* name, const Outcome& out, double seconds, double budget) {
  const bool over_budget = !out.skipped && budget > 0.0 && seconds > budget;
  const char* verdict = out.skipped ? "SKIP" : (out.pass && !over_budget ? "PASS" : "FAIL");
  std::printf("[%d/9] %-34s %s  (%.1f s%s)\n", id, name, verdict, seconds,
              over_budget ? ", over budget" : "");
  if (!out.detail.empty()) std::printf("      %s\n", out.detail.c_str());
  return out.skipped ? 0 : ((out.pass && !over_budget) ? 0 : 1);
}

template <typename Fn>
int timed(int id, const char* name, double budget_seconds, Fn&& fn) {
  const auto start = Clock::now();
  const Outcome out = fn();
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report(id, name, out, seconds, budget_seconds);
}

}  // namespace

int main() {
  int failures = 0;
  failures += timed(1, "special-function oracles", 10.0, criterion_special_functions);
  failures += timed(2, "conv vs patch inner products", 30.0, criterion_conv_vs_patch);
  failures += timed(3, "chi-square calibration (KS)", 60.0, criterion_chi2_calibration);
  failures += timed(4, "false-alarm guarantee", 600.0, criterion_false_alarms);
  failures += timed(5, "region statistic structure", 60.0, criterion_region_structure);
  failures += timed(6, "fusion/segmentation algebra", 10.0, criterion_fusion_algebra);

  const auto start = Clock::now();
  const DatasetOutcome ds = criterion_dataset();
  const double ds_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  failures += report(7, "dataset reproduction (MVTec)", ds.auc, ds_seconds, 1800.0);
  failures += report(8, "anomaly-score GAP", ds.gap, 0.0, 0.0);

  failures += timed(9, "metric kernel", 1.0, criterion_metric_kernel);

  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "OK" : "FAILED", failures);
  return failures;
}
