#include "nfadetect/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <stdexcept>

#include "nfadetect/errors.hpp"
#include "nfadetect/image_io.hpp"

namespace fs = std::filesystem;

namespace nfadetect {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Order-preserving map from float to uint32 (total order, negatives first).
std::uint32_t sortable_bits(float f) {
  const std::uint32_t b = std::bit_cast<std::uint32_t>(f);
  return (b & 0x80000000u) ? ~b : (b | 0x80000000u);
}

float sortable_to_float(std::uint32_t u) {
  const std::uint32_t b = (u & 0x80000000u) ? (u & 0x7fffffffu) : ~u;
  return std::bit_cast<float>(b);
}

/// Midrank AUC over a sorted sequence of (key, label) pairs; `key` only
/// serves to delimit tie groups.
template <typename It, typename KeyFn, typename LabelFn>
double midrank_auc(It begin, It end, KeyFn key, LabelFn label) {
  long double rank_sum_pos = 0.0L;
  std::size_t n_pos = 0, n = 0;
  It it = begin;
  while (it != end) {
    It group_end = it;
    std::size_t group_pos = 0, group_n = 0;
    while (group_end != end && key(*group_end) == key(*it)) {
      group_pos += label(*group_end) ? 1 : 0;
      ++group_n;
      ++group_end;
    }
    const long double mid = static_cast<long double>(n) + (group_n + 1) / 2.0L;
    rank_sum_pos += mid * group_pos;
    n_pos += group_pos;
    n += group_n;
    it = group_end;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw undefined_metric("roc_auc: both classes must be present");
  const long double u =
      rank_sum_pos - static_cast<long double>(n_pos) * (n_pos + 1) / 2.0L;
  return static_cast<double>(u / (static_cast<long double>(n_pos) * n_neg));
}

double median_sorted(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

bool has_test_dir(const fs::path& p) { return fs::is_directory(p / "test"); }

}  // namespace

DatasetLoadReport load_dataset(const std::string& root) {
  const fs::path root_path(root);
  const fs::path test_dir = root_path / "test";
  if (!fs::is_directory(test_dir))
    throw std::invalid_argument("load_dataset: no test/ directory under " + root);
  const fs::path gt_dir = root_path / "ground_truth";
  const bool have_gt = fs::is_directory(gt_dir);
  const std::string category = root_path.filename().string();

  DatasetLoadReport report;
  std::vector<fs::path> defect_dirs;
  for (const auto& entry : fs::directory_iterator(test_dir))
    if (entry.is_directory()) defect_dirs.push_back(entry.path());
  std::sort(defect_dirs.begin(), defect_dirs.end());

  for (const fs::path& dir : defect_dirs) {
    const std::string defect = dir.filename().string();
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".png")
        images.push_back(entry.path());
    std::sort(images.begin(), images.end());

    for (const fs::path& img : images) {
      LabeledSample sample;
      sample.image_path = img.string();
      sample.category = category;
      sample.defect = defect;
      if (defect != "good" && have_gt) {
        const fs::path mask = gt_dir / defect / (img.stem().string() + "_mask.png");
        if (!fs::is_regular_file(mask)) {
          report.errors.push_back("missing mask for " + img.string());
          continue;
        }
        try {
          const auto [iw, ih] = png_dimensions(img.string());
          const auto [mw, mh] = png_dimensions(mask.string());
          if (iw != mw || ih != mh) {
            report.errors.push_back("mask size mismatch for " + img.string());
            continue;
          }
        } catch (const std::exception& e) {
          report.errors.push_back(e.what());
          continue;
        }
        sample.mask_path = mask.string();
      }
      report.samples.push_back(std::move(sample));
    }

    // Orphan masks: ground truth without a matching test image.
    if (have_gt && fs::is_directory(gt_dir / defect)) {
      for (const auto& entry : fs::directory_iterator(gt_dir / defect)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        std::string stem = entry.path().stem().string();
        const std::string suffix = "_mask";
        if (stem.size() > suffix.size() && stem.ends_with(suffix))
          stem.resize(stem.size() - suffix.size());
        if (!fs::is_regular_file(dir / (stem + ".png")))
          report.errors.push_back("orphan mask " + entry.path().string());
      }
    }
  }
  return report;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("roc_auc: scores/labels size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return midrank_auc(
      order.begin(), order.end(), [&](std::size_t i) { return scores[i]; },
      [&](std::size_t i) { return labels[i] != 0; });
}

double gap(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("gap: scores/labels size mismatch");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (labels[i] != 0 ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) throw undefined_metric("gap: both classes must be present");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  return median_sorted(pos) - median_sorted(neg);
}

void PixelScoreAccumulator::add(float score, bool anomalous) {
  packed_.push_back((static_cast<std::uint64_t>(sortable_bits(score)) << 32) |
                    (anomalous ? 1u : 0u));
  positives_ += anomalous ? 1 : 0;
  sorted_ = false;
}

double PixelScoreAccumulator::auc() const {
  if (!sorted_) {
    std::sort(packed_.begin(), packed_.end());
    sorted_ = true;
  }
  return midrank_auc(
      packed_.begin(), packed_.end(), [](std::uint64_t v) { return v >> 32; },
      [](std::uint64_t v) { return (v & 1u) != 0; });
}

double PixelScoreAccumulator::gap() const {
  if (packed_.empty() || positives_ == 0 || positives_ == packed_.size())
    throw undefined_metric("gap: both classes must be present");
  if (!sorted_) {
    std::sort(packed_.begin(), packed_.end());
    sorted_ = true;
  }
  const std::size_t n_pos = positives_;
  const std::size_t n_neg = packed_.size() - n_pos;
  // Median order statistics for each class in one sweep.
  const std::size_t pos_lo = (n_pos - 1) / 2, pos_hi = n_pos / 2;
  const std::size_t neg_lo = (n_neg - 1) / 2, neg_hi = n_neg / 2;
  double pos_med = 0.0, neg_med = 0.0;
  std::size_t pos_seen = 0, neg_seen = 0;
  for (std::uint64_t v : packed_) {
    const float score = sortable_to_float(static_cast<std::uint32_t>(v >> 32));
    if (v & 1u) {
      if (pos_seen == pos_lo) pos_med += 0.5 * score;
      if (pos_seen == pos_hi) pos_med += 0.5 * score;
      ++pos_seen;
    } else {
      if (neg_seen == neg_lo) neg_med += 0.5 * score;
      if (neg_seen == neg_hi) neg_med += 0.5 * score;
      ++neg_seen;
    }
  }
  return pos_med - neg_med;
}

ImageStack make_noise_image(const NoiseSpec& spec, std::uint64_t trial) {
  std::mt19937_64 rng(splitmix64(splitmix64(spec.seed) ^ (trial + 1)));
  switch (spec.kind) {
    case NoiseSpec::Kind::gaussian: {
      ImageStack img(spec.width, spec.height, 1);
      std::normal_distribution<double> dist(spec.mean, spec.stddev);
      for (float& v : img.data())
        v = static_cast<float>(std::clamp(dist(rng), 0.0, 1.0));
      return img;
    }
    case NoiseSpec::Kind::uniform: {
      ImageStack img(spec.width, spec.height, 1);
      std::uniform_real_distribution<double> dist(0.0, 1.0);
      for (float& v : img.data()) v = static_cast<float>(dist(rng));
      return img;
    }
    case NoiseSpec::Kind::shuffle: {
      if (spec.source_path.empty())
        throw std::invalid_argument("make_noise_image: shuffle mode needs a source image");
      ImageStack img = load_image(spec.source_path);
      const std::size_t n = img.plane_size();
      std::vector<std::uint32_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0u);
      for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(perm[i], perm[pick(rng)]);
      }
      ImageStack out(img.width(), img.height(), img.channels());
      for (int c = 0; c < img.channels(); ++c) {
        const float* src = img.plane(c).data;
        float* dst = out.plane_data(c);
        for (std::size_t p = 0; p < n; ++p) dst[p] = src[perm[p]];
      }
      return out;
    }
  }
  throw std::invalid_argument("make_noise_image: unknown noise kind");
}

CalibrationReport calibrate_h0(const NoiseSpec& noise, const DetectorConfig& cfg, int trials) {
  if (trials < 1) throw std::invalid_argument("calibrate_h0: trials must be >= 1");
  const std::vector<double> epsilons = {1.0, 0.1, 0.01};
  std::vector<std::array<long long, 3>> counts(trials, {0, 0, 0});

  DetectorConfig run_cfg = cfg;
  run_cfg.keep_tested_maps = true;  // pixel counting happens on the tested maps

#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < trials; ++t) {
    const ImageStack img = make_noise_image(noise, static_cast<std::uint64_t>(t));
    const DetectionResult res = run_detector(img, run_cfg);
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
      const double log10_eps = std::log10(epsilons[e]);
      long long count = 0;
      if (cfg.nfa == NfaStrategy::pixel) {
        // Count tested pixels across the pyramid, at their native scales;
        // upsampled renderings interpolate and are not tested events.
        for (const NfaMap& map : res.tested_maps)
          for (double v : map.log10_nfa.v)
            if (v < log10_eps) ++count;
      } else {
        for (double v : res.unit_log10_nfa)
          if (v < log10_eps) ++count;
      }
      counts[t][e] = count;
    }
  }

  CalibrationReport report;
  report.strategy = to_string(cfg.nfa);
  report.width = noise.width;
  report.height = noise.height;
  report.trials = trials;
  report.epsilons = epsilons;
  report.mean_counts.assign(epsilons.size(), 0.0);
  for (int t = 0; t < trials; ++t)
    for (std::size_t e = 0; e < epsilons.size(); ++e)
      report.mean_counts[e] += static_cast<double>(counts[t][e]);
  for (double& m : report.mean_counts) m /= trials;
  return report;
}

std::string calibration_to_csv(const CalibrationReport& report) {
  std::string out = "strategy,width,height,trials,epsilon,mean_detections\n";
  char buf[160];
  for (std::size_t e = 0; e < report.epsilons.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%g,%.6f\n", report.strategy.c_str(),
                  report.width, report.height, report.trials, report.epsilons[e],
                  report.mean_counts[e]);
    out += buf;
  }
  return out;
}

std::vector<EvalRow> evaluate_dataset(const std::string& root, const DetectorConfig& cfg,
                                      const std::string& features_root,
                                      std::vector<std::string>* load_errors) {
  const fs::path root_path(root);
  std::vector<fs::path> categories;
  if (has_test_dir(root_path)) {
    categories.push_back(root_path);
  } else if (fs::is_directory(root_path)) {
    for (const auto& entry : fs::directory_iterator(root_path))
      if (entry.is_directory() && has_test_dir(entry.path())) categories.push_back(entry.path());
    std::sort(categories.begin(), categories.end());
  }
  if (categories.empty())
    throw std::invalid_argument("evaluate_dataset: no categories under " + root);

  const std::string variant = to_string(cfg.extractor) + "+" + to_string(cfg.nfa);
  std::vector<EvalRow> rows;
  for (const fs::path& cat : categories) {
    EvalRow row;
    row.category = cat.filename().string();
    row.variant = variant;

    DatasetLoadReport report = load_dataset(cat.string());
    if (load_errors)
      load_errors->insert(load_errors->end(), report.errors.begin(), report.errors.end());

    PixelScoreAccumulator acc;
    for (const LabeledSample& sample : report.samples) {
      try {
        const ImageStack img = load_image(sample.image_path);
        std::vector<std::uint8_t> truth(img.plane_size(), 0);
        if (!sample.mask_path.empty()) {
          const ImageStack mask = load_image(sample.mask_path);
          if (!mask.same_size(img)) {
            if (load_errors)
              load_errors->push_back("mask size mismatch for " + sample.image_path);
            continue;
          }
          for (std::size_t p = 0; p < truth.size(); ++p)
            truth[p] = mask.plane(0).data[p] > 0.0f ? 1 : 0;
        }
        DetectorConfig run_cfg = cfg;
        if (cfg.extractor == Extractor::external) {
          const fs::path rel = fs::relative(sample.image_path, root_path);
          fs::path tensor = fs::path(features_root) / rel;
          tensor.replace_extension(".nfat");
          if (!fs::is_regular_file(tensor)) {
            if (load_errors)
              load_errors->push_back("missing feature tensor " + tensor.string());
            continue;
          }
          run_cfg.features_path = tensor.string();
        }
        const DetectionResult res = run_detector(img, run_cfg);
        for (std::size_t p = 0; p < res.anomaly.score.size(); ++p)
          acc.add(static_cast<float>(res.anomaly.score.v[p]), truth[p] != 0);
      } catch (const io_error& e) {
        if (load_errors) load_errors->push_back(e.what());
      } catch (const format_error& e) {
        if (load_errors) load_errors->push_back(e.what());
      }
    }

    row.n_pixels = static_cast<long long>(acc.size());
    try {
      row.auc = acc.auc();
      row.gap = acc.gap();
    } catch (const undefined_metric& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string eval_to_csv(const std::vector<EvalRow>& rows) {
  std::string out = "category,variant,auc,gap,n_pixels\n";
  char buf[256];
  for (const EvalRow& row : rows) {
    if (row.error.empty())
      std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%lld\n", row.category.c_str(),
                    row.variant.c_str(), row.auc, row.gap, row.n_pixels);
    else
      std::snprintf(buf, sizeof(buf), "%s,%s,nan,nan,%lld\n", row.category.c_str(),
                    row.variant.c_str(), row.n_pixels);
    out += buf;
  }
  return out;
}

std::string eval_to_text(const std::vector<EvalRow>& rows) {
  std::string out;
  char buf[256];
  for (const EvalRow& row : rows) {
    if (row.error.empty())
      std::snprintf(buf, sizeof(buf), "%-12s %-16s auc %.4f  gap %+.3f  (%lld px)\n",
                    row.category.c_str(), row.variant.c_str(), row.auc, row.gap, row.n_pixels);
    else
      std::snprintf(buf, sizeof(buf), "%-12s %-16s undefined: %s\n", row.category.c_str(),
                    row.variant.c_str(), row.error.c_str());
    out += buf;
  }
  return out;
}

}  // namespace nfadetect
