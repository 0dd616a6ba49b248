#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfadetect/detector.hpp"
#include "nfadetect/image.hpp"

namespace nfadetect {

/// Test image plus its ground-truth mask; an empty mask path means
/// all-normal.
struct LabeledSample {
  std::string image_path;
  std::string mask_path;
  std::string category;
  std::string defect;
};

struct DatasetLoadReport {
  std::vector<LabeledSample> samples;
  std::vector<std::string> errors;  // orphan masks, unreadable images, size mismatches
};

/// Scans an MVTec-style tree: root/test/<defect>/NNN.png paired with
/// root/ground_truth/<defect>/NNN_mask.png; test/good has no masks.
DatasetLoadReport load_dataset(const std::string& root);

/// Rank-based (Mann-Whitney) AUC with midrank tie handling. Throws
/// undefined_metric unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// median(score | label=1) - median(score | label=0).
double gap(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Streaming pixel accumulator for dataset-scale AUC/GAP: scores are packed
/// with their label into sortable 64-bit keys, so a hundred million pixels
/// fit comfortably and the ranking is exact at float32 resolution.
class PixelScoreAccumulator {
 public:
  void add(float score, bool anomalous);
  void reserve(std::size_t n) { packed_.reserve(n); }
  std::size_t size() const { return packed_.size(); }

  double auc() const;  // throws undefined_metric on single-class data
  double gap() const;

 private:
  mutable std::vector<std::uint64_t> packed_;
  mutable bool sorted_ = false;
  std::size_t positives_ = 0;
};

// ---------------------------------------------------------------------------
// Null-model calibration.
// ---------------------------------------------------------------------------

struct NoiseSpec {
  enum class Kind { gaussian, uniform, shuffle };
  Kind kind = Kind::gaussian;
  int width = 256;
  int height = 256;
  std::uint64_t seed = 1;
  std::string source_path;  // shuffle mode: image whose pixels get permuted
  double mean = 0.5;        // gaussian mode
  double stddev = 0.1;
};

/// Deterministic noise image for trial index `trial` (same spec + trial
/// always yields the same image, independent of threading).
ImageStack make_noise_image(const NoiseSpec& spec, std::uint64_t trial);

struct CalibrationReport {
  std::string strategy;
  int width = 0;
  int height = 0;
  int trials = 0;
  std::vector<double> epsilons;     // {1, 0.1, 0.01}
  std::vector<double> mean_counts;  // mean epsilon-meaningful detections per trial
};

/// Runs the full detector on `trials` noise images and reports the mean
/// count of epsilon-meaningful detections (pixels for the pixel strategy,
/// blocks/regions for the others) at epsilon in {1, 0.1, 0.01}.
CalibrationReport calibrate_h0(const NoiseSpec& noise, const DetectorConfig& cfg, int trials);

std::string calibration_to_csv(const CalibrationReport& report);

// ---------------------------------------------------------------------------
// Dataset evaluation.
// ---------------------------------------------------------------------------

struct EvalRow {
  std::string category;
  std::string variant;  // e.g. "pca+pixel"
  double auc = 0.0;
  double gap = 0.0;
  long long n_pixels = 0;
  std::string error;  // non-empty when the metric is undefined for this category
};

/// Evaluates every category under root (either a single category directory
/// or a directory of categories). For the external extractor,
/// features_root names a tree mirroring test/<defect>/<stem>.nfat.
std::vector<EvalRow> evaluate_dataset(const std::string& root, const DetectorConfig& cfg,
                                      const std::string& features_root = "",
                                      std::vector<std::string>* load_errors = nullptr);

std::string eval_to_csv(const std::vector<EvalRow>& rows);
std::string eval_to_text(const std::vector<EvalRow>& rows);

}  // namespace nfadetect
