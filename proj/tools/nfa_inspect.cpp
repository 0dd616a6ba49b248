#include <CLI11.hpp>
#include <map>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "nfadetect/detector.hpp"
#include "nfadetect/errors.hpp"
#include "nfadetect/eval.hpp"
#include "nfadetect/image_io.hpp"

namespace {

using namespace nfadetect;

struct Options {
  std::string extractor = "pca";
  std::string nfa = "pixel";
  int scales = 4;
  int patch_size = 17;
  int components = 0;  // 0 = per-extractor default (45 pca, 5 external)
  int block_size = 51;
  int block_stride = 10;
  double tail_p = 0.01;
  double stilde = 0.0;
  double threshold_as = 0.0;
  bool nearest_upsample = false;
  std::string features_path;
  int keep_last = 3;
  int threads = 0;
  unsigned long long seed = 0;
  std::string dump_config;

  std::string input;
  std::vector<std::string> multilight;
  std::string out_map, out_png, out_mask, out_regions;

  std::string dataset_root;
  std::string out_csv;

  int trials = 100;
  std::string noise = "gaussian";
  int size = 256;
  std::string shuffle_source;

  std::string config_path;
};

/// Flat `key = value` config file; later occurrences win, '#' starts a
/// comment line.
std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  auto trim = [](std::string s) {
    const auto begin = s.find_first_not_of(" \t\r");
    const auto end = s.find_last_not_of(" \t\r");
    return begin == std::string::npos ? std::string() : s.substr(begin, end - begin + 1);
  };
  while (std::getline(f, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line without '=': " + stripped);
    kv[trim(stripped.substr(0, eq))] = trim(stripped.substr(eq + 1));
  }
  return kv;
}

/// Applies config-file values to every pipeline key the command line left
/// at its default; flags always win.
void apply_config_file(const CLI::App* cmd, Options& o) {
  if (o.config_path.empty()) return;
  const auto kv = parse_config_file(o.config_path);
  auto lookup = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto set_string = [&](const char* key, std::string& target) {
    if (cmd->count(std::string("--") + key) == 0)
      if (const std::string* v = lookup(key)) target = *v;
  };
  auto set_int = [&](const char* key, int& target) {
    if (cmd->count(std::string("--") + key) == 0)
      if (const std::string* v = lookup(key)) target = std::stoi(*v);
  };
  auto set_double = [&](const char* key, double& target) {
    if (cmd->count(std::string("--") + key) == 0)
      if (const std::string* v = lookup(key)) target = std::stod(*v);
  };
  auto set_bool = [&](const char* key, bool& target) {
    if (cmd->count(std::string("--") + key) == 0)
      if (const std::string* v = lookup(key)) target = *v == "true" || *v == "1";
  };
  set_string("extractor", o.extractor);
  set_string("nfa", o.nfa);
  set_int("scales", o.scales);
  set_int("patch-size", o.patch_size);
  set_int("components", o.components);
  set_int("block-size", o.block_size);
  set_int("block-stride", o.block_stride);
  set_double("tail-p", o.tail_p);
  set_double("stilde", o.stilde);
  set_double("threshold-as", o.threshold_as);
  set_bool("nearest-upsample", o.nearest_upsample);
  set_string("features-path", o.features_path);
  set_int("keep-last", o.keep_last);
  set_int("threads", o.threads);
  if (cmd->count("--seed") == 0)
    if (const std::string* v = lookup("seed")) o.seed = std::stoull(*v);
}

void add_pipeline_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--extractor", o.extractor, "Feature extractor: pca|gabor|external")
      ->check(CLI::IsMember({"pca", "gabor", "external"}));
  cmd->add_option("--nfa", o.nfa, "Detection statistic: pixel|block|region")
      ->check(CLI::IsMember({"pixel", "block", "region"}));
  cmd->add_option("--scales", o.scales, "Pyramid depth K");
  cmd->add_option("--patch-size", o.patch_size, "Patch side s (odd) for the pca extractor");
  cmd->add_option("--components", o.components,
                  "Feature components m (0 = extractor default: 45 pca, 5 external)");
  cmd->add_option("--block-size", o.block_size, "Block side w for the block statistic");
  cmd->add_option("--block-stride", o.block_stride, "Block stride in pixels");
  cmd->add_option("--tail-p", o.tail_p, "Candidate-threshold p-value");
  cmd->add_option("--stilde", o.stilde, "Independence length override (0 = derive)");
  cmd->add_option("--threshold-as", o.threshold_as, "Segmentation threshold on AS (0 <=> NFA=1)");
  cmd->add_flag("--nearest-upsample", o.nearest_upsample,
                "Fuse scales with nearest-neighbor instead of bilinear upsampling");
  cmd->add_option("--features-path", o.features_path,
                  "NFAT tensor (detect) or tensor tree root (eval) for the external extractor");
  cmd->add_option("--keep-last", o.keep_last, "Multilight PCA components kept (last k of 5)");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware default)");
  cmd->add_option("--seed", o.seed, "Random seed for noise generation");
  cmd->add_option("--dump-config", o.dump_config, "Write the effective configuration to a file");
  cmd->add_option("--config", o.config_path, "Flat key = value configuration file")
      ->envname("NFA_INSPECT_CONFIG");
}

DetectorConfig make_config(const Options& o) {
  DetectorConfig cfg;
  cfg.extractor = extractor_from_string(o.extractor);
  cfg.nfa = strategy_from_string(o.nfa);
  cfg.num_scales = o.scales;
  cfg.patch_size = o.patch_size;
  cfg.num_components = o.components;
  cfg.block_size = o.block_size;
  cfg.block_stride = o.block_stride;
  cfg.tail_p = o.tail_p;
  cfg.stilde = o.stilde;
  cfg.threshold_as = o.threshold_as;
  cfg.nearest_upsample = o.nearest_upsample;
  cfg.features_path = o.features_path;
  cfg.keep_last = o.keep_last;
  cfg.threads = o.threads;
  cfg.seed = o.seed;
  return cfg;
}

void maybe_dump_config(const Options& o, const DetectorConfig& cfg) {
  if (o.dump_config.empty()) return;
  std::ofstream f(o.dump_config, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + o.dump_config);
  f << config_to_string(cfg);
}

std::string default_output(const std::string& input, const char* suffix) {
  std::filesystem::path p(input);
  p.replace_extension();
  return p.string() + suffix;
}

int run_detect(Options& o) {
  DetectorConfig cfg = make_config(o);
  maybe_dump_config(o, cfg);

  ImageStack image;
  std::string stem;
  if (!o.multilight.empty()) {
    if (o.multilight.size() != 5)
      throw std::invalid_argument("--multilight expects exactly 5 image paths");
    MultiLightSet set;
    for (int i = 0; i < 5; ++i) set.views[i] = load_image(o.multilight[i]);
    image = multilight_pca(set, o.keep_last);
    stem = o.multilight[0];
  } else {
    if (o.input.empty())
      throw std::invalid_argument("detect needs an input image (or --multilight)");
    image = load_image(o.input);
    stem = o.input;
  }

  if (o.out_map.empty()) o.out_map = default_output(stem, ".as.nfat");
  if (o.out_png.empty()) o.out_png = default_output(stem, ".as.png");
  if (o.out_mask.empty()) o.out_mask = default_output(stem, ".mask.png");
  if (o.out_regions.empty()) o.out_regions = default_output(stem, ".regions.txt");

  const DetectionResult res = run_detector(image, cfg);

  write_nfat(o.out_map, res.anomaly.score);
  save_png_gray8(o.out_png, anomaly_to_gray8(res.anomaly), res.anomaly.score.width,
                 res.anomaly.score.height);
  std::vector<std::uint8_t> mask_px(res.mask.on.size());
  for (std::size_t i = 0; i < mask_px.size(); ++i) mask_px[i] = res.mask.on[i] ? 255 : 0;
  save_png_gray8(o.out_mask, mask_px, res.mask.width, res.mask.height);
  if (cfg.nfa == NfaStrategy::region) write_regions(o.out_regions, res.regions);

  double max_as = res.anomaly.score.v.empty() ? 0.0 : res.anomaly.score.v[0];
  for (double v : res.anomaly.score.v) max_as = std::max(max_as, v);
  std::printf("%s+%s: max AS %.3f, %zu pixel(s) above threshold %.3g\n",
              to_string(cfg.extractor).c_str(), to_string(cfg.nfa).c_str(), max_as,
              res.mask.count(), cfg.threshold_as);
  if (cfg.nfa == NfaStrategy::region)
    std::printf("%zu region(s) written to %s\n", res.regions.regions.size(),
                o.out_regions.c_str());
  return res.any_detection ? 3 : 0;
}

int run_eval(Options& o) {
  const DetectorConfig cfg = make_config(o);
  maybe_dump_config(o, cfg);
  std::vector<std::string> errors;
  const std::vector<EvalRow> rows = evaluate_dataset(o.dataset_root, cfg, o.features_path, &errors);
  for (const std::string& e : errors) std::fprintf(stderr, "warning: %s\n", e.c_str());
  std::fputs(eval_to_text(rows).c_str(), stdout);
  if (o.out_csv.empty()) o.out_csv = "eval_report.csv";
  std::ofstream f(o.out_csv, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + o.out_csv);
  f << eval_to_csv(rows);
  std::printf("report written to %s\n", o.out_csv.c_str());
  return 0;
}

int run_calibrate(Options& o) {
  const DetectorConfig cfg = make_config(o);
  maybe_dump_config(o, cfg);
  NoiseSpec noise;
  noise.width = o.size;
  noise.height = o.size;
  noise.seed = o.seed;
  noise.source_path = o.shuffle_source;
  if (o.noise == "gaussian")
    noise.kind = NoiseSpec::Kind::gaussian;
  else if (o.noise == "uniform")
    noise.kind = NoiseSpec::Kind::uniform;
  else if (o.noise == "shuffle")
    noise.kind = NoiseSpec::Kind::shuffle;
  else
    throw std::invalid_argument("unknown noise kind: " + o.noise);

  const CalibrationReport report = calibrate_h0(noise, cfg, o.trials);
  const std::string csv = calibration_to_csv(report);
  std::fputs(csv.c_str(), stdout);
  if (!o.out_csv.empty()) {
    std::ofstream f(o.out_csv, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + o.out_csv);
    f << csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-image anomaly detection with a-contrario NFA statistics"};
  app.require_subcommand(1);
  Options o;

  CLI::App* detect = app.add_subcommand("detect", "Detect anomalies in one image");
  detect->add_option("input", o.input, "Input PNG (8/16-bit gray or RGB)");
  detect->add_option("--multilight", o.multilight,
                     "Five single-channel views: diffuse + 4 grazing lights")
      ->expected(5);
  detect->add_option("--out-map", o.out_map, "Anomaly-score NFAT output");
  detect->add_option("--out-png", o.out_png, "Anomaly-score visualization PNG");
  detect->add_option("--out-mask", o.out_mask, "Binary detection mask PNG");
  detect->add_option("--out-regions", o.out_regions, "Region list (region statistic only)");
  add_pipeline_flags(detect, o);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate on an MVTec-style dataset");
  eval->add_option("root", o.dataset_root, "Dataset root (category or directory of categories)")
      ->required();
  eval->add_option("--out-csv", o.out_csv, "Report CSV path (default eval_report.csv)");
  add_pipeline_flags(eval, o);

  CLI::App* calibrate = app.add_subcommand("calibrate", "Estimate false alarms on noise images");
  calibrate->add_option("--trials", o.trials, "Number of noise images");
  calibrate->add_option("--noise", o.noise, "Noise model: gaussian|uniform|shuffle")
      ->check(CLI::IsMember({"gaussian", "uniform", "shuffle"}));
  calibrate->add_option("--size", o.size, "Noise image side length");
  calibrate->add_option("--shuffle-source", o.shuffle_source,
                        "Image whose pixels get permuted in shuffle mode");
  calibrate->add_option("--out-csv", o.out_csv, "Also write the report CSV here");
  add_pipeline_flags(calibrate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (detect->parsed()) {
      apply_config_file(detect, o);
      return run_detect(o);
    }
    if (eval->parsed()) {
      apply_config_file(eval, o);
      return run_eval(o);
    }
    if (calibrate->parsed()) {
      apply_config_file(calibrate, o);
      return run_calibrate(o);
    }
  } catch (const nfadetect::io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const nfadetect::format_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
