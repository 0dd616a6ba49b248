#include "nfadetect/features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nfadetect/errors.hpp"
#include "nfadetect/grid.hpp"
#include "nfadetect/image_io.hpp"

namespace nfadetect {

namespace {

constexpr int kPixelsPerBlock = 8192;
constexpr int kCovChunks = 8;  // fixed partition so reductions are order-stable

/// Mirror about the edge sample (no edge duplication): -1 -> 1, n -> n-2.
inline int reflect101(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}

/// Fills X (s*s rows, count cols) with the mirror-padded s×s patches
/// centered on pixels [p0, p0+count) in row-major pixel order.
void extract_patches(PlaneView plane, int s, std::size_t p0, int count,
                     Eigen::Ref<Eigen::MatrixXd> X) {
  const int r = s / 2;
  const int w = plane.width;
  const int h = plane.height;
  for (int col = 0; col < count; ++col) {
    const std::size_t p = p0 + col;
    const int y = static_cast<int>(p / w);
    const int x = static_cast<int>(p % w);
    double* dst = X.col(col).data();
    for (int j = 0; j < s; ++j) {
      const int ry = reflect101(y + j - r, h);
      const float* row = plane.data + static_cast<std::size_t>(ry) * w;
      for (int i = 0; i < s; ++i) dst[j * s + i] = row[reflect101(x + i - r, w)];
    }
  }
}

void validate_patch_config(PlaneView plane, const PatchPcaConfig& cfg) {
  if (cfg.patch_size < 3 || cfg.patch_size % 2 == 0)
    throw std::invalid_argument("fit_patch_pca: patch_size must be odd and >= 3");
  const int n = cfg.patch_size * cfg.patch_size;
  if (cfg.num_components < 1 || cfg.num_components > n)
    throw std::invalid_argument("fit_patch_pca: num_components must be in [1, s^2]");
  if (plane.width < cfg.patch_size || plane.height < cfg.patch_size)
    throw std::invalid_argument("fit_patch_pca: plane smaller than the patch");
}

/// Largest-magnitude tap positive; first index wins ties.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  int arg = 0;
  for (int i = 1; i < v.size(); ++i)
    if (std::fabs(v[i]) > std::fabs(v[arg])) arg = i;
  if (v[arg] < 0.0) v = -v;
}

}  // namespace

int FilterBank::max_kernel_size() const {
  int m = 0;
  for (const Kernel& k : kernels) m = std::max(m, k.size);
  return m;
}

bool kernel_folds_collide(const Kernel& kernel) {
  const int s = kernel.size;
  const int r = s / 2;
  if (r == 0) return false;
  // Check every border class against a virtual frame wide enough that the
  // left and right folds cannot interact.
  const int wv = 4 * r + 2;
  std::vector<char> seen(static_cast<std::size_t>(wv) * wv, 0);
  std::vector<int> touched;
  for (int cy = 0; cy <= 2 * r; ++cy) {
    const int vy = cy < r ? cy : (cy == r ? 2 * r : wv - 1 - (2 * r - cy));
    for (int cx = 0; cx <= 2 * r; ++cx) {
      if (cx == r && cy == r) continue;
      const int vx = cx < r ? cx : (cx == r ? 2 * r : wv - 1 - (2 * r - cx));
      bool collides = false;
      for (int j = 0; j < s && !collides; ++j) {
        const int sy = reflect101(vy + j - r, wv);
        for (int i = 0; i < s; ++i) {
          if (kernel.taps[j * s + i] == 0.0) continue;
          const int sx = reflect101(vx + i - r, wv);
          const int idx = sy * wv + sx;
          if (seen[idx]) {
            collides = true;
            break;
          }
          seen[idx] = 1;
          touched.push_back(idx);
        }
      }
      for (int idx : touched) seen[idx] = 0;
      touched.clear();
      if (collides) return true;
    }
  }
  return false;
}

namespace {

/// Copies the nearest fully-valid value into the border ring so every
/// emitted statistic comes from an unfolded patch.
void replicate_borders(double* plane, int w, int h, int r) {
  if (r == 0) return;
  auto clamp_src = [&](int coord, int extent) {
    return std::clamp(coord, r, extent - 1 - r);
  };
  for (int y = 0; y < h; ++y) {
    const int sy = clamp_src(y, h);
    for (int x = 0; x < w; ++x) {
      if (y >= r && y < h - r && x >= r && x < w - r) continue;
      plane[static_cast<std::size_t>(y) * w + x] =
          plane[static_cast<std::size_t>(sy) * w + clamp_src(x, w)];
    }
  }
}

}  // namespace

FilterBank fit_patch_pca(PlaneView plane, const PatchPcaConfig& cfg) {
  validate_patch_config(plane, cfg);
  const int s = cfg.patch_size;
  const int dim = s * s;
  const std::size_t n = static_cast<std::size_t>(plane.width) * plane.height;

  std::vector<Eigen::MatrixXd> cov_parts(kCovChunks, Eigen::MatrixXd::Zero(dim, dim));
  std::vector<Eigen::VectorXd> mean_parts(kCovChunks, Eigen::VectorXd::Zero(dim));

#pragma omp parallel for schedule(static, 1)
  for (int chunk = 0; chunk < kCovChunks; ++chunk) {
    const std::size_t begin = n * chunk / kCovChunks;
    const std::size_t end = n * (chunk + 1) / kCovChunks;
    Eigen::MatrixXd X(dim, kPixelsPerBlock);
    for (std::size_t p = begin; p < end; p += kPixelsPerBlock) {
      const int count = static_cast<int>(std::min<std::size_t>(kPixelsPerBlock, end - p));
      auto block = X.leftCols(count);
      extract_patches(plane, s, p, count, block);
      mean_parts[chunk] += block.rowwise().sum();
      cov_parts[chunk].selfadjointView<Eigen::Lower>().rankUpdate(block, 1.0);
    }
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (int chunk = 0; chunk < kCovChunks; ++chunk) {
    mean += mean_parts[chunk];
    cov += cov_parts[chunk];
  }
  mean /= static_cast<double>(n);
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n);
  cov.noalias() -= mean * mean.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("fit_patch_pca: eigendecomposition failed");

  const double total_variance = std::max(cov.trace(), 0.0);
  FilterBank bank;
  bank.tag = "pca";
  bank.degenerate = total_variance < 1e-30;
  const double floor = bank.degenerate ? 1e-12 : 1e-12 * total_variance;

  bank.patch_mean.assign(mean.data(), mean.data() + dim);
  bank.kernels.reserve(cfg.num_components);
  bank.eigenvalues.reserve(cfg.num_components);
  for (int i = 0; i < cfg.num_components; ++i) {
    Eigen::VectorXd v = solver.eigenvectors().col(dim - 1 - i);  // descending order
    fix_sign(v);
    Kernel k;
    k.size = s;
    k.taps.assign(v.data(), v.data() + dim);
    bank.kernels.push_back(std::move(k));
    bank.eigenvalues.push_back(std::max(solver.eigenvalues()[dim - 1 - i], floor));
  }
  return bank;
}

FeatureStack apply_bank(PlaneView plane, const FilterBank& bank) {
  if (bank.count() < 1) throw std::invalid_argument("apply_bank: empty bank");
  const int max_size = bank.max_kernel_size();
  if (plane.width < max_size || plane.height < max_size)
    throw std::invalid_argument("apply_bank: plane smaller than the largest kernel");

  const std::size_t n = static_cast<std::size_t>(plane.width) * plane.height;
  FeatureStack out;
  out.width = plane.width;
  out.height = plane.height;
  out.count = bank.count();
  out.extractor = bank.tag;
  out.independence_len = max_size;
  out.planes.resize(static_cast<std::size_t>(bank.count()) * n);

  // Projection of the mean-subtracted patch differs from the raw projection
  // by a per-kernel constant.
  std::vector<double> offsets(bank.count(), 0.0);
  if (!bank.patch_mean.empty()) {
    for (int k = 0; k < bank.count(); ++k) {
      const Kernel& kern = bank.kernels[k];
      if (kern.taps.size() != bank.patch_mean.size())
        throw std::invalid_argument("apply_bank: patch mean does not match kernel size");
      offsets[k] = std::inner_product(kern.taps.begin(), kern.taps.end(), bank.patch_mean.begin(),
                                      0.0);
    }
  }

  // Group kernels by size so each group shares one patch extraction.
  std::vector<int> order(bank.kernels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return bank.kernels[a].size < bank.kernels[b].size; });

  std::size_t group_start = 0;
  while (group_start < order.size()) {
    std::size_t group_end = group_start;
    const int s = bank.kernels[order[group_start]].size;
    while (group_end < order.size() && bank.kernels[order[group_end]].size == s) ++group_end;
    const int g = static_cast<int>(group_end - group_start);
    const int dim = s * s;

    Eigen::MatrixXd kmat(g, dim);
    for (int kk = 0; kk < g; ++kk)
      kmat.row(kk) = Eigen::Map<const Eigen::VectorXd>(
          bank.kernels[order[group_start + kk]].taps.data(), dim);

    const int num_blocks = static_cast<int>((n + kPixelsPerBlock - 1) / kPixelsPerBlock);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < num_blocks; ++b) {
      const std::size_t p0 = static_cast<std::size_t>(b) * kPixelsPerBlock;
      const int count = static_cast<int>(std::min<std::size_t>(kPixelsPerBlock, n - p0));
      Eigen::MatrixXd X(dim, count);
      extract_patches(plane, s, p0, count, X);
      Eigen::MatrixXd proj = kmat * X;  // g x count
      for (int kk = 0; kk < g; ++kk) {
        const int kidx = order[group_start + kk];
        double* dst = out.planes.data() + static_cast<std::size_t>(kidx) * n + p0;
        const double off = offsets[kidx];
        for (int col = 0; col < count; ++col) dst[col] = proj(kk, col) - off;
      }
    }
    group_start = group_end;
  }

#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < bank.count(); ++k) {
    const Kernel& kernel = bank.kernels[k];
    if (kernel_folds_collide(kernel))
      replicate_borders(out.plane_data(k), out.width, out.height, kernel.size / 2);
  }
  return out;
}

FilterBank build_gabor_bank(const GaborBankConfig& cfg) {
  if (cfg.kernel_sizes.empty() || cfg.orientations_deg.empty() || cfg.phases.empty())
    throw std::invalid_argument("build_gabor_bank: empty parameter list");
  for (int s : cfg.kernel_sizes)
    if (s < 3 || s % 2 == 0)
      throw std::invalid_argument("build_gabor_bank: kernel sizes must be odd and >= 3");

  FilterBank bank;
  bank.tag = "gabor";
  for (int s : cfg.kernel_sizes) {
    const int r = s / 2;
    const double wavelength = s / 2.0;
    const double sigma = 0.4 * s;
    for (double theta_deg : cfg.orientations_deg) {
      const double theta = theta_deg * M_PI / 180.0;
      const double ct = std::cos(theta);
      const double st = std::sin(theta);
      for (double phase : cfg.phases) {
        Kernel k;
        k.size = s;
        k.taps.resize(static_cast<std::size_t>(s) * s);
        double sum = 0.0;
        for (int j = 0; j < s; ++j) {
          for (int i = 0; i < s; ++i) {
            const double dx = i - r;
            const double dy = j - r;
            const double xr = dx * ct + dy * st;
            const double yr = -dx * st + dy * ct;
            const double envelope = std::exp(-(xr * xr + yr * yr) / (2.0 * sigma * sigma));
            const double carrier = std::cos(2.0 * M_PI * xr / wavelength + phase);
            k.taps[j * s + i] = envelope * carrier;
            sum += k.taps[j * s + i];
          }
        }
        const double mean = sum / (s * s);
        double norm2 = 0.0;
        for (double& t : k.taps) {
          t -= mean;
          norm2 += t * t;
        }
        const double norm = std::sqrt(norm2);
        if (norm > 0.0)
          for (double& t : k.taps) t /= norm;
        bank.kernels.push_back(std::move(k));
      }
    }
  }
  return bank;
}

FeatureStack ingest_external_features(const std::string& path, int image_width, int image_height,
                                      int num_components, double stilde_override) {
  const FloatTensor t = read_nfat(path);
  for (float v : t.data)
    if (!std::isfinite(v)) throw format_error("non-finite values in feature tensor " + path);
  if (num_components < 1 || num_components > t.channels)
    throw std::invalid_argument("ingest_external_features: num_components must be in [1, C]");
  if (image_width < t.width || image_height < t.height)
    throw std::invalid_argument("ingest_external_features: feature grid larger than the image");

  const double rw = static_cast<double>(image_width) / t.width;
  const double rh = static_cast<double>(image_height) / t.height;
  if (std::fabs(rw - rh) > 0.5)
    throw std::invalid_argument("ingest_external_features: anisotropic feature stride");
  const double stride = std::max(1.0, std::round(0.5 * (rw + rh)));

  const std::size_t grid_n = static_cast<std::size_t>(t.width) * t.height;
  Eigen::MatrixXd X(t.channels, grid_n);
  for (int c = 0; c < t.channels; ++c)
    for (std::size_t p = 0; p < grid_n; ++p)
      X(c, p) = t.data[static_cast<std::size_t>(c) * grid_n + p];

  const Eigen::VectorXd mean = X.rowwise().mean();
  X.colwise() -= mean;
  Eigen::MatrixXd cov = X * X.transpose() / static_cast<double>(grid_n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("ingest_external_features: eigendecomposition failed");

  FeatureStack out;
  out.width = image_width;
  out.height = image_height;
  out.count = num_components;
  out.extractor = "external";
  out.independence_len = stilde_override > 0.0 ? stilde_override : stride;
  out.planes.resize(static_cast<std::size_t>(num_components) * image_width * image_height);

  for (int i = 0; i < num_components; ++i) {
    Eigen::VectorXd basis = solver.eigenvectors().col(t.channels - 1 - i);
    fix_sign(basis);
    const Eigen::VectorXd proj = basis.transpose() * X;
    GridD coarse(t.width, t.height);
    for (std::size_t p = 0; p < grid_n; ++p) coarse.v[p] = proj[static_cast<Eigen::Index>(p)];
    const GridD fine = upsample_bilinear(coarse, image_width, image_height);
    std::copy(fine.v.begin(), fine.v.end(), out.plane_data(i));
  }
  return out;
}

}  // namespace nfadetect
