#include "nfadetect/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nfadetect {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
const double kFpMin = std::numeric_limits<double>::min() / kEps;
constexpr double kLn10 = 2.302585092994046;
constexpr int kMaxGammaIter = 1000000;
constexpr int kMaxBetaIter = 20000;

/// ln P(a,x) through the series P = sum * exp(-x + a ln x - lnG(a)).
/// Valid for x < a+1 where the series converges quickly.
double gamma_series_log(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int i = 0; i < kMaxGammaIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return std::log(sum) - x + a * std::log(x) - std::lgamma(a);
}

/// ln Q(a,x) through the Lentz continued fraction, for x >= a+1.
double gamma_cf_log(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxGammaIter; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) break;
  }
  return std::log(h) - x + a * std::log(x) - std::lgamma(a);
}

/// Lentz evaluation of the incomplete-beta continued fraction.
double beta_cf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxBetaIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) break;
  }
  return h;
}

/// ln I_x(a,b) in the direct regime x < (a+1)/(a+b+2).
double log_ibeta_direct(double a, double b, double x) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
         b * std::log1p(-x) - std::log(a) + std::log(beta_cf(a, b, x));
}

double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_ibeta_direct(a, b, x));
  return -std::expm1(log_ibeta_direct(b, a, 1.0 - x));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a) || !std::isfinite(x))
    throw std::invalid_argument("regularized_gamma_p: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return std::exp(gamma_series_log(a, x));
  return -std::expm1(gamma_cf_log(a, x));
}

double log_regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a) || !std::isfinite(x))
    throw std::invalid_argument("log_regularized_gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return std::log1p(-std::exp(gamma_series_log(a, x)));
  return gamma_cf_log(a, x);
}

double chi2_cdf(double x, double df) {
  if (!(x >= 0.0)) throw std::invalid_argument("chi2_cdf: x must be >= 0");
  if (!(df > 0.0)) throw std::invalid_argument("chi2_cdf: df must be > 0");
  return regularized_gamma_p(0.5 * df, 0.5 * x);
}

double chi2_sf_log10(double x, double df) {
  if (!(x >= 0.0)) throw std::invalid_argument("chi2_sf_log10: x must be >= 0");
  if (!(df > 0.0)) throw std::invalid_argument("chi2_sf_log10: df must be > 0");
  return log_regularized_gamma_q(0.5 * df, 0.5 * x) / kLn10;
}

double chi2_quantile(double p, double df) {
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("chi2_quantile: p must be in (0,1)");
  if (!(df > 0.0)) throw std::invalid_argument("chi2_quantile: df must be > 0");
  double lo = 0.0;
  double hi = df + 10.0 * std::sqrt(2.0 * df) + 10.0;
  while (chi2_cdf(hi, df) < p) {
    hi *= 2.0;
    if (hi > 1e300) throw std::runtime_error("chi2_quantile: bracket expansion failed");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (chi2_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double binomial_tail(double n, double k, double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("binomial_tail: p must be in (0,1)");
  if (!(n >= 0.0)) throw std::invalid_argument("binomial_tail: n must be >= 0");
  if (k > n) throw std::invalid_argument("binomial_tail: k must be <= n");
  if (k <= 0.0) return 1.0;
  return ibeta(k, n - k + 1.0, p);
}

double binomial_tail_log10(double n, double k, double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("binomial_tail: p must be in (0,1)");
  if (!(n >= 0.0)) throw std::invalid_argument("binomial_tail: n must be >= 0");
  if (k > n) throw std::invalid_argument("binomial_tail: k must be <= n");
  if (k <= 0.0) return 0.0;
  const double a = k;
  const double b = n - k + 1.0;
  if (p < (a + 1.0) / (a + b + 2.0)) return log_ibeta_direct(a, b, p) / kLn10;
  // Large-tail regime: the complement is well away from 1, no cancellation.
  return std::log1p(-std::exp(log_ibeta_direct(b, a, 1.0 - p))) / kLn10;
}

NormalityModel fit_normality(const FeatureStack& stack) {
  if (stack.count < 1 || stack.width < 1 || stack.height < 1)
    throw std::invalid_argument("fit_normality: empty stack");
  const std::size_t n = static_cast<std::size_t>(stack.width) * stack.height;
  NormalityModel model;
  model.means.resize(stack.count);
  model.variances.resize(stack.count);
  model.degrees_of_freedom = stack.count;
  double var_total = 0.0;
  for (int i = 0; i < stack.count; ++i) {
    const double* v = stack.plane_data(i);
    double sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) sum += v[p];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double d = v[p] - mean;
      ss += d * d;
    }
    model.means[i] = mean;
    model.variances[i] = ss / static_cast<double>(n);
    var_total += model.variances[i];
  }
  const double floor = std::max(1e-12, 1e-9 * var_total / stack.count);
  for (double& var : model.variances) var = std::max(var, floor);
  return model;
}

DistanceMap mahalanobis_map(const FeatureStack& stack, const NormalityModel& model) {
  if (stack.count != model.count())
    throw std::invalid_argument("mahalanobis_map: stack/model dimension mismatch");
  DistanceMap dist;
  dist.d2 = GridD(stack.width, stack.height, 0.0);
  dist.degrees_of_freedom = model.degrees_of_freedom;
  dist.independence_len = stack.independence_len;
  const std::size_t n = dist.d2.size();
  for (int i = 0; i < stack.count; ++i) {
    const double* v = stack.plane_data(i);
    const double mu = model.means[i];
    const double inv_var = 1.0 / model.variances[i];
    double* out = dist.d2.v.data();
    for (std::size_t p = 0; p < n; ++p) {
      const double d = v[p] - mu;
      out[p] += d * d * inv_var;
    }
  }
  return dist;
}

std::vector<DistanceMap> component_distance_maps(const FeatureStack& stack,
                                                 const NormalityModel& model) {
  if (stack.count != model.count())
    throw std::invalid_argument("component_distance_maps: stack/model dimension mismatch");
  std::vector<DistanceMap> maps(stack.count);
  const std::size_t n = static_cast<std::size_t>(stack.width) * stack.height;
  for (int i = 0; i < stack.count; ++i) {
    DistanceMap& dist = maps[i];
    dist.d2 = GridD(stack.width, stack.height, 0.0);
    dist.degrees_of_freedom = 1.0;
    dist.independence_len = stack.independence_len;
    const double* v = stack.plane_data(i);
    const double mu = model.means[i];
    const double inv_var = 1.0 / model.variances[i];
    for (std::size_t p = 0; p < n; ++p) {
      const double d = v[p] - mu;
      dist.d2.v[p] = d * d * inv_var;
    }
  }
  return maps;
}

}  // namespace nfadetect
