#pragma once

#include <vector>

#include "nfadetect/features.hpp"
#include "nfadetect/grid.hpp"

namespace nfadetect {

// ---------------------------------------------------------------------------
// Special-function kernel. Series / continued-fraction evaluation of the
// regularized incomplete gamma and beta functions, with log-space variants
// so tail probabilities far below DBL_MIN stay usable.
// ---------------------------------------------------------------------------

/// Regularized lower incomplete gamma P(a,x).
double regularized_gamma_p(double a, double x);

/// ln Q(a,x) with Q = 1 - P; finite for arbitrarily deep tails.
double log_regularized_gamma_q(double a, double x);

/// Chi-square CDF with real df > 0: P(df/2, x/2).
double chi2_cdf(double x, double df);

/// log10 of the chi-square upper tail 1 - CDF.
double chi2_sf_log10(double x, double df);

/// Inverse of chi2_cdf in p, bracketed root-finding; |cdf(result)-p| <= 1e-10.
double chi2_quantile(double p, double df);

/// P[X >= k] for X ~ Binomial(n, p), generalized to real n, k through the
/// regularized incomplete beta function I_p(k, n-k+1). Returns 1 for k <= 0.
double binomial_tail(double n, double k, double p);
double binomial_tail_log10(double n, double k, double p);

// ---------------------------------------------------------------------------
// Normality model and distance maps.
// ---------------------------------------------------------------------------

/// Per-feature mean/variance of the reference statistics plus the model's
/// degrees of freedom (m for joint maps, 1 for per-component maps).
struct NormalityModel {
  std::vector<double> means;
  std::vector<double> variances;  // floored at max(1e-12, 1e-9 * mean plane variance)
  int degrees_of_freedom = 0;

  int count() const { return static_cast<int>(means.size()); }
};

/// Squared Mahalanobis distances with the degrees of freedom they were
/// accumulated over and the spatial independence length inherited from the
/// feature stack.
struct DistanceMap {
  GridD d2;
  double degrees_of_freedom = 0.0;
  double independence_len = 1.0;
};

/// Per-plane mean and variance over all pixels; degrees_of_freedom = m.
NormalityModel fit_normality(const FeatureStack& stack);

/// d²(x) = sum_i (y_i(x) - mu_i)² / sigma_i²; df = m.
DistanceMap mahalanobis_map(const FeatureStack& stack, const NormalityModel& model);

/// One single-component map per feature plane (df = 1 each), for the
/// per-component region statistic.
std::vector<DistanceMap> component_distance_maps(const FeatureStack& stack,
                                                 const NormalityModel& model);

}  // namespace nfadetect
