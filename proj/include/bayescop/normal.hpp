#pragma once

// Standard normal primitives. Every copula routine evaluates Phi and its
// inverse through normal_cdf / normal_quantile so the whole library shares
// a single numerical convention.

#include "bayescop/rng.hpp"

namespace bayescop {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_cdf(double x);
// Upper tail 1 - Phi(x), accurate for large x.
double normal_sf(double x);
double normal_log_pdf(double x);

// Inverse of normal_cdf. Returns -inf at 0 and +inf at 1; throws DomainError
// outside [0,1] or for NaN.
double normal_quantile(double p);

// log(Phi(b) - Phi(a)) for a <= b, stable in both tails.
double log_normal_interval_prob(double a, double b);

// Phi_2(x, y; rho): bivariate standard normal CDF with correlation rho.
double bivariate_normal_cdf(double x, double y, double rho);

// Draw from N(mean, sd^2) truncated to [lower, upper). Inverse-CDF in the
// body, exponential rejection once the interval lies beyond six standard
// deviations.
double sample_truncated_normal(double mean, double sd, double lower, double upper, Rng& rng);

}  // namespace bayescop
