#include "bayescop/normal.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "bayescop/error.hpp"

namespace bayescop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kSqrt2Pi = 2.50662827463100050242;
constexpr double kTwoPi = 6.28318530717958647692;

// log Phi(x), including the far lower tail where Phi underflows.
double log_normal_cdf(double x) {
  if (x > 5.0) return std::log1p(-normal_sf(x));
  if (x > -35.0) return std::log(normal_cdf(x));
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - kLogSqrt2Pi + std::log(series);
}

// Rational approximation for the normal quantile (Acklam), relative error ~1e-9
// before refinement.
double quantile_initial(double p) {
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// Gauss-Legendre abscissae/weights (half sets) used by the bivariate normal CDF.
constexpr std::array<std::array<double, 10>, 3> kGlW{{
    {0.1713244923791705, 0.3607615730481384, 0.4679139345726904},
    {0.04717533638651177, 0.1069393259953183, 0.1600783285433464, 0.2031674267230659,
     0.2334925365383547, 0.2491470458134029},
    {0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
     0.1019301198172404, 0.1181945319615184, 0.1316886384491766, 0.1420961093183821,
     0.1491729864726037, 0.1527533871307259},
}};
constexpr std::array<std::array<double, 10>, 3> kGlX{{
    {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970},
    {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050, -0.5873179542866171,
     -0.3678314989981802, -0.1252334085114692},
    {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259, -0.8391169718222188,
     -0.7463319064601508, -0.6360536807265150, -0.5108670019508271, -0.3737060887154196,
     -0.2277858511416451, -0.07652652113349733},
}};

// P(X > h, Y > k) for standard bivariate normal with correlation r (Genz 2004).
double bivariate_upper(double h, double k, double r) {
  int ng = 0;
  int lg = 0;
  if (std::abs(r) < 0.3) {
    ng = 0;
    lg = 3;
  } else if (std::abs(r) < 0.75) {
    ng = 1;
    lg = 6;
  } else {
    ng = 2;
    lg = 10;
  }
  const auto& w = kGlW[ng];
  const auto& x = kGlX[ng];
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (int i = 0; i < lg; ++i) {
      double sn = std::sin(asr * (x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * kTwoPi) + normal_cdf(-h) * normal_cdf(-k);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * kSqrt2Pi * normal_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (int i = 0; i < lg; ++i) {
      double xs = (a * (x[i] + 1.0)) * (a * (x[i] + 1.0));
      double rs = std::sqrt(1.0 - xs);
      bvn += a * w[i] *
             (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
              std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
      xs = as * (-x[i] + 1.0) * (-x[i] + 1.0) / 4.0;
      rs = std::sqrt(1.0 - xs);
      bvn += a * w[i] * std::exp(-(bs / xs + hk) / 2.0) *
             (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0.0) return bvn + normal_cdf(-std::max(h, k));
  bvn = -bvn;
  if (k > h) {
    if (h < 0.0) {
      bvn += normal_cdf(k) - normal_cdf(h);
    } else {
      bvn += normal_cdf(-h) - normal_cdf(-k);
    }
  }
  return bvn;
}

// Robert (1995) exponential rejection for N(0,1) truncated to [a, b), a > 0.
double sample_tail(double a, double b, Rng& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  std::exponential_distribution<double> expo(lambda);
  for (;;) {
    const double z = a + expo(rng);
    if (z >= b) continue;
    const double diff = z - lambda;
    if (std::log(uniform_open(rng)) <= -0.5 * diff * diff) return z;
  }
}

// N(0,1) truncated to [lo, hi) with hi <= 0 or lo < 0 < hi; inverse-CDF in
// the lower tail keeps full relative precision.
double sample_standard_lower(double lo, double hi, Rng& rng) {
  const double plo = normal_cdf(lo);
  const double phi = normal_cdf(hi);
  const double u = plo + uniform01(rng) * (phi - plo);
  return normal_quantile(u);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double normal_quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) {
    throw DomainError("normal_quantile: probability outside [0,1]");
  }
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;
  double x = quantile_initial(p);
  // One Halley refinement against the erfc-based CDF.
  double e = 0.0;
  if (x < 0.0) {
    e = normal_cdf(x) - p;
  } else {
    e = (1.0 - p) - normal_sf(x);
  }
  const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double log_normal_interval_prob(double a, double b) {
  if (!(a < b)) return -kInf;
  if (b <= 0.0) {
    const double lb = log_normal_cdf(b);
    if (a == -kInf) return lb;
    const double la = log_normal_cdf(a);
    return lb + std::log1p(-std::exp(la - lb));
  }
  if (a >= 0.0) return log_normal_interval_prob(-b, -a);
  // Interval straddles zero: 1 - Phi(a) - Q(b).
  return std::log1p(-(normal_cdf(a) + normal_sf(b)));
}

double bivariate_normal_cdf(double x, double y, double rho) {
  if (x == -kInf || y == -kInf) return 0.0;
  if (x == kInf) return normal_cdf(y);
  if (y == kInf) return normal_cdf(x);
  return bivariate_upper(-x, -y, rho);
}

double sample_truncated_normal(double mean, double sd, double lower, double upper, Rng& rng) {
  if (!(lower < upper) || !(sd > 0.0)) {
    throw SamplerInvariantError("sample_truncated_normal: empty truncation interval");
  }
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  double z = 0.0;
  if (a > 0.0) {
    // Reflect into the lower tail.
    z = (a > 6.0) ? sample_tail(a, b, rng) : -sample_standard_lower(-b, -a, rng);
  } else if (b < -6.0) {
    z = -sample_tail(-b, -a, rng);
  } else {
    z = sample_standard_lower(a, b, rng);
  }
  double x = mean + sd * z;
  // Rounding can push the draw onto an endpoint; keep it inside [lower, upper).
  if (x < lower) x = lower;
  if (x >= upper) x = std::nextafter(upper, -kInf);
  return x;
}

}  // namespace bayescop
