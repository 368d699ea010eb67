#pragma once

// Independent reference computations shared by the tests. Nothing here calls
// into the library except where noted.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

inline double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Composite Simpson on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
// three-term recurrence.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

// Tensor-product Gauss-Legendre rule on [a1,b1] x [a2,b2].
inline double integrate_2d(const std::function<double(double, double)>& f, double a1, double b1, double a2,
                           double b2, int n = 64) {
  const auto [x, w] = gauss_legendre(n);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = 0.5 * (b1 - a1) * x[i] + 0.5 * (b1 + a1);
    for (int j = 0; j < n; ++j) {
      const double v = 0.5 * (b2 - a2) * x[j] + 0.5 * (b2 + a2);
      s += w[i] * w[j] * f(u, v);
    }
  }
  return s * 0.25 * (b1 - a1) * (b2 - a2);
}

// Integral over the unit square on a mesh graded toward all four edges, for
// copula densities with corner singularities.
inline double integrate_unit_square(const std::function<double(double, double)>& f, int nodes = 16) {
  const std::vector<double> breaks = {0.0,  1e-10, 1e-8, 1e-6, 1e-5, 1e-4, 1e-3, 0.01, 0.05, 0.15, 0.3, 0.5,
                                      0.7,  0.85,  0.95, 0.99, 0.999, 1 - 1e-4, 1 - 1e-5, 1 - 1e-6, 1 - 1e-8,
                                      1 - 1e-10, 1.0};
  const auto [x, w] = gauss_legendre(nodes);
  std::vector<double> pts, wts;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], b = breaks[k + 1];
    for (int i = 0; i < nodes; ++i) {
      pts.push_back(0.5 * (b - a) * x[i] + 0.5 * (a + b));
      wts.push_back(0.5 * (b - a) * w[i]);
    }
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) s += wts[i] * wts[j] * f(pts[i], pts[j]);
  return s;
}

// Integral over {(u, v) : v > lower(u)} of the unit square, for densities
// with an integrable singularity along the boundary curve. The inner variable
// is v = lower + (1 - lower) t^8, which flattens power singularities there.
inline double integrate_above_curve(const std::function<double(double, double)>& f,
                                    const std::function<double(double)>& lower, int nodes = 32) {
  const auto [x, w] = gauss_legendre(nodes);
  const std::vector<double> breaks = {0.0, 1e-4, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1 - 1e-4, 1.0};
  auto panels = [&](const std::function<double(double)>& g) {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      const double a = breaks[k], b = breaks[k + 1];
      for (int i = 0; i < nodes; ++i) s += 0.5 * (b - a) * w[i] * g(0.5 * (b - a) * x[i] + 0.5 * (a + b));
    }
    return s;
  };
  return panels([&](double u) {
    const double v0 = lower(u);
    return panels([&](double t) {
      const double t7 = std::pow(t, 7);
      return f(u, v0 + (1 - v0) * t7 * t) * 8 * (1 - v0) * t7;
    });
  });
}

// Kendall's tau-a; discordant pairs counted as inversions by merge sort.
inline double kendall_tau(std::vector<std::pair<double, double>> xy) {
  std::sort(xy.begin(), xy.end());
  std::vector<double> y(xy.size());
  for (std::size_t i = 0; i < xy.size(); ++i) y[i] = xy[i].second;
  std::vector<double> buf(y.size());
  long long swaps = 0;
  std::function<void(std::size_t, std::size_t)> sort = [&](std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return;
    const std::size_t mid = (lo + hi) / 2;
    sort(lo, mid);
    sort(mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
      if (y[j] < y[i]) {
        swaps += static_cast<long long>(mid - i);
        buf[k++] = y[j++];
      } else {
        buf[k++] = y[i++];
      }
    }
    while (i < mid) buf[k++] = y[i++];
    while (j < hi) buf[k++] = y[j++];
    std::copy(buf.begin() + lo, buf.begin() + hi, y.begin() + lo);
  };
  sort(0, y.size());
  const double n = static_cast<double>(xy.size());
  const double pairs = n * (n - 1.0) / 2.0;
  return (pairs - 2.0 * swaps) / pairs;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i + 1);
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

// One-sample Kolmogorov-Smirnov statistic against the uniform distribution.
inline double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, std::abs((i + 1) / n - u[i]));
    d = std::max(d, std::abs(u[i] - i / n));
  }
  return d;
}

// Two-sample Kolmogorov-Smirnov distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace oracle
