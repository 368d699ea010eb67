#include "bayescop/pair_copula.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "bayescop/error.hpp"
#include "bayescop/margins.hpp"
#include "bayescop/normal.hpp"

namespace bayescop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(u1^-phi + u2^-phi - 1) for Clayton; NaN when the argument is <= 0.
double clayton_log_base(double log_u1, double log_u2, double phi) {
  const double s = std::expm1(-phi * log_u1) + std::expm1(-phi * log_u2);
  if (s <= -1.0) return std::numeric_limits<double>::quiet_NaN();
  return std::log1p(s);
}

// log(t1^phi + t2^phi) for Gumbel with t = -log(u) >= 0.
double gumbel_log_a(double t1, double t2, double phi) {
  const double hi = std::max(t1, t2);
  const double lo = std::min(t1, t2);
  if (hi == 0.0) return -kInf;
  return phi * std::log(hi) + std::log1p(std::pow(lo / hi, phi));
}

}  // namespace

std::string_view to_string(PairFamily family) {
  switch (family) {
    case PairFamily::Independence: return "independence";
    case PairFamily::Gaussian: return "gaussian";
    case PairFamily::Frank: return "frank";
    case PairFamily::Clayton: return "clayton";
    case PairFamily::Gumbel: return "gumbel";
  }
  return "unknown";
}

PairFamily pair_family_from_string(std::string_view name) {
  for (auto f : {PairFamily::Independence, PairFamily::Gaussian, PairFamily::Frank, PairFamily::Clayton,
                 PairFamily::Gumbel}) {
    if (to_string(f) == name) return f;
  }
  throw DomainError("unknown pair-copula family '" + std::string(name) + "'");
}

double independence_parameter(PairFamily family) { return family == PairFamily::Gumbel ? 1.0 : 0.0; }

PairCopula::PairCopula(PairFamily family, double phi) : family_(family), phi_(phi) {
  const std::string name(to_string(family));
  if (family == PairFamily::Independence) {
    phi_ = 0.0;
    return;
  }
  if (!std::isfinite(phi)) throw DomainError(name + ": parameter phi must be finite");
  switch (family) {
    case PairFamily::Gaussian:
      if (!(phi > -1.0 && phi < 1.0)) throw DomainError(name + ": phi must lie in (-1,1)");
      break;
    case PairFamily::Frank:
      if (phi == 0.0) throw DomainError(name + ": phi must be non-zero");
      break;
    case PairFamily::Clayton:
      if (!(phi > -1.0) || phi == 0.0) throw DomainError(name + ": phi must lie in (-1,inf) \\ {0}");
      break;
    case PairFamily::Gumbel:
      if (!(phi >= 1.0)) throw DomainError(name + ": phi must be >= 1");
      break;
    default: break;
  }
}

double PairCopula::cdf(double u1, double u2) const {
  if (!(u1 >= 0.0 && u1 <= 1.0 && u2 >= 0.0 && u2 <= 1.0)) {
    throw DomainError("pair cdf: arguments must lie in [0,1]");
  }
  if (u1 == 0.0 || u2 == 0.0) return 0.0;
  if (u1 == 1.0) return u2;
  if (u2 == 1.0) return u1;
  switch (family_) {
    case PairFamily::Independence: return u1 * u2;
    case PairFamily::Gaussian:
      return bivariate_normal_cdf(normal_quantile(u1), normal_quantile(u2), phi_);
    case PairFamily::Frank: {
      const double num = std::expm1(-phi_ * u1) * std::expm1(-phi_ * u2);
      return -std::log1p(num / std::expm1(-phi_)) / phi_;
    }
    case PairFamily::Clayton: {
      const double lb = clayton_log_base(std::log(u1), std::log(u2), phi_);
      if (std::isnan(lb)) return 0.0;
      return std::exp(-lb / phi_);
    }
    case PairFamily::Gumbel: {
      const double la = gumbel_log_a(-std::log(u1), -std::log(u2), phi_);
      return std::exp(-std::exp(la / phi_));
    }
  }
  return 0.0;
}

double PairCopula::log_density(double u1, double u2) const {
  if (family_ == PairFamily::Independence) return 0.0;
  u1 = clamp_probability(u1);
  u2 = clamp_probability(u2);
  switch (family_) {
    case PairFamily::Gaussian: {
      const double x1 = normal_quantile(u1);
      const double x2 = normal_quantile(u2);
      const double r2 = phi_ * phi_;
      const double one_minus = (1.0 - phi_) * (1.0 + phi_);
      return -0.5 * std::log(one_minus) - (r2 * (x1 * x1 + x2 * x2) - 2.0 * phi_ * x1 * x2) / (2.0 * one_minus);
    }
    case PairFamily::Frank: {
      const double a = std::expm1(-phi_);
      const double a1 = std::expm1(-phi_ * u1);
      const double a2 = std::expm1(-phi_ * u2);
      const double d = -a - a1 * a2;
      return std::log(phi_ * -a) - phi_ * (u1 + u2) - 2.0 * std::log(std::abs(d));
    }
    case PairFamily::Clayton: {
      const double l1 = std::log(u1);
      const double l2 = std::log(u2);
      const double lb = clayton_log_base(l1, l2, phi_);
      if (std::isnan(lb)) return -kInf;
      return std::log1p(phi_) - (1.0 + phi_) * (l1 + l2) - (1.0 / phi_ + 2.0) * lb;
    }
    case PairFamily::Gumbel: {
      const double t1 = -std::log(u1);
      const double t2 = -std::log(u2);
      const double la = gumbel_log_a(t1, t2, phi_);
      const double a_root = std::exp(la / phi_);  // A^{1/phi}
      return -a_root + t1 + t2 + (-2.0 + 2.0 / phi_) * la + (phi_ - 1.0) * (std::log(t1) + std::log(t2)) +
             std::log1p((phi_ - 1.0) / a_root);
    }
    default: return 0.0;
  }
}

double PairCopula::h(double u1, double u2) const {
  if (!(u1 >= 0.0 && u1 <= 1.0)) throw DomainError("h-function: u1 must lie in [0,1]");
  if (u1 == 0.0) return 0.0;
  if (u1 == 1.0) return 1.0;
  if (family_ == PairFamily::Independence) return u1;
  u2 = clamp_probability(u2);
  switch (family_) {
    case PairFamily::Gaussian: {
      const double x1 = normal_quantile(clamp_probability(u1));
      const double x2 = normal_quantile(u2);
      return normal_cdf((x1 - phi_ * x2) / std::sqrt((1.0 - phi_) * (1.0 + phi_)));
    }
    case PairFamily::Frank: {
      const double a = std::expm1(-phi_);
      const double a1 = std::expm1(-phi_ * u1);
      const double a2 = std::expm1(-phi_ * u2);
      return std::clamp(std::exp(-phi_ * u2) * a1 / (a + a1 * a2), 0.0, 1.0);
    }
    case PairFamily::Clayton: {
      const double l2 = std::log(u2);
      const double lb = clayton_log_base(std::log(u1), l2, phi_);
      if (std::isnan(lb)) return 0.0;
      return std::min(1.0, std::exp(-(1.0 + phi_) * l2 - (1.0 / phi_ + 1.0) * lb));
    }
    case PairFamily::Gumbel: {
      const double t1 = -std::log(u1);
      const double t2 = -std::log(u2);
      const double la = gumbel_log_a(t1, t2, phi_);
      const double a_root = std::exp(la / phi_);
      return std::min(1.0, std::exp(-a_root + la * (1.0 / phi_ - 1.0) + (phi_ - 1.0) * std::log(t2) + t2));
    }
    default: return u1;
  }
}

double PairCopula::h_inverse(double q, double u2) const {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("h_inverse: q must lie in [0,1]");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return 1.0;
  if (family_ == PairFamily::Independence) return q;
  u2 = clamp_probability(u2);
  double guess = q;
  switch (family_) {
    case PairFamily::Gaussian: {
      const double x2 = normal_quantile(u2);
      guess = normal_cdf(normal_quantile(q) * std::sqrt((1.0 - phi_) * (1.0 + phi_)) + phi_ * x2);
      break;
    }
    case PairFamily::Frank: {
      const double a = std::expm1(-phi_);
      const double a2 = std::expm1(-phi_ * u2);
      const double a1 = q * a / (std::exp(-phi_ * u2) - q * a2);
      guess = -std::log1p(a1) / phi_;
      break;
    }
    case PairFamily::Clayton: {
      const double l2 = std::log(u2);
      const double base = std::exp(-phi_ / (1.0 + phi_) * (std::log(q) + (1.0 + phi_) * l2));
      const double pow_u1 = base - std::expm1(-phi_ * l2);
      guess = pow_u1 > 0.0 ? std::exp(-std::log(pow_u1) / phi_) : q;
      break;
    }
    default: break;
  }
  if (std::isfinite(guess) && guess > 0.0 && guess < 1.0 && std::abs(h(guess, u2) - q) < 1e-12) {
    return guess;
  }
  return solve_h_inverse(q, u2, std::isfinite(guess) ? std::clamp(guess, 0.0, 1.0) : q);
}

// Safeguarded Newton on [0,1] using the density as dh/du1; bisection whenever
// the Newton step leaves the bracket.
double PairCopula::solve_h_inverse(double q, double u2, double guess) const {
  double lo = 0.0;
  double hi = 1.0;
  double x = (guess > 0.0 && guess < 1.0) ? guess : 0.5;
  for (int iter = 0; iter < 300; ++iter) {
    const double f = h(x, u2) - q;
    if (std::abs(f) < 1e-13) return x;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo < 1e-17) break;
    const double slope = std::exp(log_density(x, u2));
    double next = x - f / slope;
    if (!(std::isfinite(next) && next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;
}

DependenceMeasures PairCopula::dependence() const {
  DependenceMeasures d;
  d.tau = kendall_tau(family_, phi_);
  switch (family_) {
    case PairFamily::Clayton: d.lambda_low = phi_ > 0.0 ? std::pow(2.0, -1.0 / phi_) : 0.0; break;
    case PairFamily::Gumbel: d.lambda_up = 2.0 - std::pow(2.0, 1.0 / phi_); break;
    default: break;
  }
  return d;
}

std::pair<double, double> PairCopula::sample(Rng& rng) const {
  const double u2 = uniform_open(rng);
  const double q = uniform_open(rng);
  return {h_inverse(q, u2), u2};
}

double debye1(double x) {
  if (x == 0.0) return 1.0;
  const auto integrand = [](double t) {
    if (std::abs(t) < 1e-3) {
      const double t2 = t * t;
      return 1.0 - t / 2.0 + t2 / 12.0 - t2 * t2 / 720.0;
    }
    return t / std::expm1(t);
  };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 21>::integrate(integrand, 0.0, x, 15, 1e-14);
  return integral / x;
}

std::optional<double> kendall_tau(PairFamily family, double phi) {
  switch (family) {
    case PairFamily::Independence: return 0.0;
    case PairFamily::Gaussian: return std::nullopt;
    case PairFamily::Frank: return 1.0 + 4.0 * (debye1(phi) - 1.0) / phi;
    case PairFamily::Clayton: return phi / (phi + 2.0);
    case PairFamily::Gumbel: return 1.0 - 1.0 / phi;
  }
  return std::nullopt;
}

}  // namespace bayescop
