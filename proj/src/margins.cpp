#include "bayescop/margins.hpp"

#include <algorithm>
#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "bayescop/error.hpp"
#include "bayescop/normal.hpp"

namespace bayescop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogPi = 1.14472988584940017414;

using UpPolicy = boost::math::policies::policy<
    boost::math::policies::discrete_quantile<boost::math::policies::integer_round_up>,
    boost::math::policies::promote_double<false>>;
// Double-precision internals; the default long double promotion is several
// times slower in the incomplete beta function.
using FastPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

bool is_integer(double y) { return std::isfinite(y) && std::floor(y) == y; }

double logit(double p) { return std::log(p) - std::log1p(-p); }
double inv_logit(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double normal_log_prior(double x, double var) {
  return -0.5 * x * x / var - 0.5 * std::log(2.0 * M_PI * var);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return v.size() > 1 ? s / static_cast<double>(v.size() - 1) : 0.0;
}

}  // namespace

double clamp_probability(double u) { return std::clamp(u, kProbClamp, 1.0 - kProbClamp); }

std::string_view to_string(MarginFamily family) {
  switch (family) {
    case MarginFamily::Normal: return "normal";
    case MarginFamily::StudentT: return "studentt";
    case MarginFamily::NegativeBinomial: return "negativebinomial";
    case MarginFamily::Bernoulli: return "bernoulli";
    case MarginFamily::Poisson: return "poisson";
    case MarginFamily::Empirical: return "empirical";
  }
  return "unknown";
}

MarginFamily margin_family_from_string(std::string_view name) {
  for (auto f : {MarginFamily::Normal, MarginFamily::StudentT, MarginFamily::NegativeBinomial,
                 MarginFamily::Bernoulli, MarginFamily::Poisson, MarginFamily::Empirical}) {
    if (to_string(f) == name) return f;
  }
  throw DomainError("unknown margin family '" + std::string(name) + "'");
}

Margin::Margin(MarginFamily family, std::vector<double> params)
    : Margin(family, std::move(params), {}) {}

Margin::Margin(MarginFamily family, std::vector<double> params, std::vector<double> sample)
    : family_(family), params_(std::move(params)), sample_(std::move(sample)) {
  validate();
}

Margin Margin::normal(double mu, double sigma) { return Margin(MarginFamily::Normal, {mu, sigma}); }
Margin Margin::student_t(double mu, double sigma, double nu) {
  return Margin(MarginFamily::StudentT, {mu, sigma, nu});
}
Margin Margin::negative_binomial(double r, double p) {
  return Margin(MarginFamily::NegativeBinomial, {r, p});
}
Margin Margin::bernoulli(double p) { return Margin(MarginFamily::Bernoulli, {p}); }
Margin Margin::poisson(double rate) { return Margin(MarginFamily::Poisson, {rate}); }
Margin Margin::empirical(std::vector<double> sample) {
  std::sort(sample.begin(), sample.end());
  return Margin(MarginFamily::Empirical, {}, std::move(sample));
}

void Margin::validate() const {
  const std::string fam(to_string(family_));
  const auto need = [&](std::size_t n) {
    if (params_.size() != n) {
      throw DomainError(fam + ": expected " + std::to_string(n) + " parameters, got " +
                        std::to_string(params_.size()));
    }
    for (double p : params_) {
      if (!std::isfinite(p)) throw DomainError(fam + ": non-finite parameter");
    }
  };
  const auto positive = [&](double v, const char* name) {
    if (!(v > 0.0)) throw DomainError(fam + ": parameter " + name + " must be > 0");
  };
  const auto open_unit = [&](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) throw DomainError(fam + ": parameter " + name + " must lie in (0,1)");
  };
  switch (family_) {
    case MarginFamily::Normal:
      need(2);
      positive(params_[1], "sigma");
      break;
    case MarginFamily::StudentT:
      need(3);
      positive(params_[1], "sigma");
      positive(params_[2], "nu");
      break;
    case MarginFamily::NegativeBinomial:
      need(2);
      positive(params_[0], "r");
      open_unit(params_[1], "p");
      break;
    case MarginFamily::Bernoulli:
      need(1);
      open_unit(params_[0], "p");
      break;
    case MarginFamily::Poisson:
      need(1);
      positive(params_[0], "rate");
      break;
    case MarginFamily::Empirical:
      if (!params_.empty()) throw DomainError("empirical: takes no parameters");
      if (sample_.empty()) throw DomainError("empirical: sample must be non-empty");
      break;
  }
}

std::vector<std::string> Margin::param_names() const { return margin_param_names(family_); }

std::vector<std::string> margin_param_names(MarginFamily family) {
  switch (family) {
    case MarginFamily::Normal: return {"mu", "sigma"};
    case MarginFamily::StudentT: return {"mu", "sigma", "nu"};
    case MarginFamily::NegativeBinomial: return {"r", "p"};
    case MarginFamily::Bernoulli: return {"p"};
    case MarginFamily::Poisson: return {"rate"};
    case MarginFamily::Empirical: return {};
  }
  return {};
}

bool Margin::is_discrete() const noexcept {
  return family_ == MarginFamily::NegativeBinomial || family_ == MarginFamily::Bernoulli ||
         family_ == MarginFamily::Poisson;
}

double Margin::discrete_cdf(long long k) const {
  if (k < 0) return 0.0;
  switch (family_) {
    case MarginFamily::Bernoulli: return k >= 1 ? 1.0 : 1.0 - params_[0];
    case MarginFamily::Poisson:
      return boost::math::cdf(boost::math::poisson_distribution<double, FastPolicy>(params_[0]), static_cast<double>(k));
    case MarginFamily::NegativeBinomial:
      return boost::math::cdf(boost::math::negative_binomial_distribution<double, FastPolicy>(params_[0], params_[1]),
                              static_cast<double>(k));
    default: return 0.0;
  }
}

double Margin::discrete_log_pmf(long long k) const {
  if (k < 0) return -kInf;
  const double kd = static_cast<double>(k);
  switch (family_) {
    case MarginFamily::Bernoulli:
      if (k > 1) return -kInf;
      return k == 1 ? std::log(params_[0]) : std::log1p(-params_[0]);
    case MarginFamily::Poisson:
      return kd * std::log(params_[0]) - params_[0] - std::lgamma(kd + 1.0);
    case MarginFamily::NegativeBinomial: {
      const double r = params_[0];
      const double p = params_[1];
      return std::lgamma(r + kd) - std::lgamma(kd + 1.0) - std::lgamma(r) + r * std::log(p) +
             kd * std::log1p(-p);
    }
    default: return -kInf;
  }
}

double Margin::cdf(double y) const {
  if (std::isnan(y)) throw DomainError(std::string(to_string(family_)) + ": NaN argument");
  switch (family_) {
    case MarginFamily::Normal: return normal_cdf((y - params_[0]) / params_[1]);
    case MarginFamily::StudentT:
      if (std::isinf(y)) return y > 0 ? 1.0 : 0.0;
      return boost::math::cdf(boost::math::students_t_distribution<double, FastPolicy>(params_[2]),
                              (y - params_[0]) / params_[1]);
    case MarginFamily::Empirical: {
      const auto count = std::upper_bound(sample_.begin(), sample_.end(), y) - sample_.begin();
      // Half a step below the sample minimum keeps F inside (0,1).
      return (count == 0 ? 0.5 : static_cast<double>(count)) / static_cast<double>(sample_.size() + 1);
    }
    default:
      if (y == kInf) return 1.0;
      if (y == -kInf) return 0.0;
      return discrete_cdf(static_cast<long long>(std::floor(y)));
  }
}

double Margin::cdf_left_limit(double y) const {
  if (!is_discrete()) return cdf(y);
  if (is_integer(y)) return cdf(y - 1.0);
  return cdf(y);
}

double Margin::log_density(double y) const {
  if (std::isnan(y)) throw DomainError(std::string(to_string(family_)) + ": NaN argument");
  switch (family_) {
    case MarginFamily::Normal: {
      const double z = (y - params_[0]) / params_[1];
      return normal_log_pdf(z) - std::log(params_[1]);
    }
    case MarginFamily::StudentT: {
      const double sigma = params_[1];
      const double nu = params_[2];
      const double z = (y - params_[0]) / sigma;
      return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * (std::log(nu) + kLogPi) -
             std::log(sigma) - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
    }
    case MarginFamily::Empirical: {
      const auto [lo, hi] = std::equal_range(sample_.begin(), sample_.end(), y);
      if (lo == hi) return -kInf;
      return std::log(static_cast<double>(hi - lo) / static_cast<double>(sample_.size()));
    }
    default:
      if (!is_integer(y)) return -kInf;
      return discrete_log_pmf(static_cast<long long>(y));
  }
}

double Margin::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError(std::string(to_string(family_)) + ": quantile probability must lie in (0,1)");
  }
  switch (family_) {
    case MarginFamily::Normal: return params_[0] + params_[1] * normal_quantile(u);
    case MarginFamily::StudentT:
      return params_[0] +
             params_[1] * boost::math::quantile(boost::math::students_t_distribution<double, FastPolicy>(params_[2]), u);
    case MarginFamily::Empirical: {
      const double n1 = static_cast<double>(sample_.size() + 1);
      for (std::size_t i = 0; i < sample_.size(); ++i) {
        // cdf at sample_[i] counts ties, so test against the last tied index.
        std::size_t j = i;
        while (j + 1 < sample_.size() && sample_[j + 1] == sample_[i]) ++j;
        if (static_cast<double>(j + 1) / n1 >= u) return sample_[i];
        i = j;
      }
      return sample_.back();
    }
    case MarginFamily::Bernoulli: return u <= 1.0 - params_[0] ? 0.0 : 1.0;
    default: {
      double guess = 0.0;
      if (family_ == MarginFamily::Poisson) {
        guess = boost::math::quantile(boost::math::poisson_distribution<double, UpPolicy>(params_[0]), u);
      } else {
        guess = boost::math::quantile(
            boost::math::negative_binomial_distribution<double, UpPolicy>(params_[0], params_[1]), u);
      }
      auto k = static_cast<long long>(std::max(0.0, std::floor(guess)));
      // Smallest support point with cdf >= u.
      while (k > 0 && discrete_cdf(k - 1) >= u) --k;
      while (discrete_cdf(k) < u) ++k;
      return static_cast<double>(k);
    }
  }
}

double Margin::normal_score(double y) const {
  if (family_ == MarginFamily::Normal) return (y - params_[0]) / params_[1];
  return normal_quantile(clamp_probability(cdf(y)));
}

Margin Margin::with_params(std::vector<double> params) const {
  return Margin(family_, std::move(params), sample_);
}

Eigen::VectorXd Margin::to_unconstrained() const {
  Eigen::VectorXd eta(static_cast<Eigen::Index>(params_.size()));
  switch (family_) {
    case MarginFamily::Normal:
      eta << params_[0], std::log(params_[1]);
      break;
    case MarginFamily::StudentT:
      eta << params_[0], std::log(params_[1]), std::log(params_[2]);
      break;
    case MarginFamily::NegativeBinomial:
      eta << std::log(params_[0]), logit(params_[1]);
      break;
    case MarginFamily::Bernoulli:
      eta << logit(params_[0]);
      break;
    case MarginFamily::Poisson:
      eta << std::log(params_[0]);
      break;
    case MarginFamily::Empirical:
      break;
  }
  return eta;
}

Margin Margin::from_unconstrained(const Eigen::VectorXd& eta) const {
  if (static_cast<std::size_t>(eta.size()) != params_.size()) {
    throw DomainError("from_unconstrained: dimension mismatch");
  }
  switch (family_) {
    case MarginFamily::Normal: return with_params({eta[0], std::exp(eta[1])});
    case MarginFamily::StudentT: return with_params({eta[0], std::exp(eta[1]), std::exp(eta[2])});
    case MarginFamily::NegativeBinomial: return with_params({std::exp(eta[0]), inv_logit(eta[1])});
    case MarginFamily::Bernoulli: return with_params({inv_logit(eta[0])});
    case MarginFamily::Poisson: return with_params({std::exp(eta[0])});
    case MarginFamily::Empirical: return *this;
  }
  return *this;
}

double Margin::log_prior_unconstrained(const Eigen::VectorXd& eta, const MarginPrior& prior) const {
  switch (family_) {
    case MarginFamily::Normal:
      return normal_log_prior(eta[0], prior.location_var) + normal_log_prior(eta[1], prior.log_var);
    case MarginFamily::StudentT:
      return normal_log_prior(eta[0], prior.location_var) + normal_log_prior(eta[1], prior.log_var) +
             normal_log_prior(eta[2], prior.log_var);
    case MarginFamily::NegativeBinomial:
      return normal_log_prior(eta[0], prior.log_var) + normal_log_prior(eta[1], prior.logit_var);
    case MarginFamily::Bernoulli: return normal_log_prior(eta[0], prior.logit_var);
    case MarginFamily::Poisson: return normal_log_prior(eta[0], prior.log_var);
    case MarginFamily::Empirical: return 0.0;
  }
  return 0.0;
}

Margin fit_by_moments(MarginFamily family, const std::vector<double>& column) {
  if (column.empty()) throw DomainError("fit_by_moments: empty column");
  const double mean = mean_of(column);
  const double var = var_of(column, mean);
  const double sd = std::sqrt(std::max(var, 1e-12));
  switch (family) {
    case MarginFamily::Normal: return Margin::normal(mean, sd);
    case MarginFamily::StudentT: {
      constexpr double nu = 5.0;
      return Margin::student_t(mean, sd * std::sqrt((nu - 2.0) / nu), nu);
    }
    case MarginFamily::NegativeBinomial: {
      const double m = std::max(mean, 0.05);
      if (var > m * 1.05) {
        return Margin::negative_binomial(m * m / (var - m), std::clamp(m / var, 0.01, 0.99));
      }
      // Under-dispersed data: large r with p close to one approaches Poisson.
      return Margin::negative_binomial(20.0 * m, 20.0 / 21.0);
    }
    case MarginFamily::Bernoulli: return Margin::bernoulli(std::clamp(mean, 0.01, 0.99));
    case MarginFamily::Poisson: return Margin::poisson(std::max(mean, 0.01));
    case MarginFamily::Empirical: return Margin::empirical(column);
  }
  throw DomainError("fit_by_moments: unknown family");
}

}  // namespace bayescop
