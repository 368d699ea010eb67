#pragma once

// Univariate marginal models F_j with density/mass, left-hand limit and
// quantile, plus the unconstrained reparameterisation and default priors the
// samplers use for theta_j.

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

namespace bayescop {

enum class MarginFamily { Normal, StudentT, NegativeBinomial, Bernoulli, Poisson, Empirical };

std::string_view to_string(MarginFamily family);
// Lowercase config name -> family; throws DomainError on unknown names.
MarginFamily margin_family_from_string(std::string_view name);
std::vector<std::string> margin_param_names(MarginFamily family);

// Variances of the normal priors placed on the unconstrained coordinates.
struct MarginPrior {
  double location_var = 100.0;  // location parameters, raw scale
  double log_var = 10.0;        // positive parameters, log scale
  double logit_var = 4.0;       // probabilities, logit scale

  bool operator==(const MarginPrior&) const = default;
};

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any
// normal quantile or log is taken on copula data.
inline constexpr double kProbClamp = 1e-12;
double clamp_probability(double u);

class Margin {
 public:
  Margin(MarginFamily family, std::vector<double> params);

  static Margin normal(double mu, double sigma);
  static Margin student_t(double mu, double sigma, double nu);
  static Margin negative_binomial(double r, double p);
  static Margin bernoulli(double p);
  static Margin poisson(double rate);
  // Rescaled empirical CDF: F(y) = #{x_i <= y} / (n + 1), and 1 / (2(n + 1))
  // below the sample minimum.
  static Margin empirical(std::vector<double> sample);

  MarginFamily family() const noexcept { return family_; }
  const std::vector<double>& params() const noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }
  std::vector<std::string> param_names() const;
  bool is_discrete() const noexcept;
  const std::vector<double>& sample() const noexcept { return sample_; }

  double cdf(double y) const;
  // F(y-) : equals cdf for continuous families, cdf(y - 1) at integers for ordinal ones.
  double cdf_left_limit(double y) const;
  // log f(y) or log pmf(y); -inf outside the support.
  double log_density(double y) const;
  double quantile(double u) const;
  // Phi^{-1}(F(y)) with the probability clamp applied; exact standardisation
  // for the normal family.
  double normal_score(double y) const;

  Margin with_params(std::vector<double> params) const;

  Eigen::VectorXd to_unconstrained() const;
  Margin from_unconstrained(const Eigen::VectorXd& eta) const;
  double log_prior_unconstrained(const Eigen::VectorXd& eta, const MarginPrior& prior) const;

 private:
  Margin(MarginFamily family, std::vector<double> params, std::vector<double> sample);
  void validate() const;
  double discrete_cdf(long long k) const;
  double discrete_log_pmf(long long k) const;

  MarginFamily family_;
  std::vector<double> params_;
  std::vector<double> sample_;
};

// Method-of-moments starting values for a data column.
Margin fit_by_moments(MarginFamily family, const std::vector<double>& column);

}  // namespace bayescop
