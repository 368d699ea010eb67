#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "bayescop/corr_param.hpp"
#include "bayescop/margins.hpp"
#include "bayescop/rng.hpp"

namespace bayescop {

// m-dimensional Gaussian copula with a cached Cholesky factor of Gamma.
class GaussianCopulaModel {
 public:
  explicit GaussianCopulaModel(CorrelationMatrix corr);

  std::size_t dim() const noexcept { return corr_.dim(); }
  const CorrelationMatrix& corr() const noexcept { return corr_; }
  const Eigen::MatrixXd& cholesky_lower() const noexcept { return chol_; }
  double log_det() const noexcept { return log_det_; }
  // Gamma^{-1}, formed once from the factor; used for conditional moments.
  const Eigen::MatrixXd& precision() const noexcept { return precision_; }

  // log c(u) with x_j = Phi^{-1}(u_j) supplied directly.
  double log_density_from_scores(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double log_copula_density(std::span<const double> u) const;
  // Sum of log c over n observations summarised by their normal-score
  // scatter matrix S = sum_i x_i x_i'.
  double log_density_from_scatter(const Eigen::MatrixXd& scatter, std::size_t n) const;
  // Continuous margins only: sum_i [log c(u_i) + sum_j log f_j(y_ij)].
  double log_likelihood(const std::vector<Margin>& margins, const Eigen::MatrixXd& data) const;

  Eigen::VectorXd sample_u(Rng& rng) const;
  // Phi_2(Phi^{-1}(u_i), Phi^{-1}(u_j); Gamma_ij).
  double bivariate_margin_cdf(std::size_t i, std::size_t j, double u_i, double u_j) const;

 private:
  CorrelationMatrix corr_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd precision_;
  double log_det_ = 0.0;
};

}  // namespace bayescop
