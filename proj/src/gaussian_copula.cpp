#include "bayescop/gaussian_copula.hpp"

#include <cmath>

#include "bayescop/error.hpp"
#include "bayescop/normal.hpp"
#include "bayescop/pair_copula.hpp"

namespace bayescop {

GaussianCopulaModel::GaussianCopulaModel(CorrelationMatrix corr) : corr_(std::move(corr)) {
  const Eigen::LLT<Eigen::MatrixXd> llt(corr_.matrix());
  if (llt.info() != Eigen::Success) throw DomainError("gaussian copula: correlation matrix not positive definite");
  chol_ = llt.matrixL();
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  const auto m = static_cast<Eigen::Index>(dim());
  precision_ = llt.solve(Eigen::MatrixXd::Identity(m, m));
}

double GaussianCopulaModel::log_density_from_scores(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(x);
  return -0.5 * log_det_ - 0.5 * (z.squaredNorm() - x.squaredNorm());
}

double GaussianCopulaModel::log_copula_density(std::span<const double> u) const {
  if (u.size() != dim()) throw DomainError("gaussian copula: dimension mismatch");
  Eigen::VectorXd x(static_cast<Eigen::Index>(u.size()));
  for (std::size_t j = 0; j < u.size(); ++j) {
    x[static_cast<Eigen::Index>(j)] = normal_quantile(clamp_probability(u[j]));
  }
  return log_density_from_scores(x);
}

double GaussianCopulaModel::log_density_from_scatter(const Eigen::MatrixXd& scatter, std::size_t n) const {
  const Eigen::MatrixXd half = chol_.triangularView<Eigen::Lower>().solve(scatter);
  const Eigen::MatrixXd full = chol_.transpose().triangularView<Eigen::Upper>().solve(half);
  return -0.5 * static_cast<double>(n) * log_det_ - 0.5 * (full.trace() - scatter.trace());
}

double GaussianCopulaModel::log_likelihood(const std::vector<Margin>& margins, const Eigen::MatrixXd& data) const {
  const auto m = static_cast<Eigen::Index>(dim());
  if (data.cols() != m || margins.size() != dim()) throw DomainError("gaussian copula: data/margin dimension mismatch");
  for (const auto& mg : margins) {
    if (mg.is_discrete()) throw DomainError("gaussian copula log_likelihood requires continuous margins");
  }
  double total = 0.0;
  Eigen::VectorXd x(m);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& mg = margins[static_cast<std::size_t>(j)];
      x[j] = mg.normal_score(data(i, j));
      total += mg.log_density(data(i, j));
    }
    total += log_density_from_scores(x);
  }
  return total;
}

Eigen::VectorXd GaussianCopulaModel::sample_u(Rng& rng) const {
  const auto m = static_cast<Eigen::Index>(dim());
  Eigen::VectorXd eps(m);
  for (Eigen::Index j = 0; j < m; ++j) eps[j] = std_normal(rng);
  Eigen::VectorXd z = chol_ * eps;
  for (Eigen::Index j = 0; j < m; ++j) z[j] = normal_cdf(z[j]);
  return z;
}

double GaussianCopulaModel::bivariate_margin_cdf(std::size_t i, std::size_t j, double u_i, double u_j) const {
  if (i >= dim() || j >= dim() || i == j) throw DomainError("bivariate_margin_cdf: invalid index pair");
  const double rho = corr_(i, j);
  if (rho == 0.0) return u_i * u_j;
  return PairCopula(PairFamily::Gaussian, rho).cdf(u_i, u_j);
}

}  // namespace bayescop
