#include "bayescop/corr_param.hpp"

#include <cmath>
#include <string>

#include "bayescop/error.hpp"

namespace bayescop {

namespace {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double log_binomial(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

struct ConditionalMoments {
  double var_s;
  double var_t;
  double cov;
};

// Covariance of (X_s, X_t) given X_{s+1..t-1}.
ConditionalMoments conditional_moments(const Eigen::MatrixXd& g, Eigen::Index s, Eigen::Index t) {
  const Eigen::Index k = t - s - 1;
  if (k == 0) return {1.0, 1.0, g(t, s)};
  const Eigen::MatrixXd inner = g.block(s + 1, s + 1, k, k);
  const Eigen::VectorXd r1 = g.block(s + 1, s, k, 1);
  const Eigen::VectorXd r3 = g.block(s + 1, t, k, 1);
  const Eigen::LLT<Eigen::MatrixXd> llt(inner);
  const Eigen::VectorXd a = llt.solve(r1);
  const Eigen::VectorXd b = llt.solve(r3);
  return {1.0 - r1.dot(a), 1.0 - r3.dot(b), g(t, s) - r1.dot(b)};
}

}  // namespace

std::vector<PairIndex> pair_order(std::size_t m) {
  std::vector<PairIndex> order;
  order.reserve(pair_count(m));
  for (std::size_t t = 1; t < m; ++t) {
    for (std::size_t s = 0; s < t; ++s) order.push_back({t, s});
  }
  return order;
}

std::size_t dimension_from_pair_count(std::size_t n) {
  std::size_t m = 1;
  while (pair_count(m) < n) ++m;
  if (pair_count(m) != n) throw DomainError("pair vector length " + std::to_string(n) + " is not m(m-1)/2");
  return m;
}

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  const Eigen::Index m = entries_.rows();
  if (m == 0 || entries_.cols() != m) throw DomainError("correlation matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(entries_(i, i) - 1.0) > 1e-12) throw DomainError("correlation matrix must have unit diagonal");
    entries_(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      if (!std::isfinite(entries_(i, j)) || std::abs(entries_(i, j) - entries_(j, i)) > 1e-12) {
        throw DomainError("correlation matrix must be symmetric and finite");
      }
      entries_(j, i) = entries_(i, j);
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries_, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 1e-10)) {
    throw DomainError("correlation matrix is not positive definite");
  }
}

CorrelationMatrix CorrelationMatrix::identity(std::size_t m) {
  const auto n = static_cast<Eigen::Index>(m);
  return CorrelationMatrix(Eigen::MatrixXd::Identity(n, n));
}

CorrelationMatrix CorrelationMatrix::from_lower_triangle(std::size_t m, std::span<const double> lower) {
  if (lower.size() != pair_count(m)) throw DomainError("lower-triangle length does not match dimension");
  const auto n = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
  for (const auto& [t, s] : pair_order(m)) {
    const auto ti = static_cast<Eigen::Index>(t);
    const auto si = static_cast<Eigen::Index>(s);
    g(ti, si) = g(si, ti) = lower[pair_index(t, s)];
  }
  return CorrelationMatrix(std::move(g));
}

std::vector<double> CorrelationMatrix::lower_triangle() const {
  std::vector<double> out;
  out.reserve(pair_count(dim()));
  for (const auto& [t, s] : pair_order(dim())) out.push_back((*this)(t, s));
  return out;
}

CorrelationMatrix gamma_from_cholesky(const CholeskyParam& p) {
  if (p.r.size() != pair_count(p.m)) throw DomainError("cholesky parameter length does not match dimension");
  const auto n = static_cast<Eigen::Index>(p.m);
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(n, n);
  for (const auto& [j, k] : pair_order(p.m)) {
    r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = p.r[pair_index(j, k)];
  }
  // Sigma = R^{-1} R^{-T}
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::UnitUpper>().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd sigma = r_inv * r_inv.transpose();
  const Eigen::VectorXd scale = sigma.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd g = scale.asDiagonal() * sigma * scale.asDiagonal();
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) g(j, i) = g(i, j);
  }
  return CorrelationMatrix(std::move(g));
}

CholeskyParam cholesky_from_gamma(const CorrelationMatrix& g) {
  // Gamma^{-1} = U'U; R = U diag(U)^{-1} corresponds to Sigma = D Gamma D with D = diag(U).
  const Eigen::MatrixXd prec = g.matrix().llt().solve(Eigen::MatrixXd::Identity(g.matrix().rows(), g.matrix().cols()));
  const Eigen::MatrixXd u = prec.llt().matrixU();
  CholeskyParam p;
  p.m = g.dim();
  p.r.assign(pair_count(p.m), 0.0);
  for (const auto& [j, k] : pair_order(p.m)) {
    const auto jj = static_cast<Eigen::Index>(j);
    p.r[pair_index(j, k)] = u(static_cast<Eigen::Index>(k), jj) / u(jj, jj);
  }
  return p;
}

CorrelationMatrix gamma_from_partials(std::size_t m, std::span<const double> lambda) {
  if (lambda.size() != pair_count(m)) throw DomainError("partial correlation length does not match dimension");
  const auto n = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index lag = 1; lag < n; ++lag) {
    for (Eigen::Index s = 0; s + lag < n; ++s) {
      const Eigen::Index t = s + lag;
      const double lam = lambda[pair_index(static_cast<std::size_t>(t), static_cast<std::size_t>(s))];
      if (!(lam > -1.0 && lam < 1.0)) throw DomainError("partial correlations must lie in (-1,1)");
      double value = lam;
      if (lag > 1) {
        const Eigen::Index k = lag - 1;
        const Eigen::MatrixXd inner = g.block(s + 1, s + 1, k, k);
        const Eigen::VectorXd r1 = g.block(s + 1, s, k, 1);
        const Eigen::VectorXd r3 = g.block(s + 1, t, k, 1);
        const Eigen::LLT<Eigen::MatrixXd> llt(inner);
        const Eigen::VectorXd a = llt.solve(r1);
        const Eigen::VectorXd b = llt.solve(r3);
        const double v1 = std::max(0.0, 1.0 - r1.dot(a));
        const double v3 = std::max(0.0, 1.0 - r3.dot(b));
        value = r1.dot(b) + lam * std::sqrt(v1 * v3);
      }
      g(t, s) = g(s, t) = value;
    }
  }
  return CorrelationMatrix(std::move(g));
}

CorrelationMatrix gamma_from_partials(const PartialCorrSet& p) { return gamma_from_partials(p.m, p.lambda); }

PartialCorrSet partials_from_gamma(const CorrelationMatrix& g) {
  PartialCorrSet out;
  out.m = g.dim();
  const std::size_t n = pair_count(out.m);
  out.lambda.assign(n, 0.0);
  out.gamma.assign(n, 1);
  for (const auto& [t, s] : pair_order(out.m)) {
    const auto mom = conditional_moments(g.matrix(), static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
    out.lambda[pair_index(t, s)] = mom.cov / std::sqrt(mom.var_s * mom.var_t);
  }
  out.lambda_latent = out.lambda;
  return out;
}

std::vector<double> effective_partials(std::span<const double> latent, std::span<const std::uint8_t> gamma) {
  std::vector<double> out(latent.size(), 0.0);
  for (std::size_t i = 0; i < latent.size(); ++i) out[i] = gamma[i] ? latent[i] : 0.0;
  return out;
}

double indicator_log_prior(std::span<const std::uint8_t> gamma, std::size_t n_pairs) {
  if (gamma.size() != n_pairs) throw DomainError("indicator count does not match N");
  std::size_t w = 0;
  for (auto g : gamma) w += g ? 1 : 0;
  const auto nd = static_cast<double>(n_pairs);
  return -std::log(nd + 1.0) - log_binomial(nd, static_cast<double>(w));
}

std::pair<double, double> conditional_inclusion(std::size_t others_active, std::size_t n_pairs) {
  const auto nd = static_cast<double>(n_pairs);
  const auto w0 = static_cast<double>(others_active);
  const double w1 = w0 + 1.0;
  const double l0 = log_beta(nd - w0 + 1.0, w0 + 1.0);
  const double l1 = log_beta(nd - w1 + 1.0, w1 + 1.0);
  const double mx = std::max(l0, l1);
  const double e0 = std::exp(l0 - mx);
  const double e1 = std::exp(l1 - mx);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

}  // namespace bayescop
