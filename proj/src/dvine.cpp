#include "bayescop/dvine.hpp"

#include <cmath>
#include <limits>

#include "bayescop/corr_param.hpp"
#include "bayescop/error.hpp"
#include "bayescop/margins.hpp"
#include "bayescop/normal.hpp"

namespace bayescop {

DVineModel::DVineModel(std::size_t m, PairFamily family, std::vector<double> phi, std::vector<std::uint8_t> gamma)
    : m_(m), family_(family), phi_(std::move(phi)), gamma_(std::move(gamma)) {
  const std::size_t n = pair_count(m);
  if (m < 2) throw DomainError("d-vine: dimension must be at least 2");
  if (phi_.size() != n || gamma_.size() != n) throw DomainError("d-vine: parameter length does not match dimension");
  pairs_.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (gamma_[k] && family_ != PairFamily::Independence) {
      pairs_.emplace_back(family_, phi_[k]);
    } else {
      phi_[k] = independence_parameter(family_);
      pairs_.push_back(PairCopula::independence());
    }
  }
}

DVineModel::DVineModel(std::size_t m, PairFamily family, std::vector<double> phi)
    : DVineModel(m, family, std::move(phi), std::vector<std::uint8_t>(pair_count(m), 1)) {}

const PairCopula& DVineModel::pair(std::size_t t, std::size_t s) const {
  if (!(s < t && t < m_)) throw DomainError("d-vine: invalid pair");
  return pairs_[pair_index(t, s)];
}

// The Gaussian h-function maps normal scores linearly, so the whole
// recursion runs on scores; probabilities would lose the far tails.
Eigen::MatrixXd DVineModel::gaussian_scores(std::span<const double> u) const {
  const auto m = static_cast<Eigen::Index>(m_);
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) z(i, i) = normal_quantile(clamp_probability(u[static_cast<std::size_t>(i)]));
  for (Eigen::Index k = 1; k < m; ++k) {
    for (Eigen::Index i = k; i < m; ++i) {
      const Eigen::Index s = i - k;
      const double a = z(i, s + 1);
      const double b = z(s, i - 1);
      const std::size_t idx = pair_index(static_cast<std::size_t>(i), static_cast<std::size_t>(s));
      if (!gamma_[idx]) {
        z(i, s) = a;
        z(s, i) = b;
      } else {
        const double rho = phi_[idx];
        const double sd = std::sqrt((1.0 - rho) * (1.0 + rho));
        z(i, s) = (a - rho * b) / sd;
        z(s, i) = (b - rho * a) / sd;
      }
    }
  }
  return z;
}

VineArguments DVineModel::evaluate_arguments(std::span<const double> u, bool use_shortcut) const {
  if (u.size() != m_) throw DomainError("d-vine: dimension mismatch");
  if (family_ == PairFamily::Gaussian) {
    VineArguments args{gaussian_scores(u).unaryExpr([](double z) { return normal_cdf(z); })};
    for (std::size_t i = 0; i < m_; ++i) args.cond(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = u[i];
    return args;
  }
  const auto m = static_cast<Eigen::Index>(m_);
  VineArguments args{Eigen::MatrixXd::Zero(m, m)};
  auto& c = args.cond;
  for (Eigen::Index i = 0; i < m; ++i) c(i, i) = u[static_cast<std::size_t>(i)];
  for (Eigen::Index k = 1; k < m; ++k) {
    for (Eigen::Index i = k; i < m; ++i) {
      const Eigen::Index s = i - k;
      const double a = c(i, s + 1);  // u_{i|s+1}
      const double b = c(s, i - 1);  // u_{s|i-1}
      const std::size_t idx = pair_index(static_cast<std::size_t>(i), static_cast<std::size_t>(s));
      if (use_shortcut && !gamma_[idx]) {
        c(i, s) = a;
        c(s, i) = b;
      } else {
        const PairCopula& pc = pairs_[idx];
        c(i, s) = pc.h(a, b);
        c(s, i) = pc.h(b, a);
      }
    }
  }
  return args;
}

double DVineModel::log_density(std::span<const double> u) const {
  if (family_ == PairFamily::Gaussian) {
    if (u.size() != m_) throw DomainError("d-vine: dimension mismatch");
    const Eigen::MatrixXd z = gaussian_scores(u);
    double total = 0.0;
    for (std::size_t t = 1; t < m_; ++t) {
      for (std::size_t s = 0; s < t; ++s) {
        const std::size_t idx = pair_index(t, s);
        if (!gamma_[idx]) continue;
        const double rho = phi_[idx];
        const double a = z(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s + 1));
        const double b = z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t - 1));
        const double one_minus = (1.0 - rho) * (1.0 + rho);
        total += -0.5 * std::log(one_minus) - (rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * one_minus);
      }
    }
    return total;
  }
  const VineArguments args = evaluate_arguments(u);
  double total = 0.0;
  for (std::size_t t = 1; t < m_; ++t) {
    for (std::size_t s = 0; s < t; ++s) {
      const std::size_t idx = pair_index(t, s);
      if (!gamma_[idx]) continue;
      total += pairs_[idx].log_density(args.at(t, s + 1), args.at(s, t - 1));
      if (total == -std::numeric_limits<double>::infinity()) return total;
    }
  }
  return total;
}

Eigen::VectorXd DVineModel::sample_u(Rng& rng) const {
  const auto m = static_cast<Eigen::Index>(m_);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd w(m);
  for (Eigen::Index j = 0; j < m; ++j) w[j] = uniform_open(rng);
  c(0, 0) = w[0];
  for (Eigen::Index t = 1; t < m; ++t) {
    double v = w[t];  // u_{t|0}
    for (Eigen::Index s = 0; s < t; ++s) {
      const std::size_t idx = pair_index(static_cast<std::size_t>(t), static_cast<std::size_t>(s));
      if (gamma_[idx]) v = pairs_[idx].h_inverse(v, c(s, t - 1));  // -> u_{t|s+1}
    }
    c(t, t) = v;
    for (Eigen::Index k = 1; k <= t; ++k) {
      const Eigen::Index s = t - k;
      const std::size_t idx = pair_index(static_cast<std::size_t>(t), static_cast<std::size_t>(s));
      const double a = c(t, s + 1);
      const double b = c(s, t - 1);
      if (gamma_[idx]) {
        c(t, s) = pairs_[idx].h(a, b);
        c(s, t) = pairs_[idx].h(b, a);
      } else {
        c(t, s) = a;
        c(s, t) = b;
      }
    }
  }
  return c.diagonal();
}

}  // namespace bayescop
