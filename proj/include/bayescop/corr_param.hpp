#pragma once

// Correlation-matrix parameterisations for the Gaussian copula: a
// unit-diagonal Cholesky factor of the inverse, and lag-wise semi-partial
// correlations with spike-and-slab indicators.
//
// Pair-indexed quantities (partials, Cholesky elements, pair-copula
// parameters, indicators) are stored as a lower-triangular vector in
// row-major order: (1,0), (2,0), (2,1), (3,0), ... using 0-based (t, s), t > s.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace bayescop {

struct PairIndex {
  std::size_t t;
  std::size_t s;
};

inline std::size_t pair_count(std::size_t m) { return m * (m - 1) / 2; }
inline std::size_t pair_index(std::size_t t, std::size_t s) { return t * (t - 1) / 2 + s; }
std::vector<PairIndex> pair_order(std::size_t m);
// Inverse of pair_count; throws DomainError if n is not triangular.
std::size_t dimension_from_pair_count(std::size_t n);

class CorrelationMatrix {
 public:
  // Validates symmetry and unit diagonal (to 1e-12, then enforced exactly)
  // and positive definiteness (smallest eigenvalue > 1e-10).
  explicit CorrelationMatrix(Eigen::MatrixXd entries);
  static CorrelationMatrix identity(std::size_t m);
  static CorrelationMatrix from_lower_triangle(std::size_t m, std::span<const double> lower);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  std::vector<double> lower_triangle() const;

 private:
  Eigen::MatrixXd entries_;
};

// Off-diagonal elements r_{k,j} (k < j) of the unit upper-triangular R with
// Sigma^{-1} = R'R; stored at pair_index(j, k).
struct CholeskyParam {
  std::size_t m = 0;
  std::vector<double> r;
};

struct PartialCorrSet {
  std::size_t m = 0;
  std::vector<double> lambda;         // lambda_{t,s} = 0 iff gamma_{t,s} = 0
  std::vector<std::uint8_t> gamma;    // inclusion indicators
  std::vector<double> lambda_latent;  // slab values, used where gamma = 1
};

CorrelationMatrix gamma_from_cholesky(const CholeskyParam& p);
// The unique unit-diagonal R whose Sigma rescales to g.
CholeskyParam cholesky_from_gamma(const CorrelationMatrix& g);
CorrelationMatrix gamma_from_partials(const PartialCorrSet& p);
CorrelationMatrix gamma_from_partials(std::size_t m, std::span<const double> lambda);
PartialCorrSet partials_from_gamma(const CorrelationMatrix& g);

// lambda from (latent, gamma): latent where included, zero otherwise.
std::vector<double> effective_partials(std::span<const double> latent, std::span<const std::uint8_t> gamma);

// log pi(gamma) = -log(N + 1) - log C(N, w_gamma).
double indicator_log_prior(std::span<const std::uint8_t> gamma, std::size_t n_pairs);

// Conditional prior probabilities (delta0, delta1) of one indicator being 0/1
// given that `others_active` of the remaining N - 1 indicators equal one:
// pi(gamma = 1 | rest) proportional to B(N - w + 1, w + 1).
std::pair<double, double> conditional_inclusion(std::size_t others_active, std::size_t n_pairs);

}  // namespace bayescop
