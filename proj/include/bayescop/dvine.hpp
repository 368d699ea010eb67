#pragma once

// D-vine copula with a common pair-copula family and per-pair inclusion
// indicators. Excluded pairs (gamma = 0) are the independence copula.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "bayescop/pair_copula.hpp"
#include "bayescop/rng.hpp"

namespace bayescop {

// Conditioned arguments of a D-vine for one observation (0-based indices):
//   at(i, i) = u_i,
//   at(t, s) = u_{t|s} = F(u_t | u_{t-1}, ..., u_s)   for s < t,
//   at(s, t) = u_{s|t} = F(u_s | u_{s+1}, ..., u_t)   for s < t.
struct VineArguments {
  Eigen::MatrixXd cond;
  double at(std::size_t i, std::size_t j) const {
    return cond(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

class DVineModel {
 public:
  // phi is indexed by pair_index(t, s); entries with gamma = 0 are ignored and
  // reported as the family's independence value.
  DVineModel(std::size_t m, PairFamily family, std::vector<double> phi, std::vector<std::uint8_t> gamma);
  // All pairs included.
  DVineModel(std::size_t m, PairFamily family, std::vector<double> phi);

  std::size_t dim() const noexcept { return m_; }
  PairFamily family() const noexcept { return family_; }
  const std::vector<double>& phi() const noexcept { return phi_; }
  const std::vector<std::uint8_t>& gamma() const noexcept { return gamma_; }
  const PairCopula& pair(std::size_t t, std::size_t s) const;

  // With use_shortcut the h-call of an excluded pair is skipped and the
  // argument copied through; otherwise the independence h-function is called.
  VineArguments evaluate_arguments(std::span<const double> u, bool use_shortcut = true) const;
  double log_density(std::span<const double> u) const;
  Eigen::VectorXd sample_u(Rng& rng) const;

 private:
  Eigen::MatrixXd gaussian_scores(std::span<const double> u) const;

  std::size_t m_;
  PairFamily family_;
  std::vector<double> phi_;
  std::vector<std::uint8_t> gamma_;
  std::vector<PairCopula> pairs_;
};

}  // namespace bayescop
