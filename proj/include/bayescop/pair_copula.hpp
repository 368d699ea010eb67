#pragma once

// Bivariate pair-copulas: independence, Gaussian, Frank, Clayton, Gumbel.
// All five families are exchangeable, so a single h-function serves both
// conditioning directions.

#include <optional>
#include <string_view>
#include <utility>

#include "bayescop/rng.hpp"

namespace bayescop {

enum class PairFamily { Independence, Gaussian, Frank, Clayton, Gumbel };

std::string_view to_string(PairFamily family);
PairFamily pair_family_from_string(std::string_view name);

// Parameter value at (or, for Gaussian/Frank/Clayton, in the limit of) which
// the family reduces to the independence copula.
double independence_parameter(PairFamily family);

struct DependenceMeasures {
  std::optional<double> tau;  // Kendall's tau; absent where no closed form is used
  double lambda_low = 0.0;
  double lambda_up = 0.0;
};

class PairCopula {
 public:
  // Validates phi against the family's domain; throws DomainError.
  PairCopula(PairFamily family, double phi);
  static PairCopula independence() { return PairCopula(PairFamily::Independence, 0.0); }

  PairFamily family() const noexcept { return family_; }
  double phi() const noexcept { return phi_; }

  double cdf(double u1, double u2) const;
  double log_density(double u1, double u2) const;
  // h(u1 | u2) = dC(u1, u2)/du2.
  double h(double u1, double u2) const;
  // u1 with h(u1 | u2) = q.
  double h_inverse(double q, double u2) const;
  DependenceMeasures dependence() const;
  // (u1, u2) ~ C: u2 uniform, u1 = h_inverse(q, u2).
  std::pair<double, double> sample(Rng& rng) const;

 private:
  double solve_h_inverse(double q, double u2, double guess) const;

  PairFamily family_;
  double phi_;
};

// Free-function spellings of the member operations.
inline double pair_cdf(const PairCopula& c, double u1, double u2) { return c.cdf(u1, u2); }
inline double pair_log_density(const PairCopula& c, double u1, double u2) {
  return c.log_density(u1, u2);
}
inline double h_func(const PairCopula& c, double u1, double u2) { return c.h(u1, u2); }
inline double h_inverse(const PairCopula& c, double q, double u2) { return c.h_inverse(q, u2); }
inline DependenceMeasures closed_form_dependence(const PairCopula& c) { return c.dependence(); }
inline std::pair<double, double> sample_pair(const PairCopula& c, Rng& rng) { return c.sample(rng); }

// Debye function D_1(x) = (1/x) * int_0^x t / (e^t - 1) dt.
double debye1(double x);

// Kendall's tau of the family at phi, for families with a closed form.
std::optional<double> kendall_tau(PairFamily family, double phi);

}  // namespace bayescop
