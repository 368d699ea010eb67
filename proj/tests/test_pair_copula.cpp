#include <doctest.h>

#include <cmath>
#include <vector>

#include "bayescop/error.hpp"
#include "bayescop/normal.hpp"
#include "bayescop/pair_copula.hpp"
#include "oracles.hpp"

using namespace bayescop;

namespace {

// Closed forms written out independently of the library.
double frank_cdf(double u1, double u2, double phi) {
  return -std::log(1.0 + (std::exp(-phi * u1) - 1.0) * (std::exp(-phi * u2) - 1.0) / (std::exp(-phi) - 1.0)) / phi;
}
double frank_density(double u1, double u2, double phi) {
  const double num = phi * std::exp(phi * (1 + u1 + u2)) * (std::exp(phi) - 1.0);
  const double den = std::exp(phi) - std::exp(phi * (1 + u1)) - std::exp(phi * (1 + u2)) + std::exp(phi * (u1 + u2));
  return num / (den * den);
}
double clayton_density(double u1, double u2, double phi) {
  const double base = std::pow(u1, -phi) + std::pow(u2, -phi) - 1.0;
  if (base <= 0.0) return 0.0;
  return (1 + phi) * std::pow(u1 * u2, -1 - phi) * std::pow(base, -1.0 / phi - 2.0);
}
double gumbel_density(double u1, double u2, double phi) {
  const double t1 = -std::log(u1), t2 = -std::log(u2);
  const double s = std::pow(t1, phi) + std::pow(t2, phi);
  const double c = std::exp(-std::pow(s, 1.0 / phi));
  return c / (u1 * u2) * std::pow(s, -2.0 + 2.0 / phi) * std::pow(t1 * t2, phi - 1.0) *
         (1.0 + (phi - 1.0) * std::pow(s, -1.0 / phi));
}

const std::vector<std::pair<PairFamily, std::vector<double>>> kCases = {
    {PairFamily::Gaussian, {-0.8, -0.3, 0.2, 0.6, 0.9}},
    {PairFamily::Frank, {-8.0, -2.0, 0.5, 3.0, 10.0}},
    {PairFamily::Clayton, {-0.5, 0.3, 1.0, 2.0, 5.0}},
    {PairFamily::Gumbel, {1.0, 1.3, 2.0, 3.0, 6.0}},
};

}  // namespace

TEST_CASE("parameter domains") {
  CHECK_THROWS_AS(PairCopula(PairFamily::Frank, 0.0), DomainError);
  CHECK_THROWS_AS(PairCopula(PairFamily::Clayton, 0.0), DomainError);
  CHECK_THROWS_AS(PairCopula(PairFamily::Clayton, -1.0), DomainError);
  CHECK_THROWS_AS(PairCopula(PairFamily::Gumbel, 0.99), DomainError);
  CHECK_THROWS_AS(PairCopula(PairFamily::Gaussian, 1.0), DomainError);
  CHECK_NOTHROW(PairCopula(PairFamily::Gumbel, 1.0));
  CHECK_NOTHROW(PairCopula(PairFamily::Clayton, -0.99));
}

TEST_CASE("cdf examples") {
  CHECK(PairCopula::independence().cdf(0.3, 0.5) == doctest::Approx(0.15));
  CHECK(PairCopula(PairFamily::Gumbel, 1.0).cdf(0.3, 0.5) == doctest::Approx(0.15));
  const PairCopula clayton(PairFamily::Clayton, 2.0);
  CHECK(clayton.cdf(0.5, 0.5) == doctest::Approx(1.0 / std::sqrt(7.0)).epsilon(1e-14));
  // Cross-check by integrating the density over [0, 0.5]^2.
  const double mass = oracle::integrate_2d(
      [](double a, double b) { return clayton_density(a, b, 2.0); }, 0.0, 0.5, 0.0, 0.5, 200);
  CHECK(mass == doctest::Approx(1.0 / std::sqrt(7.0)).epsilon(2e-4));
  CHECK(PairCopula(PairFamily::Frank, 4.0).cdf(0.2, 0.7) == doctest::Approx(frank_cdf(0.2, 0.7, 4.0)).epsilon(1e-13));
}

TEST_CASE("log densities match closed forms and mixed partials") {
  CHECK(PairCopula::independence().log_density(0.1, 0.8) == 0.0);
  CHECK(PairCopula(PairFamily::Gaussian, 0.0).log_density(0.2, 0.9) == doctest::Approx(0.0));
  const PairCopula frank(PairFamily::Frank, 5.0);
  const double h = 1e-4;
  const double mixed = (frank.cdf(0.5 + h, 0.5 + h) - frank.cdf(0.5 + h, 0.5 - h) - frank.cdf(0.5 - h, 0.5 + h) +
                        frank.cdf(0.5 - h, 0.5 - h)) / (4 * h * h);
  CHECK(std::exp(frank.log_density(0.5, 0.5)) == doctest::Approx(mixed).epsilon(1e-5));
  CHECK(std::exp(frank.log_density(0.5, 0.5)) == doctest::Approx(frank_density(0.5, 0.5, 5.0)).epsilon(1e-12));

  for (double u1 : {0.05, 0.3, 0.77}) {
    for (double u2 : {0.1, 0.5, 0.95}) {
      CHECK(std::exp(PairCopula(PairFamily::Clayton, 1.7).log_density(u1, u2)) ==
            doctest::Approx(clayton_density(u1, u2, 1.7)).epsilon(1e-11));
      CHECK(std::exp(PairCopula(PairFamily::Gumbel, 2.4).log_density(u1, u2)) ==
            doctest::Approx(gumbel_density(u1, u2, 2.4)).epsilon(1e-11));
      CHECK(std::exp(PairCopula(PairFamily::Frank, -3.0).log_density(u1, u2)) ==
            doctest::Approx(frank_density(u1, u2, -3.0)).epsilon(1e-11));
      const double rho = 0.6;
      const double x1 = normal_quantile(u1), x2 = normal_quantile(u2);
      const double ref = -0.5 * std::log(1 - rho * rho) -
                         (rho * rho * (x1 * x1 + x2 * x2) - 2 * rho * x1 * x2) / (2 * (1 - rho * rho));
      CHECK(PairCopula(PairFamily::Gaussian, rho).log_density(u1, u2) == doctest::Approx(ref).epsilon(1e-12));
    }
  }
  // Negative Clayton: zero density below the boundary curve.
  CHECK(std::isinf(PairCopula(PairFamily::Clayton, -0.5).log_density(0.1, 0.1)));
}

TEST_CASE("h-functions") {
  CHECK(PairCopula::independence().h(0.37, 0.8) == 0.37);
  const double rho = -0.4;
  const double x1 = normal_quantile(0.3), x2 = normal_quantile(0.6);
  CHECK(PairCopula(PairFamily::Gaussian, rho).h(0.3, 0.6) ==
        doctest::Approx(oracle::phi_cdf((x1 - rho * x2) / std::sqrt(1 - rho * rho))).epsilon(1e-12));
  CHECK(PairCopula(PairFamily::Gaussian, 0.0).h(0.3, 0.6) == doctest::Approx(0.3));
  const PairCopula clayton(PairFamily::Clayton, 2.0);
  const double d = 1e-5;
  CHECK(clayton.h(0.5, 0.5) == doctest::Approx((clayton.cdf(0.5, 0.5 + d) - clayton.cdf(0.5, 0.5 - d)) / (2 * d))
                                   .epsilon(1e-6));
}

TEST_CASE("h_inverse round trips") {
  CHECK(PairCopula::independence().h_inverse(0.42, 0.1) == 0.42);
  CHECK(PairCopula(PairFamily::Gaussian, 0.0).h_inverse(0.42, 0.1) == doctest::Approx(0.42));
  const PairCopula gumbel(PairFamily::Gumbel, 2.0);
  CHECK(gumbel.h_inverse(gumbel.h(0.3, 0.7), 0.7) == doctest::Approx(0.3).epsilon(1e-10));
  for (const auto& [family, phis] : kCases) {
    for (double phi : phis) {
      const PairCopula c(family, phi);
      for (double u2 : {0.02, 0.4, 0.93}) {
        for (double q : {0.01, 0.25, 0.5, 0.9, 0.999}) {
          const double u1 = c.h_inverse(q, u2);
          CHECK(c.h(u1, u2) == doctest::Approx(q).epsilon(1e-8));
        }
      }
    }
  }
}

TEST_CASE("closed-form dependence") {
  const auto cl = PairCopula(PairFamily::Clayton, 2.0).dependence();
  CHECK(*cl.tau == doctest::Approx(0.5));
  CHECK(cl.lambda_low == doctest::Approx(std::pow(2.0, -0.5)));
  CHECK(cl.lambda_up == 0.0);
  const auto gu = PairCopula(PairFamily::Gumbel, 1.0).dependence();
  CHECK(*gu.tau == doctest::Approx(0.0));
  CHECK(gu.lambda_up == doctest::Approx(0.0));
  // Frank: Debye integral by quadrature.
  for (double phi : {5.0, -3.0, 0.01, 20.0}) {
    const double d1 = oracle::simpson([](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); }, 0.0, phi, 20000) /
                      phi;
    CHECK(debye1(phi) == doctest::Approx(d1).epsilon(1e-10));
    const auto fr = PairCopula(PairFamily::Frank, phi).dependence();
    CHECK(*fr.tau == doctest::Approx(1.0 + 4.0 * (d1 - 1.0) / phi).epsilon(1e-8));
  }
}

TEST_CASE("sampling") {
  Rng rng(2024);
  const int n = 100000;
  std::vector<double> a(n), b(n);
  for (int i = 0; i < n; ++i) std::tie(a[i], b[i]) = PairCopula::independence().sample(rng);
  CHECK(std::abs(oracle::pearson(a, b)) < 0.01);

  std::vector<std::pair<double, double>> xy(n);
  const PairCopula clayton(PairFamily::Clayton, 2.0);
  for (auto& p : xy) p = clayton.sample(rng);
  CHECK(oracle::kendall_tau(xy) == doctest::Approx(0.5).epsilon(0.02));

  const PairCopula gauss(PairFamily::Gaussian, 0.5);
  for (int i = 0; i < n; ++i) {
    auto [u1, u2] = gauss.sample(rng);
    a[i] = normal_quantile(u1);
    b[i] = normal_quantile(u2);
  }
  CHECK(oracle::pearson(a, b) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("densities integrate to one with uniform margins") {
  for (const auto& [family, phis] : kCases) {
    for (double phi : phis) {
      const PairCopula c(family, phi);
      CAPTURE(to_string(family));
      CAPTURE(phi);
      const double mass = oracle::integrate_unit_square([&](double a, double b) { return std::exp(c.log_density(a, b)); });
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
      // Uniform margin: integral over u2 of h-derivative, i.e. C(u1, 1) = u1.
      CHECK(c.cdf(0.35, 1.0) == doctest::Approx(0.35).epsilon(1e-12));
    }
  }
}
