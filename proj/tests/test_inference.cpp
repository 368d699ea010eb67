#include <doctest.h>

#include <cmath>

#include "bayescop/error.hpp"
#include "bayescop/inference.hpp"
#include "oracles.hpp"

using namespace bayescop;

namespace {

SweepRecord gaussian_record(std::size_t m, const std::vector<double>& partials, const std::vector<std::uint8_t>& gamma) {
  SweepRecord r;
  r.retained = true;
  r.latent_params = partials;
  r.gamma = gamma;
  r.params = effective_partials(partials, gamma);
  r.correlation = gamma_from_partials(m, r.params).lower_triangle();
  return r;
}

SweepRecord vine_record(double phi, std::uint8_t gamma = 1) {
  SweepRecord r;
  r.retained = true;
  r.params = {phi};
  r.latent_params = {phi};
  r.gamma = {gamma};
  return r;
}

}  // namespace

TEST_CASE("means") {
  std::vector<SweepRecord> recs(7);
  for (auto& r : recs) r.log_likelihood = 2.5;
  CHECK(posterior_mean(recs, [](const SweepRecord& r) { return r.log_likelihood; }) == 2.5);
  CHECK_THROWS_AS(posterior_mean({}, [](const SweepRecord&) { return 0.0; }), InferenceError);

  // Model average: half the sweeps exclude lambda_31.
  std::vector<SweepRecord> mix;
  for (int i = 0; i < 10; ++i) mix.push_back(gaussian_record(3, {0.5, -0.6, 0.5}, {1, static_cast<std::uint8_t>(i % 2), 1}));
  const Eigen::MatrixXd avg = posterior_mean_correlation(mix);
  const double with = gamma_from_partials(3, std::vector<double>{0.5, -0.6, 0.5})(2, 0);
  const double without = gamma_from_partials(3, std::vector<double>{0.5, 0.0, 0.5})(2, 0);
  CHECK(avg(2, 0) == doctest::Approx(0.5 * (with + without)));
  CHECK(avg(2, 0) < without);
  CHECK(avg(2, 0) > with);
  CHECK(avg.isApprox(avg.transpose()));
  CHECK(avg.diagonal().isApproxToConstant(1.0));
  CHECK(inclusion_probability(mix, 2, 0) == doctest::Approx(0.5));
  CHECK(inclusion_probability(mix, 1, 0) == doctest::Approx(1.0));
}

TEST_CASE("probability intervals") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = 100 - i;
  const Interval iv = probability_interval(v, 0.1);
  CHECK(iv.lower == 6.0);
  CHECK(iv.upper == 95.0);
  CHECK(iv.level == 0.1);
  const Interval flat = probability_interval(std::vector<double>(40, 3.25), 0.1);
  CHECK(flat.lower == 3.25);
  CHECK(flat.upper == 3.25);
  CHECK_THROWS_AS(probability_interval(std::vector<double>(19, 1.0), 0.1), InferenceError);
  CHECK_NOTHROW(probability_interval(std::vector<double>(20, 1.0), 0.1));
}

TEST_CASE("batch means standard error") {
  Rng rng(3);
  std::vector<double> v(100000);
  for (double& x : v) x = std_normal(rng);
  CHECK(batch_means_se(v) == doctest::Approx(1.0 / std::sqrt(100000.0)).epsilon(0.5));
  // An AR(1) chain has a larger error than the naive one.
  double x = 0.0;
  for (double& y : v) y = x = 0.9 * x + std_normal(rng);
  const double naive = std::sqrt(1.0 / (1.0 - 0.81)) / std::sqrt(100000.0);
  const double true_se = naive * std::sqrt(1.9 / 0.1);
  CHECK(batch_means_se(v) == doctest::Approx(true_se).epsilon(0.5));
}

TEST_CASE("dependence by simulation") {
  Rng rng(17);
  SimulationOptions opts;
  opts.draws_per_sweep = 10;
  {
    std::vector<SweepRecord> recs(20000, gaussian_record(2, {0.0}, {0}));
    const auto est = dependence_by_simulation(recs, {CopulaKind::Gaussian, PairFamily::Gaussian, 2}, {{1, 0}}, rng, opts);
    CHECK(std::abs(est[0].tau) < 4 * est[0].tau_se + 1e-3);
    CHECK(std::abs(est[0].rho_s) < 4 * est[0].rho_s_se + 1e-3);
    CHECK_FALSE(est[0].approximate);
  }
  {
    std::vector<SweepRecord> recs(50000, gaussian_record(2, {0.6}, {1}));
    const auto est = dependence_by_simulation(recs, {CopulaKind::Gaussian, PairFamily::Gaussian, 2}, {{1, 0}}, rng, opts);
    // Rank-based Spearman of 10^6 direct bivariate normal draws.
    std::vector<double> a(1000000), b(1000000);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = std_normal(rng);
      b[i] = 0.6 * a[i] + 0.8 * std_normal(rng);
    }
    CHECK(est[0].rho_s == doctest::Approx(oracle::spearman(a, b)).epsilon(0.01 / 0.58));
  }
  const CopulaDescription clayton{CopulaKind::DVine, PairFamily::Clayton, 2};
  {
    std::vector<SweepRecord> recs(50000, vine_record(2.0));
    const auto est = dependence_by_simulation(recs, clayton, {{1, 0}}, rng, opts);
    CHECK(est[0].tau == doctest::Approx(0.5).epsilon(0.04));
  }
  // Degenerate streams reproduce the closed forms within three standard errors.
  for (auto [fam, phi] : {std::pair{PairFamily::Clayton, 1.3}, std::pair{PairFamily::Gumbel, 1.8},
                          std::pair{PairFamily::Frank, -4.0}}) {
    std::vector<SweepRecord> recs(20000, vine_record(phi));
    const auto est = dependence_by_simulation(recs, {CopulaKind::DVine, fam, 2}, {{1, 0}}, rng, opts);
    CHECK(std::abs(est[0].tau - *kendall_tau(fam, phi)) < 3 * est[0].tau_se);
  }
}

TEST_CASE("non-adjacent d-vine pairs are flagged approximate") {
  Rng rng(2);
  SweepRecord r;
  r.params = {2.0, 1.0, 2.0};
  r.gamma = {1, 1, 1};
  const std::vector<SweepRecord> recs(200, r);
  SimulationOptions opts;
  opts.inner_draws = 64;
  const auto est = dependence_by_simulation(recs, {CopulaKind::DVine, PairFamily::Clayton, 3}, {{1, 0}, {2, 0}}, rng, opts);
  CHECK_FALSE(est[0].approximate);
  CHECK(est[1].approximate);
}

TEST_CASE("closed-form tau posterior") {
  std::vector<SweepRecord> recs;
  for (int i = 0; i < 40; ++i) recs.push_back(vine_record(2.0, static_cast<std::uint8_t>(i % 4 != 0)));
  const ScalarSummary s = closed_form_tau_posterior(recs, PairFamily::Clayton, 1, 0);
  CHECK(s.mean == doctest::Approx(0.75 * 0.5));
  CHECK(s.interval.lower == 0.0);
  CHECK(s.interval.upper == doctest::Approx(0.5));
}

TEST_CASE("tail dependence curves") {
  Rng rng(4);
  const std::vector<double> alphas{0.1, 0.5, 0.9};
  {
    const std::vector<SweepRecord> recs(1, gaussian_record(2, {0.0}, {0}));
    const TailCurves c = tail_dependence_curves(recs, {CopulaKind::Gaussian, PairFamily::Gaussian, 2}, {1, 0}, alphas,
                                                rng, 400000);
    for (const auto& p : c.points) {
      CHECK(p.upper == doctest::Approx(1 - p.alpha).epsilon(0.01 / (1 - p.alpha) + 0.01));
      CHECK(p.lower == doctest::Approx(p.alpha).epsilon(0.01 / p.alpha + 0.01));
    }
    CHECK_FALSE(c.lambda_low_limit.has_value());
  }
  {
    const std::vector<SweepRecord> recs(10, vine_record(1.0));
    const TailCurves c =
        tail_dependence_curves(recs, {CopulaKind::DVine, PairFamily::Clayton, 2}, {1, 0}, alphas, rng, 10);
    REQUIRE(c.lambda_low_limit.has_value());
    CHECK(*c.lambda_low_limit == doctest::Approx(0.5));
    CHECK(*c.lambda_up_limit == 0.0);
  }
  {
    const std::vector<SweepRecord> recs(1, gaussian_record(2, {0.3}, {1}));
    const TailCurves c = tail_dependence_curves(recs, {CopulaKind::Gaussian, PairFamily::Gaussian, 2}, {1, 0}, {0.999},
                                                rng, 10000000);
    CHECK(c.points[0].upper < 0.05);
  }
  CHECK_THROWS_AS(tail_dependence_curves({}, {}, {1, 0}, {1.0}, rng), InferenceError);
}

TEST_CASE("summaries") {
  std::vector<SweepRecord> recs;
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    SweepRecord r = gaussian_record(3, {0.5 + 0.01 * std_normal(rng), 0.1, 0.4}, {1, static_cast<std::uint8_t>(i % 3 == 0), 1});
    r.theta = {{1.0 + 0.1 * std_normal(rng), 2.0}, {0.0, 1.0}, {0.0, 1.0}};
    r.accepted = {1, 0, 1, 1, 0, 1};
    recs.push_back(r);
  }
  const std::vector<std::vector<std::string>> names(3, {"mu", "sigma"});
  const PosteriorSummary s = summarize(recs, {CopulaKind::Gaussian, PairFamily::Gaussian, 3}, names);
  CHECK(s.retained == 200);
  REQUIRE(s.margins.size() == 6);
  CHECK(s.margins[0].name.find("mu") != std::string::npos);
  CHECK(s.margins[0].mean == doctest::Approx(1.0).epsilon(0.05));
  REQUIRE(s.pairs.size() == 3);
  CHECK(s.pairs[1].inclusion == doctest::Approx(67.0 / 200.0));
  CHECK(*s.pairs[1].conditional_mean == doctest::Approx(0.1));
  CHECK(s.pairs[1].mean == doctest::Approx(0.1 * 67.0 / 200.0));
  REQUIRE(s.correlation.has_value());
  CHECK(s.dependence.size() == 3);
  CHECK(s.acceptance[1] == 0.0);
  CHECK(s.acceptance[0] == 1.0);
  for (const auto& p : s.pairs) {
    CHECK(p.inclusion >= 0.0);
    CHECK(p.inclusion <= 1.0);
  }
}
