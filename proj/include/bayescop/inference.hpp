#pragma once

// Posterior summaries over retained sweeps: means, ranked probability
// intervals, inclusion probabilities, model-averaged correlation and
// simulation-based dependence measures.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bayescop/mcmc.hpp"
#include "bayescop/pair_copula.hpp"
#include "bayescop/rng.hpp"
#include "bayescop/samplers.hpp"

namespace bayescop {

using Selector = std::function<double(const SweepRecord&)>;

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;  // tail mass dropped in total, e.g. 0.1 for a 90% interval
};

// Arithmetic mean over the records; throws InferenceError on an empty stream.
double posterior_mean(const std::vector<SweepRecord>& records, const Selector& selector);
// Element-wise mean of Gamma (the model average under selection).
Eigen::MatrixXd posterior_mean_correlation(const std::vector<SweepRecord>& records);

// Sorts the iterates, drops floor(level * J / 2) from each end and returns
// the extremes of the rest. Requires J >= 2 / level.
Interval probability_interval(const std::vector<SweepRecord>& records, const Selector& selector, double level);
Interval probability_interval(std::vector<double> values, double level);

double inclusion_probability(const std::vector<SweepRecord>& records, std::size_t t, std::size_t s);

// Monte Carlo standard error of the mean by batch means.
double batch_means_se(const std::vector<double>& values, std::size_t batches = 20);

// Enough to rebuild the copula of a stored sweep.
struct CopulaDescription {
  CopulaKind kind = CopulaKind::Gaussian;
  PairFamily family = PairFamily::Gaussian;
  std::size_t dim = 2;

  bool operator==(const CopulaDescription&) const = default;
};

// u ~ C(.; state of the record).
Eigen::VectorXd sample_copula(const CopulaDescription& desc, const SweepRecord& record, Rng& rng);

struct SimulationOptions {
  std::size_t draws_per_sweep = 1;  // K
  std::size_t inner_draws = 256;    // K_inner, d-vine pairs without an exact bivariate margin
  std::size_t max_records = 0;      // evenly spaced subset when positive
};

struct DependenceEstimate {
  std::size_t t = 0;
  std::size_t s = 0;
  double tau = 0.0;
  double tau_se = 0.0;
  double rho_s = 0.0;
  double rho_s_se = 0.0;
  bool approximate = false;  // C^B estimated by an inner sample
};

// tau = 4 E(C(U_t, U_s)) - 1 and rho_S = 12 E(U_t U_s) - 3 over per-sweep copula draws.
std::vector<DependenceEstimate> dependence_by_simulation(const std::vector<SweepRecord>& records,
                                                         const CopulaDescription& desc,
                                                         const std::vector<PairIndex>& pairs, Rng& rng,
                                                         const SimulationOptions& options = {});

// Posterior of the closed-form tau(phi) for a lag-one Archimedean d-vine pair
// (zero on sweeps where the pair is excluded).
struct ScalarSummary {
  double mean = 0.0;
  Interval interval;
  double se = 0.0;
};
ScalarSummary closed_form_tau_posterior(const std::vector<SweepRecord>& records, PairFamily family, std::size_t t,
                                        std::size_t s, double level = 0.1);

struct TailPoint {
  double alpha = 0.0;
  double upper = 0.0;  // pr(U_t > alpha | U_s > alpha)
  double lower = 0.0;  // pr(U_t < alpha | U_s < alpha)
};
struct TailCurves {
  std::vector<TailPoint> points;
  std::optional<double> lambda_low_limit;  // posterior mean of the closed-form limit
  std::optional<double> lambda_up_limit;
};
TailCurves tail_dependence_curves(const std::vector<SweepRecord>& records, const CopulaDescription& desc, PairIndex pair,
                                  const std::vector<double>& alphas, Rng& rng, std::size_t draws_per_sweep = 1);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  Interval interval;
  double se = 0.0;
};

struct PairSummary {
  std::size_t t = 0;
  std::size_t s = 0;
  double inclusion = 1.0;
  double mean = 0.0;  // effective parameter, averaged over all sweeps
  std::optional<double> conditional_mean;  // given inclusion
  Interval interval;
};

struct PosteriorSummary {
  std::size_t retained = 0;
  double level = 0.1;
  std::vector<ParameterSummary> margins;
  std::vector<PairSummary> pairs;
  std::optional<Eigen::MatrixXd> correlation;  // model-averaged Gamma
  std::vector<DependenceEstimate> dependence;
  std::vector<double> acceptance;
};

struct SummaryOptions {
  double level = 0.1;
  SimulationOptions simulation;
  std::uint64_t seed = 0;
};

// Empty input yields a summary with retained = 0 and no tables.
PosteriorSummary summarize(const std::vector<SweepRecord>& records, const CopulaDescription& desc,
                           const std::vector<std::vector<std::string>>& margin_param_names,
                           const SummaryOptions& options = {});

}  // namespace bayescop
