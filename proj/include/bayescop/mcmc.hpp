#pragma once

// Reusable Metropolis-Hastings building blocks: multivariate-t independence
// proposals centred at a numerically located mode, bounded random walks with
// the truncation correction, and the two-point spike-and-slab move.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bayescop/rng.hpp"

namespace bayescop {

using LogTarget = std::function<double(const Eigen::VectorXd&)>;

struct ModeSearchOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double gradient_step = 1e-5;  // relative: h = gradient_step * (1 + |theta|)
  double hessian_step = 1e-4;   // relative, for central second differences
  double eigen_floor = 1e-8;
  double df = 5.0;
  // Warm start for the BFGS inverse Hessian (e.g. the previous proposal
  // scale); identity when empty.
  Eigen::MatrixXd initial_inverse_hessian;
};

class TProposal {
 public:
  TProposal(Eigen::VectorXd mode, Eigen::MatrixXd scale, double df);

  const Eigen::VectorXd& mode() const noexcept { return mode_; }
  const Eigen::MatrixXd& scale() const noexcept { return scale_; }
  double df() const noexcept { return df_; }

  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(Rng& rng) const;

 private:
  Eigen::VectorXd mode_;
  Eigen::MatrixXd scale_;
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
  double df_;
};

Eigen::VectorXd finite_difference_gradient(const LogTarget& f, const Eigen::VectorXd& x, double rel_step);
Eigen::MatrixXd finite_difference_hessian(const LogTarget& f, const Eigen::VectorXd& x, double fx, double rel_step);

// Quasi-Newton (BFGS) ascent from theta0, then a Newton polish with the
// finite-difference Hessian. block_name labels error messages.
Eigen::VectorXd find_mode(const LogTarget& log_target, const Eigen::VectorXd& theta0,
                          const ModeSearchOptions& options = {}, const std::string& block_name = "parameters");

// Mode, scale = -H^{-1} (eigenvalues of -H floored at options.eigen_floor), df.
TProposal build_t_proposal(const LogTarget& log_target, const Eigen::VectorXd& theta0,
                           const ModeSearchOptions& options = {}, const std::string& block_name = "parameters");

struct MhOutcome {
  Eigen::VectorXd state;
  double log_target = 0.0;
  bool accepted = false;
};

// Independence MH: accept x' ~ q with prob min(1, p(x')q(x) / (p(x)q(x'))).
MhOutcome mh_independence_step(const Eigen::VectorXd& state, double current_log_target, const LogTarget& log_target,
                               const TProposal& proposal, Rng& rng);

struct BoundedRWProposal {
  double step = 0.01;
  double lower = -1.0;
  double upper = 1.0;
};

struct BoundedDraw {
  double value = 0.0;
  double log_kappa = 0.0;
};

// log kappa = log[Q(upper - old) - Q(lower - old)] - log[Q(upper - new) - Q(lower - new)]
// with Q the N(0, step^2) distribution function.
double bounded_rw_log_kappa(double old_value, double new_value, const BoundedRWProposal& proposal);
BoundedDraw bounded_rw_propose(double old_value, const BoundedRWProposal& proposal, Rng& rng);

// Random-walk proposal for a slab value: bounded to (lower, upper) with the
// kappa correction, or an unbounded normal walk.
struct SlabProposal {
  bool bounded = true;
  BoundedRWProposal walk;
};

struct SpikeSlabState {
  double value = 0.0;   // latent slab value
  bool included = true;
};

struct SpikeSlabOutcome {
  SpikeSlabState state;
  double log_likelihood = 0.0;  // of the returned state
  bool accepted = false;
  bool value_move = false;  // both old and new included (a pure random-walk move)
  int likelihood_evaluations = 0;
};

// One MH update of (value, indicator). log_lik(value, included) evaluates the
// likelihood with the pair set as given; current_log_lik is its value at the
// old state. With selection off the indicator is held at one and no indicator
// proposal is drawn. delta0/delta1 are the conditional prior probabilities.
SpikeSlabOutcome spike_slab_step(const SpikeSlabState& old_state, double current_log_lik,
                                 const std::function<double(double, bool)>& log_lik,
                                 const std::function<double(double)>& log_prior, double delta0, double delta1,
                                 const SlabProposal& proposal, bool selection, Rng& rng);

// Burn-in step-size tuning toward an acceptance band.
class StepAdapter {
 public:
  explicit StepAdapter(double step, double max_step = 1e9) : step_(step), max_step_(max_step) {}
  double step() const noexcept { return step_; }
  void record(bool accepted) {
    ++proposed_;
    accepted_ += accepted ? 1 : 0;
  }
  // Rescales when enough proposals were seen; resets the window.
  void adapt(double low = 0.25, double high = 0.45, int min_window = 20);

 private:
  double step_;
  double max_step_;
  int proposed_ = 0;
  int accepted_ = 0;
};

// One sweep's chain state.
struct SweepRecord {
  std::size_t sweep = 0;
  bool retained = false;                   // past burn-in and on the thinning grid
  std::vector<std::vector<double>> theta;  // natural-scale margin parameters
  std::vector<double> params;              // effective copula parameters, pair-indexed
  std::vector<double> latent_params;       // slab values (lambda~ / phi~)
  std::vector<std::uint8_t> gamma;
  std::vector<double> correlation;         // Gamma lower triangle; empty for vine models
  double log_likelihood = 0.0;
  std::vector<std::uint8_t> accepted;      // margin blocks, then copula pairs
  Eigen::MatrixXd latents;                 // discrete fits, only when requested
};

}  // namespace bayescop
