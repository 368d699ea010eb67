#include "bayescop/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bayescop/error.hpp"
#include "bayescop/normal.hpp"

namespace bayescop {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_eval(const LogTarget& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isnan(v) ? kNegInf : v;
}

}  // namespace

TProposal::TProposal(Eigen::VectorXd mode, Eigen::MatrixXd scale, double df)
    : mode_(std::move(mode)), scale_(std::move(scale)), df_(df) {
  if (!(df_ > 0.0)) throw DomainError("t proposal: df must be positive");
  if (scale_.rows() != mode_.size() || scale_.cols() != mode_.size())
    throw DomainError("t proposal: scale dimension does not match mode");
  Eigen::LLT<Eigen::MatrixXd> llt(scale_);
  if (llt.info() != Eigen::Success) throw DomainError("t proposal: scale matrix is not positive definite");
  chol_ = llt.matrixL();
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

double TProposal::log_density(const Eigen::VectorXd& x) const {
  const double d = static_cast<double>(mode_.size());
  const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(x - mode_);
  const double q = z.squaredNorm();
  return std::lgamma(0.5 * (df_ + d)) - std::lgamma(0.5 * df_) - 0.5 * d * std::log(df_ * std::numbers::pi) -
         0.5 * log_det_ - 0.5 * (df_ + d) * std::log1p(q / df_);
}

Eigen::VectorXd TProposal::sample(Rng& rng) const {
  Eigen::VectorXd e(mode_.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = std_normal(rng);
  const double w = std::gamma_distribution<double>(0.5 * df_, 2.0)(rng) / df_;
  return mode_ + (chol_ * e) / std::sqrt(w);
}

Eigen::VectorXd finite_difference_gradient(const LogTarget& f, const Eigen::VectorXd& x, double rel_step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double h = rel_step * (1.0 + std::abs(x(i)));
    double fp = kNegInf;
    double fm = kNegInf;
    for (int attempt = 0; attempt < 4; ++attempt) {
      xp(i) = x(i) + h;
      fp = safe_eval(f, xp);
      xp(i) = x(i) - h;
      fm = safe_eval(f, xp);
      if (std::isfinite(fp) && std::isfinite(fm)) break;
      h *= 0.1;
    }
    xp(i) = x(i);
    g(i) = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2.0 * h)
                                                      : std::numeric_limits<double>::quiet_NaN();
  }
  return g;
}

Eigen::MatrixXd finite_difference_hessian(const LogTarget& f, const Eigen::VectorXd& x, double fx, double rel_step) {
  const Eigen::Index d = x.size();
  Eigen::VectorXd h(d);
  for (Eigen::Index i = 0; i < d; ++i) h(i) = rel_step * (1.0 + std::abs(x(i)));
  Eigen::MatrixXd H(d, d);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    xp(i) = x(i) + h(i);
    const double fp = safe_eval(f, xp);
    xp(i) = x(i) - h(i);
    const double fm = safe_eval(f, xp);
    xp(i) = x(i);
    H(i, i) = (fp - 2.0 * fx + fm) / (h(i) * h(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      xp(i) = x(i) + h(i);
      xp(j) = x(j) + h(j);
      const double fpp = safe_eval(f, xp);
      xp(j) = x(j) - h(j);
      const double fpm = safe_eval(f, xp);
      xp(i) = x(i) - h(i);
      const double fmm = safe_eval(f, xp);
      xp(j) = x(j) + h(j);
      const double fmp = safe_eval(f, xp);
      xp(i) = x(i);
      xp(j) = x(j);
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
    }
  }
  return H;
}

namespace {

struct ModeResult {
  Eigen::VectorXd x;
  double fx;
  Eigen::MatrixXd hessian;
};

ModeResult locate_mode(const LogTarget& log_target, const Eigen::VectorXd& theta0, const ModeSearchOptions& options,
                       const std::string& block_name) {
  const Eigen::Index d = theta0.size();
  Eigen::VectorXd x = theta0;
  double fx = safe_eval(log_target, x);
  if (!std::isfinite(fx)) throw DomainError("mode search for " + block_name + ": log target not finite at start");
  Eigen::VectorXd g = finite_difference_gradient(log_target, x, options.gradient_step);
  if (!g.allFinite()) throw DomainError("mode search for " + block_name + ": gradient not finite at start");

  // Inverse Hessian approximation of the negated target.
  const bool warm = options.initial_inverse_hessian.rows() == d && options.initial_inverse_hessian.cols() == d;
  const Eigen::MatrixXd B0 = warm ? options.initial_inverse_hessian : Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd B = B0;
  bool fresh = !warm;
  int stalls = 0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) break;
    const Eigen::VectorXd dir = B * g;
    const double slope = g.dot(dir);
    // A curvature-informed model predicting a negligible gain means the
    // remaining error is left to the Newton polish below.
    if (!fresh && 0.5 * slope <= 1e-12 * (1.0 + std::abs(fx))) break;
    double step = 1.0;
    Eigen::VectorXd xn;
    double fn = kNegInf;
    bool moved = false;
    if (slope > 0.0) {
      for (int k = 0; k < 40; ++k) {
        xn = x + step * dir;
        fn = safe_eval(log_target, xn);
        if (std::isfinite(fn) && fn >= fx + 1e-4 * step * slope) {
          moved = true;
          break;
        }
        step *= 0.5;
      }
    }
    if (!moved) {
      if (fresh) break;
      B.setIdentity();
      fresh = true;
      continue;
    }
    Eigen::VectorXd gn = finite_difference_gradient(log_target, xn, options.gradient_step);
    if (!gn.allFinite()) {
      if (fresh) break;
      B.setIdentity();
      fresh = true;
      continue;
    }
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = g - gn;  // gradient change of the negated target
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) B *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      B = (I - rho * s * y.transpose()) * B * (I - rho * y * s.transpose()) + rho * s * s.transpose();
      fresh = false;
    }
    // Finite-difference noise can keep the gradient above tolerance at the
    // optimum; stop once progress in f is at rounding level.
    const bool stalled = fn - fx <= 1e-12 * (1.0 + std::abs(fx)) ||
                         s.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + x.lpNorm<Eigen::Infinity>());
    x = xn;
    fx = fn;
    g = gn;
    stalls = stalled ? stalls + 1 : 0;
    if (stalls >= 2) break;
  }

  // Newton polish with the numerical Hessian.
  Eigen::MatrixXd H = finite_difference_hessian(log_target, x, fx, options.hessian_step);
  if (H.allFinite()) {
    Eigen::LLT<Eigen::MatrixXd> llt(-H);
    if (llt.info() == Eigen::Success) {
      const Eigen::VectorXd xn = x + llt.solve(g);
      const double fn = safe_eval(log_target, xn);
      if (std::isfinite(fn) && fn >= fx) {
        x = xn;
        fx = fn;
      }
    }
  }
  return {x, fx, H};
}

}  // namespace

Eigen::VectorXd find_mode(const LogTarget& log_target, const Eigen::VectorXd& theta0, const ModeSearchOptions& options,
                          const std::string& block_name) {
  return locate_mode(log_target, theta0, options, block_name).x;
}

TProposal build_t_proposal(const LogTarget& log_target, const Eigen::VectorXd& theta0, const ModeSearchOptions& options,
                           const std::string& block_name) {
  ModeResult r = locate_mode(log_target, theta0, options, block_name);
  // The polish step is tiny, so the Hessian from just before it is reused.
  Eigen::MatrixXd& H = r.hessian;
  if (!H.allFinite()) H = finite_difference_hessian(log_target, r.x, r.fx, options.hessian_step);
  if (!H.allFinite())
    throw DomainError("mode search for " + block_name + ": Hessian not finite at the mode");
  const Eigen::MatrixXd M = -0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  Eigen::VectorXd lam = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = std::max(lam(i), options.eigen_floor);
  Eigen::MatrixXd scale = eig.eigenvectors() * lam.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  scale = 0.5 * (scale + scale.transpose());
  return TProposal(r.x, scale, options.df);
}

MhOutcome mh_independence_step(const Eigen::VectorXd& state, double current_log_target, const LogTarget& log_target,
                               const TProposal& proposal, Rng& rng) {
  const Eigen::VectorXd cand = proposal.sample(rng);
  const double log_u = std::log(uniform_open(rng));
  const double t_new = safe_eval(log_target, cand);
  if (!std::isfinite(t_new)) return {state, current_log_target, false};
  const double log_alpha =
      t_new - current_log_target + proposal.log_density(state) - proposal.log_density(cand);
  if (log_u < log_alpha) return {cand, t_new, true};
  return {state, current_log_target, false};
}

double bounded_rw_log_kappa(double old_value, double new_value, const BoundedRWProposal& p) {
  const double s = p.step;
  return log_normal_interval_prob((p.lower - old_value) / s, (p.upper - old_value) / s) -
         log_normal_interval_prob((p.lower - new_value) / s, (p.upper - new_value) / s);
}

BoundedDraw bounded_rw_propose(double old_value, const BoundedRWProposal& p, Rng& rng) {
  if (!(p.step > 0.0)) throw DomainError("bounded random walk: step must be positive");
  if (!(old_value > p.lower && old_value < p.upper))
    throw DomainError("bounded random walk: current value outside the open bounds");
  double v = sample_truncated_normal(old_value, p.step, p.lower, p.upper, rng);
  // Keep the draw in the open interval.
  if (v <= p.lower) v = std::nextafter(p.lower, p.upper);
  return {v, bounded_rw_log_kappa(old_value, v, p)};
}

SpikeSlabOutcome spike_slab_step(const SpikeSlabState& old_state, double current_log_lik,
                                 const std::function<double(double, bool)>& log_lik,
                                 const std::function<double(double)>& log_prior, double delta0, double delta1,
                                 const SlabProposal& proposal, bool selection, Rng& rng) {
  SpikeSlabOutcome out;
  out.state = old_state;
  out.log_likelihood = current_log_lik;

  const bool new_included = selection ? (uniform01(rng) < 0.5) : true;
  double new_value = 0.0;
  double log_kappa = 0.0;
  if (proposal.bounded) {
    const BoundedDraw draw = bounded_rw_propose(old_state.value, proposal.walk, rng);
    new_value = draw.value;
    log_kappa = draw.log_kappa;
  } else {
    new_value = old_state.value + proposal.walk.step * std_normal(rng);
  }
  const double log_u = std::log(uniform_open(rng));

  double log_alpha = log_prior(new_value) - log_prior(old_state.value) + log_kappa;
  double new_lik = current_log_lik;
  const bool old_included = selection ? old_state.included : true;
  if (!old_included && !new_included) {
    // alpha = 1: the likelihood does not depend on the latent value.
  } else if (!old_included && new_included) {
    new_lik = log_lik(new_value, true);
    ++out.likelihood_evaluations;
    log_alpha += new_lik - current_log_lik + std::log(delta1) - std::log(delta0);
  } else if (old_included && !new_included) {
    new_lik = log_lik(new_value, false);
    ++out.likelihood_evaluations;
    log_alpha += new_lik - current_log_lik + std::log(delta0) - std::log(delta1);
  } else {
    new_lik = log_lik(new_value, true);
    ++out.likelihood_evaluations;
    log_alpha += new_lik - current_log_lik;
    out.value_move = true;
  }
  if (std::isnan(log_alpha)) log_alpha = kNegInf;
  if (log_u < log_alpha) {
    out.state = {new_value, new_included};
    out.log_likelihood = new_lik;
    out.accepted = true;
  }
  return out;
}

void StepAdapter::adapt(double low, double high, int min_window) {
  if (proposed_ < min_window) return;
  const double rate = static_cast<double>(accepted_) / proposed_;
  if (rate < low) {
    step_ *= 0.7;
  } else if (rate > high) {
    step_ = std::min(step_ * 1.4, max_step_);
  }
  proposed_ = 0;
  accepted_ = 0;
}

}  // namespace bayescop
