#include "bayescop/samplers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>

#include "bayescop/dvine.hpp"
#include "bayescop/error.hpp"
#include "bayescop/normal.hpp"

namespace bayescop {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_integer_valued(double y) { return std::isfinite(y) && std::floor(y) == y; }

double normal_log_prior(double x, double var) {
  return -0.5 * x * x / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

// Sample Kendall tau of two columns (O(n^2)).
double empirical_tau(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const Eigen::Index n = a.size();
  if (n < 2) return 0.0;
  double concord = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 1; k < n; ++k) {
      const double s = (a[i] - a[k]) * (b[i] - b[k]);
      concord += s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
    }
  }
  return concord / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double invert_tau(PairFamily family, double tau, bool allow_negative) {
  switch (family) {
    case PairFamily::Clayton: {
      const double t = allow_negative ? std::clamp(tau, -0.9, 0.9) : std::clamp(tau, 0.05, 0.9);
      const double phi = 2.0 * t / (1.0 - t);
      return std::abs(phi) < 1e-3 ? 0.1 : phi;
    }
    case PairFamily::Gumbel: return 1.0 / (1.0 - std::clamp(tau, 0.05, 0.9));
    case PairFamily::Frank: {
      double t = std::clamp(tau, -0.9, 0.9);
      if (std::abs(t) < 0.02) t = t < 0.0 ? -0.02 : 0.02;
      double lo = t > 0.0 ? 1e-6 : -200.0;
      double hi = t > 0.0 ? 200.0 : -1e-6;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (*kendall_tau(PairFamily::Frank, mid) < t) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      return 0.5 * (lo + hi);
    }
    default: return independence_parameter(family);
  }
}

struct MarginBlock {
  std::vector<Eigen::Index> coords;
  std::optional<TProposal> proposal;
  Eigen::VectorXd last_mode;
};

// Distinct support points of a discrete column and each row's slot.
struct DiscreteColumn {
  std::vector<double> values;
  std::vector<std::size_t> slot;
};

class Chain {
 public:
  Chain(const FitTask& task, Rng& rng)
      : task_(task),
        rng_(rng),
        n_(static_cast<std::size_t>(task.data.rows())),
        m_(task.dim()),
        npairs_(pair_count(task.dim())),
        discrete_(task.discrete()),
        dvine_(task.copula.kind == CopulaKind::DVine),
        cholesky_(!dvine_ && task.copula.parameterisation == CorrParameterisation::Cholesky),
        selection_(task.copula.selection),
        prior_only_(task.mcmc.prior_only) {
    init_margins();
    if (discrete_) init_discrete();
    init_copula();
    init_copula_data();
    rebuild_model();
    for (std::size_t j = 0; j < m_; ++j) margin_ll_[j] = margin_log_lik(j, margins_[j]);
    copula_ll_ = copula_log_lik(eta_, gamma_);
  }

  ChainStats run(const SweepSink& sink) {
    const McmcSettings& mc = task_.mcmc;
    const std::size_t burn = mc.burn_in_or_default();
    const std::size_t nblocks = total_margin_blocks() + npairs_;
    std::vector<double> accepted(nblocks, 0.0);
    std::size_t counted = 0;

    for (std::size_t sweep = 0; sweep < mc.sweeps; ++sweep) {
      std::vector<std::uint8_t> flags;
      flags.reserve(nblocks);
      const bool refresh = mc.proposal_refresh <= 1 || sweep % mc.proposal_refresh == 0;

      // Step 1: margins in ascending order.
      for (std::size_t j = 0; j < m_; ++j) {
        for (auto& block : blocks_[j]) flags.push_back(update_margin_block(j, block, refresh) ? 1 : 0);
        if (discrete_) draw_latents(j);
      }

      // Step 2: copula parameters in lexicographic pair order.
      refresh_scatter();
      copula_ll_ = copula_log_lik(eta_, gamma_);
      const bool in_burn = sweep < burn;
      for (std::size_t k = 0; k < npairs_; ++k) flags.push_back(update_pair(k, in_burn) ? 1 : 0);
      rebuild_model();
      if (mc.adapt && in_burn && (sweep + 1) % mc.adapt_interval == 0) {
        for (auto& a : adapters_) a.adapt();
      }
      if (discrete_) check_latent_bounds(sweep);

      SweepRecord rec = snapshot(sweep);
      rec.retained = sweep >= burn && (sweep - burn) % mc.thinning == 0;
      rec.accepted = flags;
      if (sweep >= burn) {
        ++counted;
        for (std::size_t b = 0; b < nblocks; ++b) accepted[b] += flags[b];
      }
      if (sink) sink(rec);
    }

    ChainStats stats;
    stats.sweeps = mc.sweeps;
    stats.acceptance.resize(nblocks, 0.0);
    if (counted > 0) {
      for (std::size_t b = 0; b < nblocks; ++b) stats.acceptance[b] = accepted[b] / static_cast<double>(counted);
    }
    for (const auto& a : adapters_) stats.final_steps.push_back(a.step());
    return stats;
  }

 private:
  // ---- initialisation -------------------------------------------------

  void init_margins() {
    margins_.clear();
    blocks_.assign(m_, {});
    margin_ll_.assign(m_, 0.0);
    for (std::size_t j = 0; j < m_; ++j) {
      const MarginSpec& spec = task_.margins[j];
      const auto jj = static_cast<Eigen::Index>(j);
      std::vector<double> column(task_.data.col(jj).data(), task_.data.col(jj).data() + n_);
      if (spec.family == MarginFamily::Empirical) {
        margins_.push_back(Margin::empirical(column));
      } else if (!spec.params.empty()) {
        margins_.emplace_back(spec.family, spec.params);
      } else {
        margins_.push_back(fit_by_moments(spec.family, column));
      }
      const std::size_t np = margins_[j].param_count();
      std::vector<Eigen::Index> free;
      for (std::size_t p = 0; p < np; ++p) {
        const bool fixed = p < spec.fixed.size() && spec.fixed[p];
        if (!fixed) free.push_back(static_cast<Eigen::Index>(p));
      }
      const std::size_t cap = std::max<std::size_t>(1, task_.mcmc.block_cap);
      for (std::size_t start = 0; start < free.size(); start += cap) {
        MarginBlock block;
        block.coords.assign(free.begin() + static_cast<std::ptrdiff_t>(start),
                            free.begin() + static_cast<std::ptrdiff_t>(std::min(free.size(), start + cap)));
        blocks_[j].push_back(std::move(block));
      }
    }
  }

  void init_discrete() {
    columns_.resize(m_);
    lower_ = Eigen::MatrixXd(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m_));
    upper_ = lower_;
    x_ = Eigen::MatrixXd(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m_));
    for (std::size_t j = 0; j < m_; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      DiscreteColumn& col = columns_[j];
      std::map<double, std::size_t> index;
      for (std::size_t i = 0; i < n_; ++i) index.emplace(task_.data(static_cast<Eigen::Index>(i), jj), 0);
      std::size_t next = 0;
      for (auto& [value, slot] : index) {
        slot = next++;
        col.values.push_back(value);
      }
      col.slot.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) col.slot[i] = index.at(task_.data(static_cast<Eigen::Index>(i), jj));
      std::vector<double> a;
      std::vector<double> b;
      if (!discrete_bounds(margins_[j], col, a, b)) {
        throw ConfigError("column " + std::to_string(j + 1) + ": data impossible under the starting margin");
      }
      for (std::size_t i = 0; i < n_; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double lo = a[col.slot[i]];
        const double hi = b[col.slot[i]];
        lower_(ii, jj) = lo;
        upper_(ii, jj) = hi;
        x_(ii, jj) = initial_latent(lo, hi);
      }
    }
  }

  static double initial_latent(double lo, double hi) {
    const double a = std::max(lo, -6.0);
    const double b = std::min(hi, 6.0);
    double x = 0.0;
    if (a < b) {
      x = 0.5 * (a + b);
    } else if (std::isfinite(lo) && std::isfinite(hi)) {
      x = lo + 0.5 * (hi - lo);
    } else if (std::isfinite(hi)) {
      x = hi - 1.0;
    } else {
      x = lo + 1.0;
    }
    if (!(x >= lo && x < hi)) x = lo;
    return x;
  }

  // Latent bounds Phi^{-1}(F(y-)), Phi^{-1}(F(y)) per support point; false if any cell has zero mass.
  static bool discrete_bounds(const Margin& margin, const DiscreteColumn& col, std::vector<double>& a,
                              std::vector<double>& b) {
    a.resize(col.values.size());
    b.resize(col.values.size());
    for (std::size_t v = 0; v < col.values.size(); ++v) {
      const double fa = margin.cdf_left_limit(col.values[v]);
      const double fb = margin.cdf(col.values[v]);
      if (!(fb > fa)) return false;
      a[v] = normal_quantile(fa);
      b[v] = normal_quantile(fb);
      if (!(b[v] > a[v])) return false;
    }
    return true;
  }

  void init_copula() {
    const CopulaSpec& cs = task_.copula;
    eta_.assign(npairs_, 0.0);
    gamma_.assign(npairs_, 1);
    adapters_.clear();
    for (std::size_t k = 0; k < npairs_; ++k) adapters_.emplace_back(task_.mcmc.rw_step, bounded() ? 1.0 : 1e3);
    if (!cs.gamma.empty()) gamma_ = cs.gamma;
    if (!selection_ && !cs.fixed) std::fill(gamma_.begin(), gamma_.end(), 1);

    std::vector<double> natural;
    if (!cs.params.empty()) {
      natural = cs.params;
    } else if (dvine_ && cs.family != PairFamily::Gaussian) {
      natural.assign(npairs_, independence_parameter(cs.family));
      if (cs.family != PairFamily::Independence) {
        const Eigen::MatrixXd u = data_u();
        for (const auto& [t, s] : pair_order(m_)) {
          const double tau = empirical_tau(u.col(static_cast<Eigen::Index>(t)), u.col(static_cast<Eigen::Index>(s)));
          natural[pair_index(t, s)] = invert_tau(cs.family, tau, cs.allow_negative_clayton);
        }
      }
    } else {
      const CorrelationMatrix g0 = shrunk_score_correlation();
      natural = cholesky_ ? cholesky_from_gamma(g0).r : partials_from_gamma(g0).lambda;
    }
    for (std::size_t k = 0; k < npairs_; ++k) {
      if (dvine_ && cs.family != PairFamily::Gaussian && cs.family != PairFamily::Independence) {
        // Indicators at zero keep a usable slab value.
        double phi = natural[k];
        if (phi == independence_parameter(cs.family) || (cs.family == PairFamily::Clayton && phi <= -1.0)) {
          phi = invert_tau(cs.family, 0.1, false);
        }
        eta_[k] = slab_to_proposal_scale(cs.family, phi);
      } else {
        eta_[k] = natural[k];
      }
    }
  }

  Eigen::MatrixXd data_u() const {
    Eigen::MatrixXd u(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m_));
    for (std::size_t j = 0; j < m_; ++j) {
      for (std::size_t i = 0; i < n_; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        u(ii, jj) = clamp_probability(margins_[j].cdf(task_.data(ii, jj)));
      }
    }
    return u;
  }

  CorrelationMatrix shrunk_score_correlation() const {
    if (n_ < 2) return CorrelationMatrix::identity(m_);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m_));
    if (discrete_) {
      z = x_;
    } else {
      for (std::size_t j = 0; j < m_; ++j) {
        for (std::size_t i = 0; i < n_; ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          const auto jj = static_cast<Eigen::Index>(j);
          z(ii, jj) = margins_[j].normal_score(task_.data(ii, jj));
        }
      }
    }
    const Eigen::RowVectorXd mean = z.colwise().mean();
    z.rowwise() -= mean;
    Eigen::MatrixXd cov = z.transpose() * z;
    Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j) {
      if (!(sd[j] > 0.0)) return CorrelationMatrix::identity(m_);
    }
    Eigen::MatrixXd c = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
    c = 0.95 * c + 0.05 * Eigen::MatrixXd::Identity(c.rows(), c.cols());
    c.diagonal().setOnes();
    return CorrelationMatrix(c);
  }

  // ---- copula parameter helpers ------------------------------------------

  bool bounded() const { return !cholesky_ && (!dvine_ || task_.copula.family == PairFamily::Gaussian); }

  bool copula_frozen() const {
    return task_.copula.fixed || (dvine_ && task_.copula.family == PairFamily::Independence);
  }

  std::vector<double> effective_params(const std::vector<double>& eta, const std::vector<std::uint8_t>& gamma) const {
    std::vector<double> out(npairs_);
    for (std::size_t k = 0; k < npairs_; ++k) {
      if (cholesky_) {
        out[k] = eta[k];
      } else if (dvine_) {
        out[k] = gamma[k] ? slab_from_proposal_scale(task_.copula.family, eta[k])
                          : independence_parameter(task_.copula.family);
      } else {
        out[k] = gamma[k] ? eta[k] : 0.0;
      }
    }
    return out;
  }

  std::vector<double> natural_latent() const {
    std::vector<double> out(npairs_);
    for (std::size_t k = 0; k < npairs_; ++k) {
      out[k] = dvine_ ? slab_from_proposal_scale(task_.copula.family, eta_[k]) : eta_[k];
    }
    return out;
  }

  CorrelationMatrix correlation_of(const std::vector<double>& params) const {
    if (cholesky_) return gamma_from_cholesky(CholeskyParam{m_, params});
    return gamma_from_partials(m_, params);
  }

  double slab_log_prior(double eta) const {
    const CopulaSpec& cs = task_.copula;
    if (cholesky_) return normal_log_prior(eta, cs.cholesky_prior_var);
    if (bounded()) {
      if (!(eta > -1.0 && eta < 1.0)) return kNegInf;
      switch (cs.slab_prior.kind) {
        case SlabPrior::Kind::Uniform: return -std::numbers::ln2;
        case SlabPrior::Kind::Beta: {
          const double a = cs.slab_prior.a;
          const double b = cs.slab_prior.b;
          return (a - 1.0) * std::log(0.5 * (eta + 1.0)) + (b - 1.0) * std::log(0.5 * (1.0 - eta)) -
                 (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)) - std::numbers::ln2;
        }
        case SlabPrior::Kind::Normal: return normal_log_prior(eta, cs.slab_prior.variance);
      }
    }
    if (cs.family == PairFamily::Clayton && !cs.allow_negative_clayton && !(eta > 0.0)) return kNegInf;
    return normal_log_prior(eta, cs.slab_prior.variance);
  }

  // Copula data that Step 2 conditions on: scores or latents with their
  // scatter matrix (Gaussian), or the copula data u stored m x n (D-vine).
  void init_copula_data() {
    if (dvine_) {
      ut_ = data_u().transpose();
      return;
    }
    if (!discrete_) {
      x_ = Eigen::MatrixXd(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m_));
      for (std::size_t j = 0; j < m_; ++j) update_column(j);
    }
    refresh_scatter();
  }

  void refresh_scatter() {
    if (!dvine_) scatter_ = x_.transpose() * x_;
  }

  // Recompute the copula data of column j after its margin changed.
  void update_column(std::size_t j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (dvine_) {
      for (std::size_t i = 0; i < n_; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        ut_(jj, ii) = clamp_probability(margins_[j].cdf(task_.data(ii, jj)));
      }
    } else if (!discrete_) {
      for (std::size_t i = 0; i < n_; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        x_(ii, jj) = margins_[j].normal_score(task_.data(ii, jj));
      }
    }
  }

  double copula_log_lik(const std::vector<double>& eta, const std::vector<std::uint8_t>& gamma) const {
    if (prior_only_) return 0.0;
    const std::vector<double> params = effective_params(eta, gamma);
    try {
      if (dvine_) {
        const DVineModel model(m_, task_.copula.family, params, gamma);
        double total = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
          const auto col = ut_.col(static_cast<Eigen::Index>(i));
          total += model.log_density(std::span<const double>(col.data(), m_));
          if (!std::isfinite(total)) return kNegInf;
        }
        return total;
      }
      const GaussianCopulaModel model(correlation_of(params));
      if (discrete_) return augmented_log_lik(model);
      return model.log_density_from_scatter(scatter_, n_);
    } catch (const DomainError&) {
      return kNegInf;
    }
  }

  // log N(x_i; 0, Gamma) summed over rows, from the scatter matrix.
  double augmented_log_lik(const GaussianCopulaModel& model) const {
    const double n = static_cast<double>(n_);
    const double quad = (model.precision().cwiseProduct(scatter_)).sum();
    return -0.5 * n * static_cast<double>(m_) * std::log(2.0 * std::numbers::pi) - 0.5 * n * model.log_det() -
           0.5 * quad;
  }

  void rebuild_model() {
    const std::vector<double> params = effective_params(eta_, gamma_);
    if (dvine_) {
      vine_.emplace(m_, task_.copula.family, params, gamma_);
    } else {
      gauss_.emplace(correlation_of(params));
    }
  }

  bool update_pair(std::size_t k, bool in_burn) {
    if (copula_frozen()) return false;
    std::size_t others = 0;
    for (std::size_t q = 0; q < npairs_; ++q) others += (q != k && gamma_[q]) ? 1 : 0;
    const auto [delta0, delta1] = conditional_inclusion(others, npairs_);

    std::vector<double> trial_eta = eta_;
    std::vector<std::uint8_t> trial_gamma = gamma_;
    const auto log_lik = [&](double value, bool included) {
      trial_eta[k] = value;
      trial_gamma[k] = included ? 1 : 0;
      return copula_log_lik(trial_eta, trial_gamma);
    };
    const auto log_prior = [&](double value) { return slab_log_prior(value); };

    SlabProposal proposal;
    proposal.bounded = bounded();
    proposal.walk.step = adapters_[k].step();
    const bool select = selection_ && !cholesky_;
    const SpikeSlabOutcome out = spike_slab_step({eta_[k], gamma_[k] != 0}, copula_ll_, log_lik, log_prior, delta0,
                                                 delta1, proposal, select, rng_);
    if (in_burn && out.value_move) adapters_[k].record(out.accepted);
    if (out.accepted) {
      eta_[k] = out.state.value;
      gamma_[k] = out.state.included ? 1 : 0;
      copula_ll_ = out.log_likelihood;
    }
    return out.accepted;
  }

  // ---- margins ------------------------------------------------------------

  std::size_t total_margin_blocks() const {
    std::size_t total = 0;
    for (const auto& b : blocks_) total += b.size();
    return total;
  }

  double margin_log_lik(std::size_t j, const Margin& margin) const {
    if (prior_only_ || discrete_) return 0.0;
    const auto jj = static_cast<Eigen::Index>(j);
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) total += margin.log_density(task_.data(static_cast<Eigen::Index>(i), jj));
    return total;
  }

  // log pi(theta_j | rest) up to a constant, on the unconstrained scale.
  double margin_target(std::size_t j, const Eigen::VectorXd& eta) const {
    std::optional<Margin> cand;
    try {
      cand.emplace(margins_[j].from_unconstrained(eta));
    } catch (const DomainError&) {
      return kNegInf;
    }
    const double prior = cand->log_prior_unconstrained(eta, task_.margin_prior);
    if (!std::isfinite(prior)) return kNegInf;
    if (prior_only_) return prior;
    const auto jj = static_cast<Eigen::Index>(j);

    if (discrete_) {
      std::vector<double> a;
      std::vector<double> b;
      if (!discrete_bounds(*cand, columns_[j], a, b)) return kNegInf;
      const double omega = gauss_->precision()(jj, jj);
      const double sd = 1.0 / std::sqrt(omega);
      double total = prior;
      for (std::size_t i = 0; i < n_; ++i) {
        const double mu = -cross_[static_cast<Eigen::Index>(i)] / omega;
        const std::size_t v = columns_[j].slot[i];
        total += log_normal_interval_prob((a[v] - mu) / sd, (b[v] - mu) / sd);
        if (!std::isfinite(total)) return kNegInf;
      }
      return total;
    }

    double total = prior;
    if (dvine_) {
      std::vector<double> u(m_);
      for (std::size_t i = 0; i < n_; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double y = task_.data(ii, jj);
        total += cand->log_density(y);
        for (std::size_t q = 0; q < m_; ++q) u[q] = ut_(static_cast<Eigen::Index>(q), ii);
        u[j] = clamp_probability(cand->cdf(y));
        total += vine_->log_density(u);
        if (!std::isfinite(total)) return kNegInf;
      }
      return total;
    }

    const double omega_excess = gauss_->precision()(jj, jj) - 1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double y = task_.data(ii, jj);
      const double x = cand->normal_score(y);
      total += cand->log_density(y) - 0.5 * (omega_excess * x * x + 2.0 * x * cross_[ii]);
      if (!std::isfinite(total)) return kNegInf;
    }
    return total;
  }

  // b_i = sum_{k != j} Omega_jk x_ik for the current scores/latents.
  void prepare_cross_terms(std::size_t j) {
    if (prior_only_ || dvine_) return;
    const auto jj = static_cast<Eigen::Index>(j);
    Eigen::VectorXd w = gauss_->precision().col(jj);
    w[jj] = 0.0;
    cross_ = x_ * w;
  }

  bool update_margin_block(std::size_t j, MarginBlock& block, bool refresh) {
    prepare_cross_terms(j);
    const Eigen::VectorXd base = margins_[j].to_unconstrained();
    const auto d = static_cast<Eigen::Index>(block.coords.size());
    Eigen::VectorXd current(d);
    for (Eigen::Index c = 0; c < d; ++c) current[c] = base[block.coords[static_cast<std::size_t>(c)]];
    const LogTarget target = [&](const Eigen::VectorXd& v) {
      Eigen::VectorXd full = base;
      for (Eigen::Index c = 0; c < d; ++c) full[block.coords[static_cast<std::size_t>(c)]] = v[c];
      return margin_target(j, full);
    };
    const double current_value = target(current);

    if (refresh || !block.proposal) {
      ModeSearchOptions opts;
      opts.df = task_.mcmc.proposal_df;
      Eigen::VectorXd start = current;
      if (block.last_mode.size() == d && std::isfinite(target(block.last_mode))) start = block.last_mode;
      if (block.proposal) opts.initial_inverse_hessian = block.proposal->scale();
      const std::string name = "margin " + std::to_string(j + 1) + " (" + std::string(to_string(margins_[j].family())) + ")";
      try {
        block.proposal.emplace(build_t_proposal(target, start, opts, name));
        block.last_mode = block.proposal->mode();
      } catch (const DomainError&) {
        if (!block.proposal) throw;
      }
    }

    const MhOutcome out = mh_independence_step(current, current_value, target, *block.proposal, rng_);
    if (!out.accepted) return false;
    Eigen::VectorXd full = base;
    for (Eigen::Index c = 0; c < d; ++c) full[block.coords[static_cast<std::size_t>(c)]] = out.state[c];
    margins_[j] = margins_[j].from_unconstrained(full);
    margin_ll_[j] = margin_log_lik(j, margins_[j]);
    update_column(j);
    if (discrete_) {
      std::vector<double> a;
      std::vector<double> b;
      discrete_bounds(margins_[j], columns_[j], a, b);
      const auto jj = static_cast<Eigen::Index>(j);
      for (std::size_t i = 0; i < n_; ++i) {
        lower_(static_cast<Eigen::Index>(i), jj) = a[columns_[j].slot[i]];
        upper_(static_cast<Eigen::Index>(i), jj) = b[columns_[j].slot[i]];
      }
    }
    return true;
  }

  // Step 1(b): x_ij | rest from the conditional normal truncated to [A_ij, B_ij).
  void draw_latents(std::size_t j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const Eigen::MatrixXd& omega = gauss_->precision();
    Eigen::VectorXd w = omega.col(jj);
    w[jj] = 0.0;
    const Eigen::VectorXd cross = x_ * w;
    const double sd = 1.0 / std::sqrt(omega(jj, jj));
    for (std::size_t i = 0; i < n_; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double mu = -cross[ii] / omega(jj, jj);
      x_(ii, jj) = sample_truncated_normal(mu, sd, lower_(ii, jj), upper_(ii, jj), rng_);
    }
  }

  void check_latent_bounds(std::size_t sweep) const {
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      for (Eigen::Index i = 0; i < x_.rows(); ++i) {
        if (!(x_(i, j) >= lower_(i, j) && x_(i, j) < upper_(i, j))) {
          throw SamplerInvariantError("latent (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) +
                                      ") outside its bounds at sweep " + std::to_string(sweep));
        }
      }
    }
  }

  SweepRecord snapshot(std::size_t sweep) const {
    SweepRecord rec;
    rec.sweep = sweep;
    for (const auto& mg : margins_) rec.theta.push_back(mg.family() == MarginFamily::Empirical ? std::vector<double>{} : mg.params());
    rec.params = effective_params(eta_, gamma_);
    rec.latent_params = natural_latent();
    rec.gamma = gamma_;
    if (!dvine_) {
      rec.correlation = gauss_->corr().lower_triangle();
    } else if (task_.copula.family == PairFamily::Gaussian || task_.copula.family == PairFamily::Independence) {
      std::vector<double> lam(npairs_, 0.0);
      if (task_.copula.family == PairFamily::Gaussian) lam = rec.params;
      rec.correlation = gamma_from_partials(m_, lam).lower_triangle();
    }
    double total = copula_ll_;
    for (double v : margin_ll_) total += v;
    rec.log_likelihood = total;
    if (discrete_ && task_.mcmc.store_latents) rec.latents = x_;
    return rec;
  }

  const FitTask& task_;
  Rng& rng_;
  std::size_t n_;
  std::size_t m_;
  std::size_t npairs_;
  bool discrete_;
  bool dvine_;
  bool cholesky_;
  bool selection_;
  bool prior_only_;

  std::vector<Margin> margins_;
  std::vector<std::vector<MarginBlock>> blocks_;
  std::vector<double> margin_ll_;

  std::vector<double> eta_;
  std::vector<std::uint8_t> gamma_;
  std::vector<StepAdapter> adapters_;
  double copula_ll_ = 0.0;

  std::optional<GaussianCopulaModel> gauss_;
  std::optional<DVineModel> vine_;
  Eigen::MatrixXd x_;        // scores (continuous Gaussian) or latents (discrete), n x m
  Eigen::MatrixXd scatter_;
  Eigen::MatrixXd ut_;       // copula data for the D-vine, m x n
  Eigen::VectorXd cross_;

  std::vector<DiscreteColumn> columns_;
  Eigen::MatrixXd lower_;
  Eigen::MatrixXd upper_;
};

// Richtmyer lattice generators (square roots of primes) and fixed shifts.
constexpr std::array<double, 11> kSqrtPrimes = {1.4142135623730951, 1.7320508075688772, 2.23606797749979,
                                                2.6457513110645907, 3.3166247903554,    3.605551275463989,
                                                4.123105625617661,  4.358898943540674,  4.795831523312719,
                                                5.385164807134504,  5.5677643628300215};

}  // namespace

bool FitTask::discrete() const {
  return std::any_of(margins.begin(), margins.end(), [](const MarginSpec& s) {
    return s.family == MarginFamily::Bernoulli || s.family == MarginFamily::Poisson ||
           s.family == MarginFamily::NegativeBinomial;
  });
}

void validate_task(const FitTask& task) {
  const std::size_t m = task.dim();
  if (m < 2) throw ConfigError("at least two data columns are required");
  if (task.margins.size() != m) {
    throw ConfigError("margin count (" + std::to_string(task.margins.size()) + ") does not match data columns (" +
                      std::to_string(m) + ")");
  }
  if (task.data.rows() == 0 && !task.mcmc.prior_only) throw ConfigError("data has no rows");
  if (!task.data.allFinite()) throw ConfigError("data contains non-finite values");
  const bool discrete = task.discrete();
  for (std::size_t j = 0; j < m; ++j) {
    const MarginSpec& s = task.margins[j];
    const bool dj = s.family == MarginFamily::Bernoulli || s.family == MarginFamily::Poisson ||
                    s.family == MarginFamily::NegativeBinomial;
    if (discrete && !dj) throw ConfigError("mixed discrete and continuous margins are not supported");
    if (dj) {
      for (Eigen::Index i = 0; i < task.data.rows(); ++i) {
        const double y = task.data(i, static_cast<Eigen::Index>(j));
        if (!is_integer_valued(y) || y < 0.0 || (s.family == MarginFamily::Bernoulli && y > 1.0)) {
          throw ConfigError("column " + std::to_string(j + 1) + ", row " + std::to_string(i + 1) + ": value " +
                            std::to_string(y) + " outside the support of " + std::string(to_string(s.family)));
        }
      }
    }
    if (!s.params.empty() && s.family != MarginFamily::Empirical) {
      try {
        Margin(s.family, s.params);
      } catch (const DomainError& e) {
        throw ConfigError("margin " + std::to_string(j + 1) + ": " + e.what());
      }
    }
  }
  const CopulaSpec& c = task.copula;
  const std::size_t np = pair_count(m);
  if (!c.params.empty() && c.params.size() != np) {
    throw ConfigError("copula parameter count must be " + std::to_string(np));
  }
  if (!c.gamma.empty() && c.gamma.size() != np) throw ConfigError("indicator count must be " + std::to_string(np));
  if (c.fixed && c.params.empty()) throw ConfigError("a fixed copula needs its parameters");
  if (c.kind == CopulaKind::DVine && discrete) {
    throw ConfigError("the d-vine scheme requires continuous margins");
  }
  if (c.kind == CopulaKind::Gaussian && c.selection && c.parameterisation == CorrParameterisation::Cholesky) {
    throw ConfigError("selection requires the partial-correlation parameterisation");
  }
  const bool bounded = c.kind == CopulaKind::Gaussian ? c.parameterisation == CorrParameterisation::Partials
                                                      : c.family == PairFamily::Gaussian;
  if (!bounded && c.kind == CopulaKind::DVine && c.family != PairFamily::Independence &&
      c.slab_prior.kind != SlabPrior::Kind::Normal) {
    throw ConfigError("pair family " + std::string(to_string(c.family)) + " needs a normal slab prior");
  }
  if (c.slab_prior.kind == SlabPrior::Kind::Beta && !(c.slab_prior.a > 0.0 && c.slab_prior.b > 0.0)) {
    throw ConfigError("beta slab prior needs positive shape parameters");
  }
  if (!(c.slab_prior.variance > 0.0) || !(c.cholesky_prior_var > 0.0)) {
    throw ConfigError("prior variances must be positive");
  }
  if (!c.params.empty()) {
    try {
      if (c.kind == CopulaKind::DVine) {
        std::vector<std::uint8_t> g = c.gamma.empty() ? std::vector<std::uint8_t>(np, 1) : c.gamma;
        DVineModel(m, c.family, c.params, g);
      } else if (c.parameterisation == CorrParameterisation::Cholesky) {
        gamma_from_cholesky(CholeskyParam{m, c.params});
      } else {
        std::vector<double> lam = c.params;
        for (std::size_t k = 0; k < np && !c.gamma.empty(); ++k) lam[k] = c.gamma[k] ? lam[k] : 0.0;
        gamma_from_partials(m, lam);
      }
    } catch (const DomainError& e) {
      throw ConfigError(std::string("copula parameters: ") + e.what());
    }
  }
  const McmcSettings& mc = task.mcmc;
  if (mc.sweeps == 0) throw ConfigError("sweeps must be positive");
  if (mc.burn_in_or_default() > mc.sweeps) throw ConfigError("burn-in exceeds the number of sweeps");
  if (mc.thinning == 0) throw ConfigError("thinning must be at least 1");
  if (!(mc.rw_step > 0.0)) throw ConfigError("random-walk step must be positive");
  if (!(mc.proposal_df > 0.0)) throw ConfigError("proposal df must be positive");
  if (mc.adapt_interval == 0) throw ConfigError("adapt interval must be positive");
}

ChainStats run_gaussian_continuous(const FitTask& task, Rng& rng, const SweepSink& sink) {
  validate_task(task);
  if (task.discrete()) throw ConfigError("continuous scheme requested for discrete margins");
  if (task.copula.kind != CopulaKind::Gaussian) throw ConfigError("gaussian scheme requested for a d-vine model");
  FitTask t = task;
  t.copula.selection = false;
  Chain chain(t, rng);
  return chain.run(sink);
}

ChainStats run_gaussian_selection(const FitTask& task, Rng& rng, const SweepSink& sink) {
  validate_task(task);
  if (task.discrete()) throw ConfigError("continuous scheme requested for discrete margins");
  if (task.copula.kind != CopulaKind::Gaussian || task.copula.parameterisation != CorrParameterisation::Partials) {
    throw ConfigError("gaussian selection needs a gaussian copula with partial correlations");
  }
  Chain chain(task, rng);
  return chain.run(sink);
}

ChainStats run_dvine_selection(const FitTask& task, Rng& rng, const SweepSink& sink) {
  validate_task(task);
  if (task.copula.kind != CopulaKind::DVine) throw ConfigError("d-vine scheme requested for a gaussian model");
  Chain chain(task, rng);
  return chain.run(sink);
}

ChainStats run_gaussian_discrete(const FitTask& task, Rng& rng, const SweepSink& sink) {
  validate_task(task);
  if (!task.discrete()) throw ConfigError("discrete scheme requested for continuous margins");
  if (task.copula.kind != CopulaKind::Gaussian) throw ConfigError("the discrete scheme needs a gaussian copula");
  Chain chain(task, rng);
  return chain.run(sink);
}

ChainStats run_chain(const FitTask& task, Rng& rng, const SweepSink& sink) {
  if (task.copula.kind == CopulaKind::DVine) return run_dvine_selection(task, rng, sink);
  if (task.discrete()) return run_gaussian_discrete(task, rng, sink);
  if (task.copula.selection) return run_gaussian_selection(task, rng, sink);
  return run_gaussian_continuous(task, rng, sink);
}

std::vector<SweepRecord> collect_retained(const FitTask& task, Rng& rng) {
  std::vector<SweepRecord> out;
  run_chain(task, rng, [&](const SweepRecord& r) {
    if (r.retained) out.push_back(r);
  });
  return out;
}

double replay_log_likelihood(const FitTask& task, const SweepRecord& record) {
  const std::size_t m = task.dim();
  const auto n = task.data.rows();
  std::vector<Margin> margins;
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (task.margins[j].family == MarginFamily::Empirical) {
      margins.push_back(Margin::empirical(std::vector<double>(task.data.col(jj).data(), task.data.col(jj).data() + n)));
    } else {
      margins.emplace_back(task.margins[j].family, record.theta[j]);
    }
  }
  if (task.mcmc.prior_only) return 0.0;
  if (task.copula.kind == CopulaKind::DVine) {
    const DVineModel model(m, task.copula.family, record.params, record.gamma);
    double total = 0.0;
    std::vector<double> u(m);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double y = task.data(i, static_cast<Eigen::Index>(j));
        total += margins[j].log_density(y);
        u[j] = clamp_probability(margins[j].cdf(y));
      }
      total += model.log_density(u);
    }
    return total;
  }
  const CorrelationMatrix corr = CorrelationMatrix::from_lower_triangle(m, record.correlation);
  const GaussianCopulaModel model(corr);
  if (task.discrete()) {
    if (record.latents.rows() != n) throw InferenceError("replay of a discrete fit needs stored latents");
    const Eigen::MatrixXd s = record.latents.transpose() * record.latents;
    const double quad = model.precision().cwiseProduct(s).sum();
    const double nn = static_cast<double>(n);
    return -0.5 * nn * static_cast<double>(m) * std::log(2.0 * std::numbers::pi) - 0.5 * nn * model.log_det() -
           0.5 * quad;
  }
  double total = 0.0;
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    for (Eigen::Index i = 0; i < n; ++i) {
      total += margins[j].log_density(task.data(i, jj));
      x(i, jj) = margins[j].normal_score(task.data(i, jj));
    }
  }
  return total + model.log_density_from_scatter(x.transpose() * x, static_cast<std::size_t>(n));
}

double gaussian_rectangle_probability(const CorrelationMatrix& corr, const Eigen::VectorXd& lower,
                                      const Eigen::VectorXd& upper) {
  const auto m = static_cast<Eigen::Index>(corr.dim());
  if (lower.size() != m || upper.size() != m) throw DomainError("rectangle probability: dimension mismatch");
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!(upper[j] > lower[j])) return 0.0;
  }
  if (m == 1) return normal_cdf(upper[0]) - normal_cdf(lower[0]);
  if (m == 2) {
    const double r = corr(1, 0);
    return bivariate_normal_cdf(upper[0], upper[1], r) - bivariate_normal_cdf(lower[0], upper[1], r) -
           bivariate_normal_cdf(upper[0], lower[1], r) + bivariate_normal_cdf(lower[0], lower[1], r);
  }
  if (m > 12) throw DomainError("rectangle probability: dimension above 12");
  const Eigen::MatrixXd l = corr.matrix().llt().matrixL();
  constexpr int kShifts = 8;
  constexpr int kPoints = 2048;
  Rng shift_rng(0x5eedULL);
  std::vector<double> y(static_cast<std::size_t>(m));
  double total = 0.0;
  for (int sh = 0; sh < kShifts; ++sh) {
    std::vector<double> shift(static_cast<std::size_t>(m));
    for (auto& v : shift) v = uniform01(shift_rng);
    for (int p = 1; p <= kPoints; ++p) {
      double f = 1.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < i; ++k) s += l(i, k) * y[static_cast<std::size_t>(k)];
        const double d = normal_cdf((lower[i] - s) / l(i, i));
        const double e = normal_cdf((upper[i] - s) / l(i, i));
        f *= e - d;
        if (f <= 0.0) break;
        if (i + 1 < m) {
          double w = std::fmod(p * kSqrtPrimes[static_cast<std::size_t>(i)] + shift[static_cast<std::size_t>(i)], 1.0);
          w = std::abs(2.0 * w - 1.0);  // baker's transform
          const double q = std::clamp(d + w * (e - d), 1e-300, 1.0 - 1e-16);
          y[static_cast<std::size_t>(i)] = normal_quantile(q);
        }
      }
      total += std::max(f, 0.0);
    }
  }
  return total / (static_cast<double>(kShifts) * kPoints);
}

namespace {

template <typename CellProbability>
double discrete_loglik(const std::vector<Margin>& margins, const Eigen::MatrixXd& data, std::size_t dim,
                       CellProbability&& cell) {
  const auto m = static_cast<Eigen::Index>(dim);
  if (data.cols() != m || margins.size() != dim) throw DomainError("exact likelihood: dimension mismatch");
  if (dim > 12) throw DomainError("exact likelihood: dimension above 12");
  for (const auto& mg : margins) {
    if (!mg.is_discrete()) throw DomainError("exact likelihood requires discrete margins");
  }
  std::map<std::vector<double>, double> cache;
  double total = 0.0;
  Eigen::VectorXd a(m);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    std::vector<double> key(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) key[static_cast<std::size_t>(j)] = data(i, j);
    auto it = cache.find(key);
    if (it == cache.end()) {
      for (Eigen::Index j = 0; j < m; ++j) {
        a[j] = margins[static_cast<std::size_t>(j)].cdf_left_limit(data(i, j));
        b[j] = margins[static_cast<std::size_t>(j)].cdf(data(i, j));
      }
      const double p = cell(a, b);
      if (p < -1e-12) {
        throw DomainError("exact likelihood: negative rectangle probability at observation " + std::to_string(i + 1));
      }
      it = cache.emplace(key, p > 0.0 ? std::log(p) : kNegInf).first;
    }
    total += it->second;
  }
  return total;
}

}  // namespace

double exact_discrete_loglik(const GaussianCopulaModel& model, const std::vector<Margin>& margins,
                             const Eigen::MatrixXd& data) {
  return discrete_loglik(margins, data, model.dim(), [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd lo(a.size());
    Eigen::VectorXd hi(b.size());
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      lo[j] = normal_quantile(a[j]);
      hi[j] = normal_quantile(b[j]);
    }
    return gaussian_rectangle_probability(model.corr(), lo, hi);
  });
}

double exact_discrete_loglik(const PairCopula& copula, const std::vector<Margin>& margins,
                             const Eigen::MatrixXd& data) {
  return discrete_loglik(margins, data, 2, [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return copula.cdf(b[0], b[1]) - copula.cdf(a[0], b[1]) - copula.cdf(b[0], a[1]) + copula.cdf(a[0], a[1]);
  });
}

double slab_to_proposal_scale(PairFamily family, double phi) {
  switch (family) {
    case PairFamily::Clayton: return std::log1p(phi);
    case PairFamily::Gumbel: return std::log(phi - 1.0);
    default: return phi;
  }
}

double slab_from_proposal_scale(PairFamily family, double eta) {
  switch (family) {
    case PairFamily::Clayton: return std::expm1(eta);
    case PairFamily::Gumbel: return 1.0 + std::exp(eta);
    default: return eta;
  }
}

}  // namespace bayescop
