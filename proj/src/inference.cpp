#include "bayescop/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bayescop/corr_param.hpp"
#include "bayescop/dvine.hpp"
#include "bayescop/error.hpp"
#include "bayescop/gaussian_copula.hpp"

namespace bayescop {

namespace {

std::vector<double> extract(const std::vector<SweepRecord>& records, const Selector& selector) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(selector(r));
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<const SweepRecord*> subset(const std::vector<SweepRecord>& records, std::size_t max_records) {
  std::vector<const SweepRecord*> out;
  if (max_records == 0 || records.size() <= max_records) {
    for (const auto& r : records) out.push_back(&r);
    return out;
  }
  for (std::size_t k = 0; k < max_records; ++k) out.push_back(&records[k * records.size() / max_records]);
  return out;
}

}  // namespace

double posterior_mean(const std::vector<SweepRecord>& records, const Selector& selector) {
  if (records.empty()) throw InferenceError("posterior mean of an empty stream");
  return mean_of(extract(records, selector));
}

Eigen::MatrixXd posterior_mean_correlation(const std::vector<SweepRecord>& records) {
  if (records.empty()) throw InferenceError("posterior mean of an empty stream");
  const std::size_t m = dimension_from_pair_count(records.front().correlation.size());
  const auto mm = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(mm, mm);
  for (const auto& r : records) {
    if (r.correlation.size() != pair_count(m)) throw InferenceError("records carry no correlation matrix");
    for (const auto& [t, s] : pair_order(m)) {
      acc(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) += r.correlation[pair_index(t, s)];
    }
  }
  acc /= static_cast<double>(records.size());
  for (Eigen::Index i = 0; i < mm; ++i) {
    acc(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) acc(j, i) = acc(i, j);
  }
  return acc;
}

Interval probability_interval(std::vector<double> values, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InferenceError("interval level must lie in (0,1)");
  const std::size_t j = values.size();
  const auto required = static_cast<std::size_t>(std::ceil(2.0 / level));
  if (j < required || j == 0) {
    throw InferenceError("probability interval at level " + std::to_string(level) + " needs at least " +
                         std::to_string(required) + " iterates, got " + std::to_string(j));
  }
  std::sort(values.begin(), values.end());
  const auto drop = static_cast<std::size_t>(std::floor(level * static_cast<double>(j) / 2.0));
  return {values[drop], values[j - 1 - drop], level};
}

Interval probability_interval(const std::vector<SweepRecord>& records, const Selector& selector, double level) {
  return probability_interval(extract(records, selector), level);
}

double inclusion_probability(const std::vector<SweepRecord>& records, std::size_t t, std::size_t s) {
  if (records.empty()) throw InferenceError("inclusion probability of an empty stream");
  if (!(s < t)) throw InferenceError("inclusion probability: pair needs s < t");
  const std::size_t k = pair_index(t, s);
  double total = 0.0;
  for (const auto& r : records) {
    if (k >= r.gamma.size()) throw InferenceError("inclusion probability: pair outside the model");
    total += r.gamma[k] ? 1.0 : 0.0;
  }
  return total / static_cast<double>(records.size());
}

double batch_means_se(const std::vector<double>& values, std::size_t batches) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const std::size_t b = std::min(batches, n);
  if (b < 2) return 0.0;
  const std::size_t size = n / b;
  std::vector<double> means;
  for (std::size_t k = 0; k < b; ++k) {
    double acc = 0.0;
    for (std::size_t i = k * size; i < (k + 1) * size; ++i) acc += values[i];
    means.push_back(acc / static_cast<double>(size));
  }
  const double grand = mean_of(means);
  double ss = 0.0;
  for (double v : means) ss += (v - grand) * (v - grand);
  return std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
}

Eigen::VectorXd sample_copula(const CopulaDescription& desc, const SweepRecord& record, Rng& rng) {
  if (desc.kind == CopulaKind::Gaussian) {
    return GaussianCopulaModel(CorrelationMatrix::from_lower_triangle(desc.dim, record.correlation)).sample_u(rng);
  }
  return DVineModel(desc.dim, desc.family, record.params, record.gamma).sample_u(rng);
}

std::vector<DependenceEstimate> dependence_by_simulation(const std::vector<SweepRecord>& records,
                                                         const CopulaDescription& desc,
                                                         const std::vector<PairIndex>& pairs, Rng& rng,
                                                         const SimulationOptions& options) {
  const auto used = subset(records, options.max_records);
  const std::size_t k_draws = std::max<std::size_t>(1, options.draws_per_sweep);
  std::vector<std::vector<double>> cb(pairs.size());
  std::vector<std::vector<double>> prod(pairs.size());
  std::vector<DependenceEstimate> out(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    out[p].t = pairs[p].t;
    out[p].s = pairs[p].s;
  }

  for (const SweepRecord* rec : used) {
    std::optional<GaussianCopulaModel> gauss;
    std::optional<DVineModel> vine;
    if (desc.kind == CopulaKind::Gaussian) {
      gauss.emplace(CorrelationMatrix::from_lower_triangle(desc.dim, rec->correlation));
    } else {
      vine.emplace(desc.dim, desc.family, rec->params, rec->gamma);
    }
    std::vector<Eigen::VectorXd> draws;
    for (std::size_t k = 0; k < k_draws; ++k) draws.push_back(gauss ? gauss->sample_u(rng) : vine->sample_u(rng));

    // Inner sample, shared by all pairs of this sweep that need it.
    std::vector<Eigen::VectorXd> inner;
    const auto need_inner = [&](const PairIndex& pr) { return vine && pr.t - pr.s > 1; };
    if (std::any_of(pairs.begin(), pairs.end(), need_inner)) {
      for (std::size_t k = 0; k < options.inner_draws; ++k) inner.push_back(vine->sample_u(rng));
    }

    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto t = static_cast<Eigen::Index>(pairs[p].t);
      const auto s = static_cast<Eigen::Index>(pairs[p].s);
      double acc_c = 0.0;
      double acc_p = 0.0;
      for (const auto& u : draws) {
        double c = 0.0;
        if (gauss) {
          c = gauss->bivariate_margin_cdf(pairs[p].t, pairs[p].s, u[t], u[s]);
        } else if (!need_inner(pairs[p])) {
          c = vine->pair(pairs[p].t, pairs[p].s).cdf(u[t], u[s]);
        } else {
          double hits = 0.0;
          for (const auto& w : inner) hits += (w[t] <= u[t] && w[s] <= u[s]) ? 1.0 : 0.0;
          c = hits / static_cast<double>(inner.size());
          out[p].approximate = true;
        }
        acc_c += c;
        acc_p += u[t] * u[s];
      }
      cb[p].push_back(acc_c / static_cast<double>(k_draws));
      prod[p].push_back(acc_p / static_cast<double>(k_draws));
    }
  }

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (cb[p].empty()) continue;
    out[p].tau = 4.0 * mean_of(cb[p]) - 1.0;
    out[p].tau_se = 4.0 * batch_means_se(cb[p]);
    out[p].rho_s = 12.0 * mean_of(prod[p]) - 3.0;
    out[p].rho_s_se = 12.0 * batch_means_se(prod[p]);
  }
  return out;
}

ScalarSummary closed_form_tau_posterior(const std::vector<SweepRecord>& records, PairFamily family, std::size_t t,
                                        std::size_t s, double level) {
  if (records.empty()) throw InferenceError("closed-form tau of an empty stream");
  if (family == PairFamily::Gaussian) throw InferenceError("no closed-form tau is used for the gaussian family");
  if (t != s + 1) throw InferenceError("closed-form tau applies to lag-one pairs only");
  const std::size_t k = pair_index(t, s);
  std::vector<double> taus;
  for (const auto& r : records) {
    taus.push_back(r.gamma[k] ? kendall_tau(family, r.params[k]).value_or(0.0) : 0.0);
  }
  ScalarSummary out;
  out.mean = mean_of(taus);
  out.se = batch_means_se(taus);
  out.interval = probability_interval(taus, level);
  return out;
}

TailCurves tail_dependence_curves(const std::vector<SweepRecord>& records, const CopulaDescription& desc, PairIndex pair,
                                  const std::vector<double>& alphas, Rng& rng, std::size_t draws_per_sweep) {
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw InferenceError("tail levels must lie in (0,1)");
  }
  const auto t = static_cast<Eigen::Index>(pair.t);
  const auto s = static_cast<Eigen::Index>(pair.s);
  std::vector<double> up_joint(alphas.size(), 0.0), up_cond(alphas.size(), 0.0);
  std::vector<double> low_joint(alphas.size(), 0.0), low_cond(alphas.size(), 0.0);
  double lim_low = 0.0;
  double lim_up = 0.0;
  const bool closed = desc.kind == CopulaKind::DVine && pair.t == pair.s + 1 && desc.family != PairFamily::Gaussian;
  for (const auto& rec : records) {
    std::optional<GaussianCopulaModel> gauss;
    std::optional<DVineModel> vine;
    if (desc.kind == CopulaKind::Gaussian) {
      gauss.emplace(CorrelationMatrix::from_lower_triangle(desc.dim, rec.correlation));
    } else {
      vine.emplace(desc.dim, desc.family, rec.params, rec.gamma);
    }
    if (closed) {
      const DependenceMeasures dm = vine->pair(pair.t, pair.s).dependence();
      lim_low += dm.lambda_low;
      lim_up += dm.lambda_up;
    }
    for (std::size_t k = 0; k < draws_per_sweep; ++k) {
      const Eigen::VectorXd u = gauss ? gauss->sample_u(rng) : vine->sample_u(rng);
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        if (u[s] > alphas[a]) {
          up_cond[a] += 1.0;
          if (u[t] > alphas[a]) up_joint[a] += 1.0;
        }
        if (u[s] < alphas[a]) {
          low_cond[a] += 1.0;
          if (u[t] < alphas[a]) low_joint[a] += 1.0;
        }
      }
    }
  }
  TailCurves out;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    out.points.push_back({alphas[a], up_cond[a] > 0.0 ? up_joint[a] / up_cond[a] : 0.0,
                          low_cond[a] > 0.0 ? low_joint[a] / low_cond[a] : 0.0});
  }
  if (closed && !records.empty()) {
    out.lambda_low_limit = lim_low / static_cast<double>(records.size());
    out.lambda_up_limit = lim_up / static_cast<double>(records.size());
  }
  return out;
}

PosteriorSummary summarize(const std::vector<SweepRecord>& records, const CopulaDescription& desc,
                           const std::vector<std::vector<std::string>>& margin_param_names,
                           const SummaryOptions& options) {
  PosteriorSummary out;
  out.retained = records.size();
  out.level = options.level;
  if (records.empty()) return out;
  const bool interval_ok = static_cast<double>(records.size()) >= std::ceil(2.0 / options.level);
  const auto fill = [&](const std::vector<double>& v, Interval& iv, double& se) {
    se = batch_means_se(v);
    if (interval_ok) iv = probability_interval(v, options.level);
  };

  for (std::size_t j = 0; j < margin_param_names.size(); ++j) {
    for (std::size_t p = 0; p < margin_param_names[j].size(); ++p) {
      ParameterSummary ps;
      ps.name = "margin" + std::to_string(j + 1) + "." + margin_param_names[j][p];
      const auto v = extract(records, [&](const SweepRecord& r) { return r.theta[j][p]; });
      ps.mean = mean_of(v);
      fill(v, ps.interval, ps.se);
      out.margins.push_back(ps);
    }
  }

  for (const auto& [t, s] : pair_order(desc.dim)) {
    const std::size_t k = pair_index(t, s);
    PairSummary ps;
    ps.t = t;
    ps.s = s;
    ps.inclusion = inclusion_probability(records, t, s);
    const auto v = extract(records, [k](const SweepRecord& r) { return r.params[k]; });
    ps.mean = mean_of(v);
    double se = 0.0;
    fill(v, ps.interval, se);
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& r : records) {
      if (r.gamma[k]) {
        acc += r.params[k];
        ++count;
      }
    }
    if (count > 0) ps.conditional_mean = acc / static_cast<double>(count);
    out.pairs.push_back(ps);
  }

  if (!records.front().correlation.empty()) out.correlation = posterior_mean_correlation(records);

  Rng rng(options.seed);
  std::vector<PairIndex> pairs = pair_order(desc.dim);
  out.dependence = dependence_by_simulation(records, desc, pairs, rng, options.simulation);

  out.acceptance.assign(records.front().accepted.size(), 0.0);
  for (const auto& r : records) {
    for (std::size_t b = 0; b < r.accepted.size() && b < out.acceptance.size(); ++b) out.acceptance[b] += r.accepted[b];
  }
  for (double& a : out.acceptance) a /= static_cast<double>(records.size());
  return out;
}

}  // namespace bayescop
