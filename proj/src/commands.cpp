#include "bayescop/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "bayescop/csv.hpp"
#include "bayescop/dvine.hpp"
#include "bayescop/error.hpp"
#include "bayescop/gaussian_copula.hpp"

namespace bayescop {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

fs::path output_dir(const CommandOptions& opt, const RunConfig& cfg) {
  if (opt.out) return *opt.out;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return fs::path(env);
  const fs::path base = opt.config.parent_path();
  if (!cfg.output.empty()) return resolve(base, cfg.output);
  return base / "bayescop_out";
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

std::string full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pair_name(std::size_t t, std::size_t s) {
  return "(" + std::to_string(t + 1) + "," + std::to_string(s + 1) + ")";
}

// Applies command-line overrides and checks the seed requirement.
RunConfig effective_config(const CommandOptions& opt, const std::string& text) {
  RunConfig cfg = parse_config(text);
  if (opt.seed) {
    cfg.mcmc.seed = *opt.seed;
    cfg.seed_given = true;
  }
  if (opt.chains) {
    if (*opt.chains == 0) throw ConfigError("--chains must be at least 1");
    cfg.chains = *opt.chains;
  }
  if (!cfg.seed_given) throw ConfigError("mcmc.seed is required (or pass --seed)");
  return cfg;
}

Rng chain_rng(std::uint64_t seed, std::size_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain)};
  return Rng(seq);
}

struct Scope {
  std::string name;
  const std::vector<SweepRecord>* records;
};

void report_scope(std::ostream& txt, std::ostream& tsv, const Scope& scope, const ChainLayout& layout,
                  const SummarySettings& settings, std::uint64_t seed) {
  SummaryOptions opts;
  opts.level = settings.level;
  opts.seed = seed;
  opts.simulation.draws_per_sweep = settings.draws_per_sweep;
  opts.simulation.inner_draws = settings.inner_draws;
  opts.simulation.max_records = settings.max_records;
  const auto& records = *scope.records;
  const PosteriorSummary s = summarize(records, layout.copula, layout.param_names(), opts);
  const auto row = [&](const std::string& table, const std::string& key, const std::string& stat, double v) {
    tsv << scope.name << '\t' << table << '\t' << key << '\t' << stat << '\t' << full(v) << '\n';
  };

  txt << "[" << scope.name << "]\n";
  txt << "retained sweeps: " << s.retained << "\n";
  row("run", "retained", "count", static_cast<double>(s.retained));
  if (s.retained == 0) {
    txt << "no retained sweeps; nothing to summarize\n\n";
    return;
  }
  const bool has_interval = static_cast<double>(s.retained) >= std::ceil(2.0 / s.level);
  const std::string pct = fmt(100.0 * (1.0 - s.level), 4) + "%";

  if (!s.margins.empty()) {
    txt << "margin parameters (mean, mc se" << (has_interval ? ", " + pct + " interval" : "") << ")\n";
    for (const auto& p : s.margins) {
      txt << "  " << std::left << std::setw(16) << p.name << std::right << std::setw(14) << fmt(p.mean) << std::setw(12)
          << fmt(p.se, 3);
      if (has_interval) txt << "  [" << fmt(p.interval.lower) << ", " << fmt(p.interval.upper) << "]";
      txt << "\n";
      row("margin", p.name, "mean", p.mean);
      row("margin", p.name, "se", p.se);
      if (has_interval) {
        row("margin", p.name, "lower", p.interval.lower);
        row("margin", p.name, "upper", p.interval.upper);
      }
    }
  }

  const std::string pname = layout.copula.kind == CopulaKind::DVine ? "phi" : "lambda";
  txt << "copula parameters (" << pname << "; inclusion = pr(gamma=1|y), the posterior probability the pair is "
      << "dependent)\n";
  for (const auto& p : s.pairs) {
    const std::string key = pair_name(p.t, p.s);
    txt << "  " << std::left << std::setw(10) << key << std::right << " inclusion " << std::setw(8) << fmt(p.inclusion, 4)
        << "  mean " << std::setw(12) << fmt(p.mean);
    if (p.conditional_mean) txt << "  mean|included " << std::setw(12) << fmt(*p.conditional_mean);
    if (has_interval) txt << "  [" << fmt(p.interval.lower) << ", " << fmt(p.interval.upper) << "]";
    txt << "\n";
    row("pair", key, "inclusion", p.inclusion);
    row("pair", key, "mean", p.mean);
    if (p.conditional_mean) row("pair", key, "conditional_mean", *p.conditional_mean);
    if (has_interval) {
      row("pair", key, "lower", p.interval.lower);
      row("pair", key, "upper", p.interval.upper);
    }
  }

  if (s.correlation) {
    txt << "posterior mean correlation (model average)\n";
    const auto& g = *s.correlation;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      txt << " ";
      for (Eigen::Index j = 0; j < g.cols(); ++j) txt << std::setw(11) << fmt(g(i, j), 5);
      txt << "\n";
      for (Eigen::Index j = 0; j < i; ++j) {
        row("correlation", pair_name(static_cast<std::size_t>(i), static_cast<std::size_t>(j)), "mean", g(i, j));
      }
    }
  }

  txt << "dependence by simulation (kendall tau, spearman rho, mc se)\n";
  for (const auto& d : s.dependence) {
    const std::string key = pair_name(d.t, d.s);
    txt << "  " << std::left << std::setw(10) << key << std::right << " tau " << std::setw(10) << fmt(d.tau, 4) << " ("
        << fmt(d.tau_se, 2) << ")  rho_s " << std::setw(10) << fmt(d.rho_s, 4) << " (" << fmt(d.rho_s_se, 2) << ")"
        << (d.approximate ? "  [C estimated by inner sample]" : "") << "\n";
    row("dependence", key, "tau", d.tau);
    row("dependence", key, "tau_se", d.tau_se);
    row("dependence", key, "rho_s", d.rho_s);
    row("dependence", key, "rho_s_se", d.rho_s_se);
  }
  if (layout.copula.kind == CopulaKind::DVine && layout.copula.family != PairFamily::Gaussian &&
      layout.copula.family != PairFamily::Independence) {
    txt << "closed-form dependence, lag-one pairs (posterior mean)\n";
    Rng rng(seed);
    for (std::size_t t = 1; t < layout.copula.dim; ++t) {
      const std::string key = pair_name(t, t - 1);
      const ScalarSummary tau =
          closed_form_tau_posterior(records, layout.copula.family, t, t - 1, has_interval ? s.level : 0.5);
      const TailCurves tc = tail_dependence_curves(records, layout.copula, {t, t - 1}, {0.05, 0.95}, rng);
      txt << "  " << std::left << std::setw(10) << key << std::right << " tau " << fmt(tau.mean, 4) << " ("
          << fmt(tau.se, 2) << ")  lambda_low " << fmt(tc.lambda_low_limit.value_or(0.0), 4) << "  lambda_up "
          << fmt(tc.lambda_up_limit.value_or(0.0), 4) << "\n";
      row("closed_form", key, "tau", tau.mean);
      row("closed_form", key, "tau_se", tau.se);
      row("closed_form", key, "lambda_low", tc.lambda_low_limit.value_or(0.0));
      row("closed_form", key, "lambda_up", tc.lambda_up_limit.value_or(0.0));
    }
  }
  const bool discrete = std::any_of(layout.margins.begin(), layout.margins.end(), [](MarginFamily f) {
    return f == MarginFamily::Bernoulli || f == MarginFamily::Poisson || f == MarginFamily::NegativeBinomial;
  });
  if (discrete) {
    txt << "note: margins are discrete; the dependence measures describe the latent gaussian copula and do not\n"
        << "      carry over to the observed variables, but still indicate the level and type of dependence\n";
  }

  txt << "acceptance rates (margin blocks, then pairs)\n ";
  for (std::size_t b = 0; b < s.acceptance.size(); ++b) {
    txt << " " << fmt(s.acceptance[b], 3);
    row("acceptance", std::to_string(b + 1), "rate", s.acceptance[b]);
  }
  txt << "\n\n";
}

}  // namespace

FitTask make_task(const RunConfig& cfg, Eigen::MatrixXd data) {
  FitTask task;
  task.data = std::move(data);
  task.margins = cfg.margins;
  task.margin_prior = cfg.margin_prior;
  task.copula = cfg.copula;
  task.mcmc = cfg.mcmc;
  return task;
}

void write_summaries(const fs::path& dir, const ChainLayout& layout, const std::vector<std::vector<SweepRecord>>& chains,
                     const SummarySettings& settings, std::uint64_t seed, std::ostream& out) {
  std::vector<SweepRecord> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());

  std::ostringstream txt;
  std::ostringstream tsv;
  tsv << "scope\ttable\tkey\tstatistic\tvalue\n";
  txt << "bayescop posterior summary\n";
  txt << "model: " << (layout.copula.kind == CopulaKind::Gaussian ? "gaussian copula" : "d-vine copula");
  if (layout.copula.kind == CopulaKind::DVine) txt << " (" << to_string(layout.copula.family) << " pairs)";
  txt << ", margins:";
  for (auto f : layout.margins) txt << " " << to_string(f);
  txt << "\nchains: " << chains.size() << "\n\n";

  report_scope(txt, tsv, {"pooled", &pooled}, layout, settings, seed);
  if (chains.size() > 1) {
    for (std::size_t k = 0; k < chains.size(); ++k) {
      report_scope(txt, tsv, {"chain" + std::to_string(k + 1), &chains[k]}, layout, settings, seed + k + 1);
    }
  }
  std::ofstream(dir / "summary.txt", std::ios::binary) << txt.str();
  std::ofstream(dir / "summary_tables.tsv", std::ios::binary) << tsv.str();
  out << txt.str();
}

int cmd_fit(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  const std::string cfg_name = opt.config.filename().string();
  RunConfig cfg;
  FitTask task;
  fs::path dir;
  try {
    cfg = effective_config(opt, read_text(opt.config));
    if (cfg.data.empty()) throw ConfigError("data path is required for fit");
    const fs::path data_path = resolve(opt.config.parent_path(), cfg.data);
    CsvTable table;
    try {
      table = read_csv_file(data_path);
    } catch (const ConfigError& e) {
      err << data_path.filename().string() << ": " << e.what() << "\n";
      return kExitConfig;
    }
    if (static_cast<std::size_t>(table.values.cols()) != cfg.margins.size()) {
      throw ConfigError("config lists " + std::to_string(cfg.margins.size()) + " margins but the data has " +
                        std::to_string(table.values.cols()) + " columns");
    }
    cfg.data = fs::absolute(data_path).string();
    task = make_task(cfg, std::move(table.values));
    validate_task(task);
    dir = output_dir(opt, cfg);
    fs::create_directories(dir);
  } catch (const ConfigError& e) {
    err << cfg_name << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "output: " << e.what() << "\n";
    return kExitConfig;
  }

  RunConfig stored = cfg;
  stored.output.clear();
  const std::string stored_text = serialize_config(stored);
  std::ofstream(dir / "config.yaml", std::ios::binary) << stored_text;
  const ChainLayout layout = layout_for(task, fnv1a(stored_text));

  std::vector<std::vector<SweepRecord>> retained(cfg.chains);
  std::vector<std::exception_ptr> failures(cfg.chains);
  const auto run_one = [&](std::size_t k) {
    try {
      Rng rng = chain_rng(cfg.mcmc.seed, k);
      ChainWriter writer(dir / ("chain_" + std::to_string(k + 1) + ".tsv"), layout);
      run_chain(task, rng, [&](const SweepRecord& r) {
        writer.write(r);
        if (r.retained) retained[k].push_back(r);
      });
      writer.close();
    } catch (...) {
      failures[k] = std::current_exception();
    }
  };
  std::vector<std::thread> workers;
  for (std::size_t k = 1; k < cfg.chains; ++k) workers.emplace_back(run_one, k);
  run_one(0);
  for (auto& w : workers) w.join();

  for (std::size_t k = 0; k < cfg.chains; ++k) {
    if (!failures[k]) continue;
    try {
      std::rethrow_exception(failures[k]);
    } catch (const SamplerInvariantError& e) {
      err << "chain " << k + 1 << ": sampler invariant violated: " << e.what() << "\n";
      return kExitSampler;
    } catch (const ConfigError& e) {
      err << cfg_name << ": " << e.what() << "\n";
      return kExitConfig;
    } catch (const std::exception& e) {
      err << "chain " << k + 1 << ": " << e.what() << "\n";
      return kExitFailure;
    }
  }
  write_summaries(dir, layout, retained, cfg.summary, cfg.mcmc.seed, out);
  return kExitOk;
}

int cmd_simulate(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  const std::string cfg_name = opt.config.filename().string();
  try {
    const RunConfig cfg = effective_config(opt, read_text(opt.config));
    const std::size_t m = cfg.margins.size();
    if (m < 2) throw ConfigError("simulation needs at least two margins");
    std::vector<Margin> margins;
    for (std::size_t j = 0; j < m; ++j) {
      const MarginSpec& s = cfg.margins[j];
      if (s.family == MarginFamily::Empirical || s.params.empty()) {
        throw ConfigError("margin " + std::to_string(j + 1) + " needs explicit parameters for simulation");
      }
      margins.emplace_back(s.family, s.params);
    }
    const CopulaSpec& c = cfg.copula;
    const std::size_t np = pair_count(m);
    std::vector<std::uint8_t> gamma = c.gamma.empty() ? std::vector<std::uint8_t>(np, 1) : c.gamma;
    if (gamma.size() != np) throw ConfigError("indicator count must be " + std::to_string(np));
    std::optional<GaussianCopulaModel> gauss;
    std::optional<DVineModel> vine;
    try {
      if (c.kind == CopulaKind::DVine) {
        std::vector<double> phi = c.params;
        if (c.family == PairFamily::Independence && phi.empty()) phi.assign(np, 0.0);
        if (phi.size() != np) throw ConfigError("copula needs " + std::to_string(np) + " parameters for simulation");
        vine.emplace(m, c.family, phi, gamma);
      } else {
        if (c.params.size() != np) {
          throw ConfigError("copula needs " + std::to_string(np) + " parameters for simulation");
        }
        if (c.parameterisation == CorrParameterisation::Cholesky) {
          gauss.emplace(gamma_from_cholesky(CholeskyParam{m, c.params}));
        } else {
          gauss.emplace(gamma_from_partials(m, effective_partials(c.params, gamma)));
        }
      }
    } catch (const DomainError& e) {
      throw ConfigError(std::string("copula parameters: ") + e.what());
    }

    fs::path target;
    if (opt.out) {
      target = *opt.out;
      if (fs::is_directory(target) || target.string().back() == '/') target /= "simulated.csv";
    } else {
      target = output_dir(opt, cfg) / "simulated.csv";
    }
    if (target.has_parent_path()) fs::create_directories(target.parent_path());

    Rng rng(cfg.mcmc.seed);
    const auto rows = static_cast<Eigen::Index>(cfg.simulate.rows);
    Eigen::MatrixXd y(rows, static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Eigen::VectorXd u = gauss ? gauss->sample_u(rng) : vine->sample_u(rng);
      for (std::size_t j = 0; j < m; ++j) {
        y(i, static_cast<Eigen::Index>(j)) = margins[j].quantile(clamp_probability(u[static_cast<Eigen::Index>(j)]));
      }
    }
    std::vector<std::string> header;
    for (std::size_t j = 0; j < m; ++j) header.push_back("y" + std::to_string(j + 1));
    std::ofstream file(target, std::ios::binary);
    if (!file) throw ConfigError("cannot write " + target.string());
    write_csv(file, header, y);
    out << "wrote " << rows << " rows to " << target.string() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << cfg_name << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "output: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_summarize(const fs::path& chain_dir, std::ostream& out, std::ostream& err) {
  try {
    if (!fs::is_directory(chain_dir)) throw ChainFileError(chain_dir.string() + ": not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(chain_dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("chain_", 0) == 0 && e.path().extension() == ".tsv") files.push_back(e.path());
    }
    if (files.empty()) throw ChainFileError(chain_dir.string() + ": no chain files");
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
      const auto num = [](const fs::path& p) {
        const std::string s = p.stem().string().substr(6);
        return s.empty() || !std::all_of(s.begin(), s.end(), ::isdigit) ? 0UL : std::stoul(s);
      };
      return num(a) != num(b) ? num(a) < num(b) : a < b;
    });

    SummarySettings settings;
    std::uint64_t seed = 0;
    if (fs::exists(chain_dir / "config.yaml")) {
      try {
        const RunConfig cfg = load_config(chain_dir / "config.yaml");
        settings = cfg.summary;
        seed = cfg.mcmc.seed;
      } catch (const ConfigError& e) {
        err << "config.yaml: " << e.what() << "\n";
        return kExitConfig;
      }
    }

    std::vector<std::vector<SweepRecord>> chains;
    std::optional<ChainLayout> layout;
    for (const auto& f : files) {
      ChainData data = read_chain(f);
      for (const auto& w : data.warnings) err << "warning: " << w << "\n";
      if (layout && !(*layout == data.layout)) {
        throw ChainFileError(f.filename().string() + ": header differs from " + files.front().filename().string());
      }
      layout = data.layout;
      std::vector<SweepRecord> kept;
      for (auto& r : data.records) {
        if (r.retained) kept.push_back(std::move(r));
      }
      chains.push_back(std::move(kept));
    }
    write_summaries(chain_dir, *layout, chains, settings, seed, out);
    return kExitOk;
  } catch (const ChainFileError& e) {
    err << e.what() << "\n";
    return kExitChain;
  } catch (const DomainError& e) {
    err << "chain content: " << e.what() << "\n";
    return kExitChain;
  }
}

}  // namespace bayescop
