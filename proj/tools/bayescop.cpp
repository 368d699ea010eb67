#include <CLI11.hpp>

#include <iostream>

#include "bayescop/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bayesian copula models fitted by MCMC"};
  app.require_subcommand(1);

  bayescop::CommandOptions fit_opts;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit", "run the configured sampler and write chains and a summary");
  fit->add_option("--config", fit_opts.config, "run configuration (YAML)")->required();
  fit->add_option("--out", fit_out, "output directory (overrides config and " + std::string(bayescop::kOutputEnv) + ")");
  std::uint64_t fit_seed = 0;
  auto* fit_seed_opt = fit->add_option("--seed", fit_seed, "random seed override");
  std::size_t fit_chains = 0;
  auto* fit_chains_opt = fit->add_option("--chains", fit_chains, "number of chains");

  bayescop::CommandOptions sim_opts;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "draw data from a fully specified model");
  sim->add_option("--config", sim_opts.config, "model configuration (YAML)")->required();
  sim->add_option("--out", sim_out, "output CSV file or directory");
  std::uint64_t sim_seed = 0;
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "random seed override");

  std::string chain_dir;
  auto* summ = app.add_subcommand("summarize", "summarize existing chain files");
  summ->add_option("--out,dir", chain_dir, "directory holding chain_<k>.tsv files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      if (!fit_out.empty()) fit_opts.out = fit_out;
      if (*fit_seed_opt) fit_opts.seed = fit_seed;
      if (*fit_chains_opt) fit_opts.chains = fit_chains;
      return bayescop::cmd_fit(fit_opts, std::cout, std::cerr);
    }
    if (sim->parsed()) {
      if (!sim_out.empty()) sim_opts.out = sim_out;
      if (*sim_seed_opt) sim_opts.seed = sim_seed;
      return bayescop::cmd_simulate(sim_opts, std::cout, std::cerr);
    }
    return bayescop::cmd_summarize(chain_dir, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bayescop::kExitFailure;
  }
}
