#pragma once

// Run configuration: a YAML document describing data, margins, copula,
// priors, MCMC settings and output. Validation errors carry the line number.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "bayescop/samplers.hpp"

namespace bayescop {

struct SimulateSettings {
  std::size_t rows = 1000;
  bool operator==(const SimulateSettings&) const = default;
};

struct SummarySettings {
  double level = 0.1;
  std::size_t draws_per_sweep = 1;
  std::size_t inner_draws = 256;
  std::size_t max_records = 2000;
  bool operator==(const SummarySettings&) const = default;
};

struct RunConfig {
  std::string data;    // CSV path, relative to the config file unless absolute
  std::string output;  // output directory, same convention
  std::vector<MarginSpec> margins;
  MarginPrior margin_prior;
  CopulaSpec copula;
  McmcSettings mcmc;
  bool seed_given = false;
  std::size_t chains = 1;
  SimulateSettings simulate;
  SummarySettings summary;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

// 64-bit FNV-1a of the text.
std::uint64_t fnv1a(const std::string& text);

}  // namespace bayescop
