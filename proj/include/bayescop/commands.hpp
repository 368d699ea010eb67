#pragma once

// The fit / simulate / summarize subcommands. Each returns a process exit
// code: 0 success, 2 configuration or data error, 3 sampler invariant
// violation, 4 missing or corrupt chain files.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "bayescop/chain_io.hpp"
#include "bayescop/config.hpp"

namespace bayescop {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSampler = 3;
inline constexpr int kExitChain = 4;

// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutputEnv = "BAYESCOP_OUT";

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains;
};

int cmd_fit(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_summarize(const std::filesystem::path& chain_dir, std::ostream& out, std::ostream& err);

// Builds the sampler task from a parsed config and a loaded data matrix.
FitTask make_task(const RunConfig& config, Eigen::MatrixXd data);

// Writes summary.txt and summary_tables.tsv for per-chain retained records
// into dir, and echoes the report to out.
void write_summaries(const std::filesystem::path& dir, const ChainLayout& layout,
                     const std::vector<std::vector<SweepRecord>>& chains, const SummarySettings& settings,
                     std::uint64_t seed, std::ostream& out);

}  // namespace bayescop
