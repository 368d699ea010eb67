#pragma once

// Chain files: '#' header lines (format version, config hash, dimension,
// model, margin families, layout), a tab-separated column header, then one
// SweepRecord per line with 17 significant digits.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bayescop/inference.hpp"
#include "bayescop/margins.hpp"
#include "bayescop/mcmc.hpp"
#include "bayescop/samplers.hpp"

namespace bayescop {

struct ChainLayout {
  std::uint64_t config_hash = 0;
  CopulaDescription copula;
  std::vector<MarginFamily> margins;
  std::vector<std::size_t> theta_counts;
  std::size_t pairs = 0;
  bool correlation = false;
  std::size_t accepted = 0;
  std::size_t latent_rows = 0;  // latents stored as latent_rows x dim, row-major; 0 = none

  std::vector<std::string> column_names() const;
  std::vector<std::vector<std::string>> param_names() const;
  bool operator==(const ChainLayout&) const = default;
};

ChainLayout layout_for(const FitTask& task, std::uint64_t config_hash);
CopulaDescription describe_copula(const FitTask& task);

class ChainWriter {
 public:
  ChainWriter(const std::filesystem::path& path, ChainLayout layout);
  void write(const SweepRecord& record);
  void close();

 private:
  std::ofstream out_;
  ChainLayout layout_;
};

std::string format_record(const ChainLayout& layout, const SweepRecord& record);

struct ChainData {
  ChainLayout layout;
  std::vector<SweepRecord> records;  // every stored sweep
  std::vector<std::string> warnings;
};

// Throws ChainFileError naming the line for malformed content; a final
// line without its newline is treated as truncated, dropped and reported.
ChainData read_chain(const std::filesystem::path& path);

}  // namespace bayescop
