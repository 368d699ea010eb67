#pragma once

// Numeric CSV tables with a header row (RFC 4180 subset: quoted fields,
// doubled quotes, no embedded newlines).

#include <Eigen/Dense>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace bayescop {

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

// Throws ConfigError naming the line for ragged rows, empty cells or non-numeric values.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);
void write_csv(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& values);

std::vector<std::string> split_csv_line(const std::string& line, int line_no);

}  // namespace bayescop
