#pragma once

// Functional responses on a common grid, and the CSV layout used to move them
// in and out of the tool.
//
// Curves file: first row holds the grid values t_1..t_T, then one row per
// subject. Design file: one row per subject, p columns. Lines starting with
// '#' are comments.

#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fqr/error.hpp"

namespace fqr {

struct FunctionalDataset {
  Eigen::VectorXd grid;  ///< length T, strictly increasing
  Eigen::MatrixXd y;     ///< N x T

  Eigen::Index n_curves() const { return y.rows(); }
  Eigen::Index grid_len() const { return y.cols(); }
};

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_real(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

using CsvRows = std::vector<std::vector<double>>;

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline CsvRows read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  CsvRows rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::vector<double> row;
    std::size_t col = 0;
    std::string_view rest = body;
    while (true) {
      ++col;
      const auto comma = rest.find(',');
      const auto cell = trim(rest.substr(0, comma));
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw DataError(path + ": non-numeric cell '" + std::string(cell) + "' at line " +
                        std::to_string(line_no) + ", column " + std::to_string(col));
      }
      if (!std::isfinite(value)) {
        throw DataError(path + ": non-finite value at line " + std::to_string(line_no) +
                        ", column " + std::to_string(col));
      }
      row.push_back(value);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path + ": ragged row at line " + std::to_string(line_no) + " (" +
                      std::to_string(row.size()) + " columns, expected " +
                      std::to_string(rows.front().size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd to_matrix(const CsvRows& rows, std::size_t first) {
  const auto n = static_cast<Eigen::Index>(rows.size() - first);
  const auto c = static_cast<Eigen::Index>(rows.empty() ? 0 : rows.front().size());
  Eigen::MatrixXd m(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[first + static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace detail

struct IngestedData {
  FunctionalDataset data;
  Eigen::MatrixXd design;
};

/// Reads and validates a curves CSV and a design CSV.
inline IngestedData ingest(const std::string& curves_path, const std::string& design_path) {
  const auto curve_rows = detail::read_numeric_csv(curves_path);
  if (curve_rows.size() < 2) throw DataError(curves_path + ": need a grid row and at least one curve");
  const auto design_rows = detail::read_numeric_csv(design_path);

  IngestedData out;
  const auto& grid = curve_rows.front();
  out.data.grid = Eigen::Map<const Eigen::VectorXd>(grid.data(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t l = 1; l < grid.size(); ++l) {
    if (!(grid[l] > grid[l - 1])) {
      throw DataError(curves_path + ": grid is not strictly increasing at column " + std::to_string(l + 1));
    }
  }
  out.data.y = detail::to_matrix(curve_rows, 1);
  out.design = detail::to_matrix(design_rows, 0);
  if (out.design.rows() != out.data.y.rows()) {
    throw DataError("subject count mismatch: " + curves_path + " has " +
                    std::to_string(out.data.y.rows()) + " curves but " + design_path + " has " +
                    std::to_string(out.design.rows()) + " design rows");
  }
  if (out.design.cols() == 0) throw DataError(design_path + ": design has no columns");
  return out;
}

inline void write_curves_csv(const std::string& path, const FunctionalDataset& data,
                             const std::string& header_comment = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  for (Eigen::Index l = 0; l < data.grid.size(); ++l) {
    out << (l ? "," : "") << format_real(data.grid[l]);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < data.y.rows(); ++i) {
    for (Eigen::Index l = 0; l < data.y.cols(); ++l) out << (l ? "," : "") << format_real(data.y(i, l));
    out << '\n';
  }
}

inline void write_design_csv(const std::string& path, const Eigen::MatrixXd& design,
                             const std::string& header_comment = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    for (Eigen::Index a = 0; a < design.cols(); ++a) out << (a ? "," : "") << format_real(design(i, a));
    out << '\n';
  }
}

}  // namespace fqr
