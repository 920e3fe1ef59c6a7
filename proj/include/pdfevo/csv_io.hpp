#pragma once

// Versioned CSV artifacts. Every file starts with
//   # pdfevo-csv v1 <kind>
// followed by optional "# key = value" lines and a column header.

#include <optional>
#include <string>
#include <vector>

#include "pdfevo/grid.hpp"
#include "pdfevo/solver.hpp"

namespace pdfevo::csv_io {

inline constexpr const char* kVersion = "v1";

struct MomentRow {
  double t = 0.0;
  std::string name;
  double value = 0.0;
  std::optional<double> std_error;
};

struct BenchRow {
  double t = 0.0;
  std::string method;
  int order = 0;
  double phi12 = 0.0;
  double phi22 = 0.0;
  double frob_err = 0.0;
};

/// Columns x1,x2,f; node order as in the grid.
void write_pdf(const std::string& path, const grid::PdfField& f);
/// Columns axis,x,f with both marginals.
void write_marginal(const std::string& path, const grid::PdfField& f);
void write_moments(const std::string& path, const std::vector<MomentRow>& rows);
void write_diagnostics(const std::string& path, const std::vector<solver::StepStats>& steps);
void write_bench(const std::string& path, const std::vector<BenchRow>& rows);

/// Rebuilds the grid from the node coordinates. Throws Error on a malformed file.
grid::PdfField read_pdf(const std::string& path);
std::vector<MomentRow> read_moments(const std::string& path);

}  // namespace pdfevo::csv_io
