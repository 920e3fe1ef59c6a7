#include "pdfevo/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

#include "pdfevo/errors.hpp"

namespace pdfevo::csv_io {

namespace {

std::string num(double v) { return fmt::format("{}", v); }

fmt::ostream open(const std::string& path, const std::string& kind) {
  try {
    auto out = fmt::output_file(path);
    out.print("# pdfevo-csv {} {}\n", kVersion, kind);
    return out;
  } catch (const std::system_error& e) {
    throw Error(fmt::format("cannot write '{}': {}", path, e.what()));
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

double parse_number(const std::string& s, const std::string& path, int line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw Error(fmt::format("{}:{}: expected a number, got '{}'", path, line, s));
  return v;
}

struct Table {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;
};

Table read_table(const std::string& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open '{}'", path));
  Table t;
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line) || line != fmt::format("# pdfevo-csv {} {}", kVersion, kind))
    throw Error(fmt::format("{}: not a pdfevo {} file ({})", path, kind, kVersion));
  ++lineno;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        auto trim = [](std::string s) {
          s.erase(0, s.find_first_not_of(" #"));
          s.erase(s.find_last_not_of(' ') + 1);
          return s;
        };
        t.meta.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      }
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    auto cells = split(line);
    if (cells.size() + 1 == t.columns.size()) cells.emplace_back();  // trailing empty cell
    if (cells.size() != t.columns.size())
      throw Error(fmt::format("{}:{}: expected {} columns", path, lineno, t.columns.size()));
    t.rows.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  return t;
}

}  // namespace

void write_pdf(const std::string& path, const grid::PdfField& f) {
  auto out = open(path, "pdf");
  out.print("# t = {}\nx1,x2,f\n", num(f.t));
  for (int k = 0; k < f.grid.size(); ++k) {
    const auto x = f.grid.point(k);
    out.print("{},{},{}\n", num(x[0]), num(x[1]), num(f.values[k]));
  }
}

void write_marginal(const std::string& path, const grid::PdfField& f) {
  auto out = open(path, "marginal");
  out.print("# t = {}\naxis,x,f\n", num(f.t));
  for (int d = 0; d < 2; ++d) {
    const auto m = grid::marginal(f, d);
    const auto& axis = f.grid.axis(d);
    for (int i = 0; i < axis.n; ++i) out.print("x{},{},{}\n", d + 1, num(axis.node(i)), num(m[i]));
  }
}

void write_moments(const std::string& path, const std::vector<MomentRow>& rows) {
  auto out = open(path, "moments");
  out.print("t,name,value,stderr\n");
  for (const auto& r : rows)
    out.print("{},{},{},{}\n", num(r.t), r.name, num(r.value), r.std_error ? num(*r.std_error) : "");
}

void write_diagnostics(const std::string& path, const std::vector<solver::StepStats>& steps) {
  auto out = open(path, "diagnostics");
  out.print("t,closure_iterations,closure_delta,mass,min_value,clipped_mass,linear_iterations\n");
  for (const auto& s : steps)
    out.print("{},{},{},{},{},{},{}\n", num(s.t), s.closure_iterations, num(s.closure_delta), num(s.mass),
              num(s.min_value), num(s.clipped_mass), s.linear_iterations);
}

void write_bench(const std::string& path, const std::vector<BenchRow>& rows) {
  auto out = open(path, "bench");
  out.print("t,method,order,phi12,phi22,frob_err\n");
  for (const auto& r : rows)
    out.print("{},{},{},{},{},{}\n", num(r.t), r.method, r.order, num(r.phi12), num(r.phi22), num(r.frob_err));
}

grid::PdfField read_pdf(const std::string& path) {
  const Table t = read_table(path, "pdf");
  if (t.columns != std::vector<std::string>{"x1", "x2", "f"}) throw Error(fmt::format("{}: bad column header", path));
  std::vector<double> x1, x2, f;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    x1.push_back(parse_number(t.rows[r][0], path, t.lines[r]));
    x2.push_back(parse_number(t.rows[r][1], path, t.lines[r]));
    f.push_back(parse_number(t.rows[r][2], path, t.lines[r]));
  }
  // x1 varies fastest: the first run of constant x2 spans the x1 axis.
  const auto n1 = static_cast<int>(std::find_if(x2.begin(), x2.end(), [&](double v) { return v != x2[0]; }) - x2.begin());
  if (n1 < 2 || f.size() % static_cast<std::size_t>(n1) != 0)
    throw Error(fmt::format("{}: rows do not form a tensor grid", path));
  const int n2 = static_cast<int>(f.size()) / n1;
  grid::GridSpec g;
  try {
    g = grid::GridSpec({x1.front(), x1[n1 - 1], n1}, {x2.front(), x2.back(), n2});
  } catch (const ParameterError& e) {
    throw Error(fmt::format("{}: {}", path, e.what()));
  }
  for (int k = 0; k < g.size(); ++k) {
    const auto p = g.point(k);
    const double tol = 1e-9 * (1.0 + std::abs(p[0]) + std::abs(p[1]));
    if (std::abs(p[0] - x1[k]) > tol || std::abs(p[1] - x2[k]) > tol)
      throw Error(fmt::format("{}: node {} is off the uniform grid", path, k));
  }
  grid::PdfField out{g, Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())), 0.0};
  for (const auto& [key, value] : t.meta)
    if (key == "t") out.t = parse_number(value, path, 2);
  return out;
}

std::vector<MomentRow> read_moments(const std::string& path) {
  const Table t = read_table(path, "moments");
  if (t.columns != std::vector<std::string>{"t", "name", "value", "stderr"})
    throw Error(fmt::format("{}: bad column header", path));
  std::vector<MomentRow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& c = t.rows[r];
    MomentRow row{parse_number(c[0], path, t.lines[r]), c[1], parse_number(c[2], path, t.lines[r]), std::nullopt};
    if (!c[3].empty()) row.std_error = parse_number(c[3], path, t.lines[r]);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace pdfevo::csv_io
