#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "advprec/matrix.hpp"

namespace advprec {

// n x d sample matrix, row per observation.
struct Dataset {
  int n = 0;
  int d = 0;
  std::vector<double> x;       // row-major
  std::uint64_t seed = 0;      // provenance when synthetically generated

  Dataset() = default;
  Dataset(int n_, int d_) : n(n_), d(d_), x(static_cast<std::size_t>(n_) * d_, 0.0) {}
  double operator()(int i, int j) const { return x[static_cast<std::size_t>(i) * d + j]; }
  double& operator()(int i, int j) { return x[static_cast<std::size_t>(i) * d + j]; }
  const double* row(int i) const { return x.data() + static_cast<std::size_t>(i) * d; }
};

// A_bar = (1/n) sum x x^T. Second moments about zero by default; `center`
// subtracts column means first.
inline SymMatrix second_moment(const Dataset& data, bool center = false) {
  if (data.n < 1) throw std::invalid_argument("second_moment: empty dataset");
  const int n = data.n, d = data.d;
  std::vector<double> mean(d, 0.0);
  if (center) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) mean[j] += data(i, j);
    for (int j = 0; j < d; ++j) mean[j] /= n;
  }
  std::vector<double> acc(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* r = data.row(i);
    for (int j = 0; j < d; ++j) {
      const double xj = r[j] - mean[j];
      double* arow = acc.data() + static_cast<std::size_t>(j) * d;
      for (int k = 0; k <= j; ++k) arow[k] += xj * (r[k] - mean[k]);
    }
  }
  SymMatrix out(d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k <= j; ++k) out.set(j, k, acc[static_cast<std::size_t>(j) * d + k] / n);
  return out;
}

inline std::vector<double> column_means(const Dataset& data) {
  std::vector<double> mean(data.d, 0.0);
  for (int i = 0; i < data.n; ++i)
    for (int j = 0; j < data.d; ++j) mean[j] += data(i, j);
  for (double& m : mean) m /= data.n;
  return mean;
}

inline Dataset read_dataset_csv(std::istream& in) {
  Dataset out;
  std::vector<double> values;
  std::string line;
  int lineno = 0, d = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      double v;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw ParseError("non-numeric cell '" + cell + "'", lineno);
      }
      values.push_back(v);
      ++cols;
    }
    if (d < 0)
      d = cols;
    else if (cols != d)
      throw ParseError("expected " + std::to_string(d) + " columns, got " + std::to_string(cols),
                       lineno);
    ++out.n;
  }
  if (out.n == 0) throw ParseError("empty dataset", 0);
  out.d = d;
  out.x = std::move(values);
  return out;
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return read_dataset_csv(in);
}

inline void write_dataset_csv(const Dataset& data, std::ostream& out) {
  for (int i = 0; i < data.n; ++i) {
    for (int j = 0; j < data.d; ++j) {
      if (j) out << ',';
      out << format_double(data(i, j));
    }
    out << '\n';
  }
}

}  // namespace advprec
