// Dense symmetric-matrix primitives: Cholesky, log-determinant, inverse,
// Jacobi eigendecomposition, and the comma-separated matrix text format.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace advprec {

class NotPDError : public std::runtime_error {
 public:
  NotPDError(int pivot, double value)
      : std::runtime_error("matrix not positive definite: pivot " +
                           std::to_string(pivot) + " = " + std::to_string(value)),
        pivot_(pivot),
        value_(value) {}
  int pivot() const { return pivot_; }
  double pivot_value() const { return value_; }

 private:
  int pivot_;
  double value_;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Dense row-major matrix, no symmetry assumed.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix shape");
  }
  static Matrix identity(int d) {
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
  }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  const double* row(int i) const { return a_.data() + static_cast<std::size_t>(i) * cols_; }
  double* row(int i) { return a_.data() + static_cast<std::size_t>(i) * cols_; }
  double max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// Symmetric dense matrix; writes always land on both triangles so reading
// (i,j) and (j,i) agrees by construction.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int d, double fill = 0.0)
      : d_(d), a_(static_cast<std::size_t>(d) * d, fill) {
    if (d < 1) throw std::invalid_argument("SymMatrix dimension must be >= 1");
  }
  static SymMatrix identity(int d) {
    SymMatrix m(d);
    for (int i = 0; i < d; ++i) m.set(i, i, 1.0);
    return m;
  }
  static SymMatrix diag(const std::vector<double>& values) {
    SymMatrix m(static_cast<int>(values.size()));
    for (int i = 0; i < m.dim(); ++i) m.set(i, i, values[i]);
    return m;
  }
  int dim() const { return d_; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * d_ + j]; }
  void set(int i, int j, double v) {
    a_[static_cast<std::size_t>(i) * d_ + j] = v;
    a_[static_cast<std::size_t>(j) * d_ + i] = v;
  }
  void add(int i, int j, double v) { set(i, j, (*this)(i, j) + v); }
  double max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }
  double trace() const {
    double t = 0.0;
    for (int i = 0; i < d_; ++i) t += (*this)(i, i);
    return t;
  }
  bool all_finite() const {
    for (double v : a_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  int d_ = 0;
  std::vector<double> a_;
};

inline double frobenius_inner(const SymMatrix& a, const SymMatrix& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) s += a(i, j) * b(i, j);
  return s;
}

inline SymMatrix sym_from_dense(const Matrix& m) {
  SymMatrix s(m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j <= i; ++j) s.set(i, j, 0.5 * (m(i, j) + m(j, i)));
  return s;
}

// Lower Cholesky factor of a positive definite matrix.
class LowerFactor {
 public:
  LowerFactor() = default;
  explicit LowerFactor(Matrix l) : l_(std::move(l)) {}
  int dim() const { return l_.rows(); }
  const Matrix& matrix() const { return l_; }
  double operator()(int i, int j) const { return l_(i, j); }

  double logdet() const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) s += std::log(l_(i, i));
    return 2.0 * s;
  }

  // Solves L L^T x = b.
  std::vector<double> solve(const std::vector<double>& b) const {
    const int d = dim();
    std::vector<double> y(b);
    for (int i = 0; i < d; ++i) {
      double s = y[i];
      for (int j = 0; j < i; ++j) s -= l_(i, j) * y[j];
      y[i] = s / l_(i, i);
    }
    for (int i = d - 1; i >= 0; --i) {
      double s = y[i];
      for (int j = i + 1; j < d; ++j) s -= l_(j, i) * y[j];
      y[i] = s / l_(i, i);
    }
    return y;
  }

  SymMatrix inverse() const {
    const int d = dim();
    SymMatrix inv(d);
    std::vector<double> e(d, 0.0);
    for (int k = 0; k < d; ++k) {
      e[k] = 1.0;
      std::vector<double> col = solve(e);
      e[k] = 0.0;
      for (int i = k; i < d; ++i) inv.set(i, k, col[i]);
    }
    return inv;
  }

 private:
  Matrix l_;
};

struct NotPD {
  int pivot;
  double value;
};

using CholeskyResult = std::variant<LowerFactor, NotPD>;

// Pivot tolerance is relative to the largest diagonal entry so the test is
// invariant under uniform rescaling of the matrix.
inline CholeskyResult cholesky(const SymMatrix& m, double pd_tolerance_scale = 1e-12) {
  const int d = m.dim();
  if (!m.all_finite()) throw std::invalid_argument("cholesky: non-finite input");
  double max_diag = 0.0;
  for (int i = 0; i < d; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)));
  const double tol = pd_tolerance_scale * std::max(max_diag, 1e-300);
  Matrix l(d, d);
  for (int j = 0; j < d; ++j) {
    double pivot = m(j, j);
    for (int k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > tol)) return NotPD{j, pivot};
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (int i = j + 1; i < d; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return LowerFactor(std::move(l));
}

inline LowerFactor cholesky_or_throw(const SymMatrix& m, double pd_tolerance_scale = 1e-12) {
  CholeskyResult r = cholesky(m, pd_tolerance_scale);
  if (std::holds_alternative<NotPD>(r)) {
    const NotPD& f = std::get<NotPD>(r);
    throw NotPDError(f.pivot, f.value);
  }
  return std::get<LowerFactor>(std::move(r));
}

// Symmetric positive definite matrix; factorization validated and cached at
// construction.
class SymPDMatrix {
 public:
  SymPDMatrix() = default;
  explicit SymPDMatrix(SymMatrix m) : m_(std::move(m)), chol_(cholesky_or_throw(m_)) {}
  static SymPDMatrix identity(int d) { return SymPDMatrix(SymMatrix::identity(d)); }
  int dim() const { return m_.dim(); }
  const SymMatrix& mat() const { return m_; }
  const LowerFactor& chol() const { return chol_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  SymMatrix m_;
  LowerFactor chol_;
};

inline double logdet_pd(const SymPDMatrix& m) { return m.chol().logdet(); }

inline SymPDMatrix inverse_pd(const SymPDMatrix& m) {
  return SymPDMatrix(m.chol().inverse());
}

struct EigenDecomposition {
  std::vector<double> values;  // nondecreasing
  Matrix vectors;              // column k pairs with values[k]
};

// Cyclic Jacobi rotations. Deterministic and symmetric-exact; adequate for
// the dense sizes this library targets.
inline EigenDecomposition symeig(const SymMatrix& m, int max_sweeps_per_dim = 100) {
  const int d = m.dim();
  if (!m.all_finite()) throw std::invalid_argument("symeig: non-finite input");
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = m(i, j);
  Matrix v = Matrix::identity(d);

  const double scale = std::max(m.max_abs(), 1e-300);
  const double off_tol = 1e-15 * scale;
  const long max_sweeps = static_cast<long>(max_sweeps_per_dim) * std::max(d, 1);
  bool converged = (d == 1);
  for (long sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d - 1; ++p)
      for (int q = p + 1; q < d; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= off_tol) {
      converged = true;
      break;
    }
    for (int p = 0; p < d - 1; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= off_tol * 1e-2) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                      : -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < d; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < d; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (int p = 0; p < d - 1; ++p)
      for (int q = p + 1; q < d; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off > off_tol) throw ConvergenceError("symeig: Jacobi sweeps exhausted");
  }

  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) < a(y, y); });
  EigenDecomposition out;
  out.values.resize(d);
  out.vectors = Matrix(d, d);
  for (int k = 0; k < d; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (int i = 0; i < d; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

// y = M x for symmetric M
inline std::vector<double> symv(const SymMatrix& m, const std::vector<double>& x) {
  const int d = m.dim();
  std::vector<double> y(d, 0.0);
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline double quad_form(const SymMatrix& m, const std::vector<double>& x) {
  double s = 0.0;
  const int d = m.dim();
  for (int i = 0; i < d; ++i) {
    double r = 0.0;
    for (int j = 0; j < d; ++j) r += m(i, j) * x[j];
    s += x[i] * r;
  }
  return s;
}

// V diag(w) V^T as a SymMatrix
inline SymMatrix eigen_recompose(const Matrix& v, const std::vector<double>& w) {
  const int d = v.rows();
  SymMatrix out(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += v(i, k) * w[k] * v(j, k);
      out.set(i, j, s);
    }
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_matrix(const SymMatrix& m) {
  std::string out;
  for (int i = 0; i < m.dim(); ++i) {
    for (int j = 0; j < m.dim(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

// One row per line, comma separated, full square storage, no header.
// Rejects asymmetry above 1e-9 relative to the largest entry.
inline SymMatrix parse_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw ParseError("non-numeric cell '" + cell + "'", lineno);
      }
      while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
      if (pos != cell.size()) throw ParseError("trailing junk in cell '" + cell + "'", lineno);
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty matrix", 0);
  const int d = static_cast<int>(rows.size());
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(rows[i].size()) != d)
      throw ParseError("expected " + std::to_string(d) + " columns, got " +
                           std::to_string(rows[i].size()),
                       i + 1);
  }
  double scale = 0.0;
  for (const auto& r : rows)
    for (double v : r) scale = std::max(scale, std::abs(v));
  SymMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      if (std::abs(rows[i][j] - rows[j][i]) > 1e-9 * std::max(scale, 1e-300))
        throw ParseError("asymmetric entries at (" + std::to_string(i + 1) + "," +
                             std::to_string(j + 1) + ")",
                         i + 1);
      m.set(i, j, 0.5 * (rows[i][j] + rows[j][i]));
    }
  return m;
}

inline SymMatrix parse_matrix(const std::string& text) {
  std::istringstream ss(text);
  return parse_matrix(ss);
}

}  // namespace advprec
