// Worst-case perturbation oracles for max over ||Delta||_p <= delta of
// (x+Delta)^T C (x+Delta), plus the small-delta expansion terms.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "advprec/matrix.hpp"

namespace advprec {

class ZeroComponentError : public std::runtime_error {
 public:
  explicit ZeroComponentError(int index)
      : std::runtime_error("(Cx) has a zero component at index " + std::to_string(index)),
        index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

struct PerturbationSpec {
  double p;      // norm exponent in (1, inf]; infinity() for the sup norm
  double delta;  // radius >= 0

  PerturbationSpec(double p_, double delta_) : p(p_), delta(delta_) {
    if (!(p > 1.0)) throw std::invalid_argument("perturbation norm exponent must exceed 1");
    if (!(delta >= 0.0)) throw std::invalid_argument("perturbation radius must be >= 0");
  }
  bool is_inf() const { return std::isinf(p); }
  double q() const { return is_inf() ? 1.0 : p / (p - 1.0); }
};

struct WorstCaseResult {
  double value = 0.0;
  std::vector<double> maximizer;  // empty when only a bound was computed
  double dual_lambda = std::numeric_limits<double>::quiet_NaN();  // l2 path only
};

namespace detail {

// Secular residual sum g_i^2 / (lambda - c_i)^2 over indices with g_i != 0.
inline double secular_phi(const std::vector<double>& c, const std::vector<double>& g,
                          double lambda) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (g[i] == 0.0) continue;
    const double r = g[i] / (lambda - c[i]);
    s += r * r;
  }
  return s;
}

inline double secular_phi_prime(const std::vector<double>& c, const std::vector<double>& g,
                                double lambda) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (g[i] == 0.0) continue;
    const double dl = lambda - c[i];
    s += -2.0 * g[i] * g[i] / (dl * dl * dl);
  }
  return s;
}

}  // namespace detail

// Exact maximization over the l2 ball via the 1-D dual: the multiplier solves
// sum_i c_i^2 y_i^2 / (lambda - c_i)^2 = delta^2 in the eigenbasis of C, with
// lambda >= lambda_max(C). When the data vector has no weight on the top
// eigenspace the secular residual stays below delta^2 as lambda approaches
// lambda_max from above (the hard case); the maximizer is then completed with
// a top-eigenvector component so the boundary is attained.
inline WorstCaseResult worst_case_l2(const std::vector<double>& x, const SymPDMatrix& cmat,
                                     double delta) {
  const int d = cmat.dim();
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("worst_case_l2: size mismatch");
  if (!(delta >= 0.0)) throw std::invalid_argument("worst_case_l2: delta must be >= 0");

  WorstCaseResult out;
  if (delta == 0.0) {
    out.value = quad_form(cmat.mat(), x);
    out.maximizer.assign(d, 0.0);
    return out;
  }

  const EigenDecomposition eig = symeig(cmat.mat());
  const std::vector<double>& c = eig.values;
  const double c_max = c[d - 1];

  // y = V^T x, g = diag(c) y
  std::vector<double> y(d, 0.0), g(d, 0.0);
  for (int k = 0; k < d; ++k) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += eig.vectors(i, k) * x[i];
    y[k] = s;
    g[k] = c[k] * s;
  }

  const double delta2 = delta * delta;
  const double lam_floor = c_max * (1.0 + 1e-14) + 1e-300;
  std::vector<double> u(d, 0.0);
  double lambda = c_max;

  const bool hard = detail::secular_phi(c, g, lam_floor) < delta2;
  if (hard) {
    // lambda sits at the top eigenvalue; fill the remaining radius along the
    // top eigenvector (eigenvalues sorted ascending, use the last column)
    double norm2 = 0.0;
    for (int i = 0; i < d; ++i) {
      if (g[i] != 0.0 && c_max - c[i] > 0.0) {
        u[i] = g[i] / (c_max - c[i]);
        norm2 += u[i] * u[i];
      }
    }
    const double t = std::sqrt(std::max(delta2 - norm2, 0.0));
    u[d - 1] += t;
    lambda = c_max;
  } else {
    // safeguarded Newton on psi(l) = 1/delta - 1/sqrt(phi(l)), bracketed by
    // [lam_floor, c_max + ||g|| / delta]
    double gnorm = 0.0;
    for (int i = 0; i < d; ++i) gnorm += g[i] * g[i];
    gnorm = std::sqrt(gnorm);
    double lo = lam_floor;
    double hi = c_max + gnorm / delta + 1e-300;
    lambda = hi;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
      const double phi = detail::secular_phi(c, g, lambda);
      if (std::abs(phi - delta2) <= 1e-13 * delta2 || (hi - lo) <= 1e-15 * (1.0 + std::abs(lambda))) {
        converged = true;
        break;
      }
      if (phi > delta2)
        lo = lambda;
      else
        hi = lambda;
      const double w = std::sqrt(phi);
      const double psi = 1.0 / delta - 1.0 / w;
      const double dpsi = detail::secular_phi_prime(c, g, lambda) / (2.0 * w * phi);
      double next = lambda - psi / dpsi;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      lambda = next;
    }
    if (!converged) throw ConvergenceError("worst_case_l2: secular solve did not converge");
    for (int i = 0; i < d; ++i) u[i] = (g[i] == 0.0) ? 0.0 : g[i] / (lambda - c[i]);
  }

  double value = 0.0;
  for (int i = 0; i < d; ++i) {
    const double yi = y[i] + u[i];
    value += c[i] * yi * yi;
  }
  out.value = value;
  out.dual_lambda = lambda;
  out.maximizer.assign(d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) out.maximizer[i] += eig.vectors(i, k) * u[k];
  return out;
}

// Exact maximization over the sup-norm box by vertex enumeration: the max of
// a convex quadratic over a box is attained at a vertex. Gray-code order
// keeps the per-vertex update O(d). Ties go to the lexicographically
// smallest sign vector.
inline WorstCaseResult worst_case_linf_exact(const std::vector<double>& x,
                                             const SymPDMatrix& cmat, double delta) {
  const int d = cmat.dim();
  if (static_cast<int>(x.size()) != d)
    throw std::invalid_argument("worst_case_linf_exact: size mismatch");
  if (!(delta >= 0.0)) throw std::invalid_argument("worst_case_linf_exact: delta must be >= 0");
  if (d > 20)
    throw std::invalid_argument(
        "worst_case_linf_exact: refusing d > 20 (2^d vertex enumeration)");

  WorstCaseResult out;
  if (delta == 0.0) {
    out.value = quad_form(cmat.mat(), x);
    out.maximizer.assign(d, 0.0);
    return out;
  }

  const SymMatrix& c = cmat.mat();
  std::vector<int> sign(d, -1);
  std::vector<double> z(d);  // x + Delta
  for (int i = 0; i < d; ++i) z[i] = x[i] - delta;
  std::vector<double> cz = symv(c, z);
  double value = 0.0;
  for (int i = 0; i < d; ++i) value += z[i] * cz[i];

  double best = value;
  std::vector<int> best_sign = sign;

  const std::uint64_t total = 1ULL << d;
  for (std::uint64_t m = 1; m < total; ++m) {
    // flip the coordinate given by the Gray-code transition
    int k = 0;
    {
      std::uint64_t t = m;
      while (!(t & 1ULL)) {
        t >>= 1;
        ++k;
      }
    }
    const double h = (sign[k] < 0) ? 2.0 * delta : -2.0 * delta;
    value += 2.0 * h * cz[k] + h * h * c(k, k);
    z[k] += h;
    sign[k] = -sign[k];
    for (int i = 0; i < d; ++i) cz[i] += h * c(i, k);

    const double tie_tol = 1e-12 * (1.0 + std::abs(best));
    if (value > best + tie_tol) {
      best = value;
      best_sign = sign;
    } else if (std::abs(value - best) <= tie_tol) {
      if (std::lexicographical_compare(sign.begin(), sign.end(), best_sign.begin(),
                                       best_sign.end())) {
        best_sign = sign;
      }
    }
  }

  // recompute at the winning vertex so roundoff from the running update
  // cannot leak into the reported value
  std::vector<double> zbest(d);
  for (int i = 0; i < d; ++i) zbest[i] = x[i] + delta * best_sign[i];
  out.value = quad_form(c, zbest);
  out.maximizer.resize(d);
  for (int i = 0; i < d; ++i) out.maximizer[i] = delta * best_sign[i];
  return out;
}

// Convex upper bound x^T C x + 2 delta ||Cx||_1 + delta^2 ||C||_{1,1}.
inline double surrogate_linf(const std::vector<double>& x, const SymPDMatrix& cmat,
                             double delta) {
  const int d = cmat.dim();
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("surrogate_linf: size mismatch");
  const std::vector<double> cx = symv(cmat.mat(), x);
  double quad = 0.0, l1 = 0.0, c11 = 0.0;
  for (int i = 0; i < d; ++i) {
    quad += x[i] * cx[i];
    l1 += std::abs(cx[i]);
    for (int j = 0; j < d; ++j) c11 += std::abs(cmat(i, j));
  }
  return quad + 2.0 * delta * l1 + delta * delta * c11;
}

struct ExpansionTerms {
  double zeroth = 0.0;  // x^T C x
  double first = 0.0;   // 2 delta ||Cx||_q
  double second = 0.0;  // delta^2 v^T C v with the Holder-dual direction v
  double total = 0.0;
};

// v = sign(Cx) .* |Cx|^{q-1} / ||Cx||_q^{q-1}, the unit l_p vector attaining
// the Holder pairing with Cx.
inline ExpansionTerms expansion_terms(const std::vector<double>& x, const SymPDMatrix& cmat,
                                      const PerturbationSpec& spec) {
  const int d = cmat.dim();
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("expansion_terms: size mismatch");
  const std::vector<double> cx = symv(cmat.mat(), x);
  const double q = spec.q();

  if (spec.is_inf()) {
    for (int i = 0; i < d; ++i)
      if (cx[i] == 0.0) throw ZeroComponentError(i);
  }

  double norm_q = 0.0;
  if (spec.is_inf()) {
    for (int i = 0; i < d; ++i) norm_q += std::abs(cx[i]);
  } else {
    for (int i = 0; i < d; ++i) norm_q += std::pow(std::abs(cx[i]), q);
    norm_q = std::pow(norm_q, 1.0 / q);
  }

  std::vector<double> v(d, 0.0);
  if (norm_q > 0.0) {
    const double denom = std::pow(norm_q, q - 1.0);
    for (int i = 0; i < d; ++i) {
      const double s = (cx[i] > 0.0) ? 1.0 : (cx[i] < 0.0 ? -1.0 : 0.0);
      v[i] = s * std::pow(std::abs(cx[i]), q - 1.0) / denom;
    }
  }

  ExpansionTerms out;
  out.zeroth = 0.0;
  for (int i = 0; i < d; ++i) out.zeroth += x[i] * cx[i];
  out.first = 2.0 * spec.delta * norm_q;
  out.second = spec.delta * spec.delta * quad_form(cmat.mat(), v);
  out.total = out.zeroth + out.first + out.second;
  return out;
}

}  // namespace advprec
