// The l2-perturbed estimator: eigen-decoupled solve of the shared-multiplier
// dual reformulation, a generic projected-gradient reference solver, the
// Wasserstein-form objective, and a sample-wise exact variant.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "advprec/adversary.hpp"
#include "advprec/dataset.hpp"
#include "advprec/matrix.hpp"

namespace advprec {

struct L2FitResult {
  SymPDMatrix estimate;
  double lambda_star = 0.0;  // shared dual variable, lambda I - C remains PD
  double objective = 0.0;
  std::vector<std::pair<double, double>> eigen_path;  // (a_i, c_i), a ascending
  bool boundary = false;  // some zero sample eigenvalue hit the c -> lambda limit
};

struct L2SolverConfig {
  int max_bracket_steps = 200;
  int golden_iters = 120;
  int polish_iters = 60;
};

namespace detail {

// Per-eigenvalue minimizer of -log c + a c + a c^2/(lambda - c) over
// (0, lambda). Stationarity gives a lambda^2 c = (lambda - c)^2, solved in
// the cancellation-free form below. a = 0 pushes the infimum to the
// boundary; it is returned at lambda (1 - 1e-8) and flagged by the caller.
inline double l2_inner_c(double a, double lambda) {
  const double t = a * lambda;
  const double c = 2.0 * lambda / (2.0 + t + std::sqrt(t * (t + 4.0)));
  return std::min(c, lambda * (1.0 - 1e-8));
}

inline double l2_inner_value(double a, double c, double lambda) {
  return -std::log(c) + a * c + a * c * c / (lambda - c);
}

}  // namespace detail

// Eq.-(4)-style objective: -log det C + tr(A_bar C) + lambda delta^2
// + tr(C (lambda I - C)^{-1} C A_bar). Requires lambda I - C PD.
inline double objective_l2(const SymPDMatrix& c, double lambda, const SymMatrix& a_bar,
                           double delta) {
  const int d = c.dim();
  SymMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) m.set(i, j, (i == j ? lambda : 0.0) - c(i, j));
  const LowerFactor mf = cholesky_or_throw(m);
  // T = C M^{-1} C
  SymMatrix t(d);
  std::vector<double> col(d);
  for (int k = 0; k < d; ++k) {
    for (int i = 0; i < d; ++i) col[i] = c(i, k);
    const std::vector<double> mc = mf.solve(col);
    for (int i = 0; i <= k; ++i) {
      double s = 0.0;
      for (int r = 0; r < d; ++r) s += c(i, r) * mc[r];
      t.set(i, k, s);
    }
  }
  // the column-wise fill above writes (i,k) for i<=k only; symmetry of T is
  // structural through SymMatrix::set
  return -logdet_pd(c) + frobenius_inner(a_bar, c.mat()) + lambda * delta * delta +
         frobenius_inner(t, a_bar);
}

// |tr(C (lI-C)^{-1} C A) - (l^2 tr((lI-C)^{-1} A) - tr((lI+C) A))|
inline double trace_identity_check(const SymPDMatrix& c, double lambda, const SymMatrix& a_bar) {
  const int d = c.dim();
  SymMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) m.set(i, j, (i == j ? lambda : 0.0) - c(i, j));
  const LowerFactor mf = cholesky_or_throw(m);
  const SymMatrix minv = mf.inverse();

  double lhs = 0.0;
  {
    std::vector<double> col(d), mc(d);
    for (int k = 0; k < d; ++k) {
      for (int i = 0; i < d; ++i) col[i] = c(i, k);
      mc = mf.solve(col);
      // lhs += (C M^{-1} C A)_kk accumulated as sum_i (CM^{-1})_{k i} (C A)_{i k}
      for (int i = 0; i < d; ++i) {
        double ca = 0.0;
        for (int r = 0; r < d; ++r) ca += c(i, r) * a_bar(r, k);
        lhs += mc[i] * ca;
      }
    }
  }
  double rhs = lambda * lambda * frobenius_inner(minv, a_bar);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) rhs -= ((i == j ? lambda : 0.0) + c(i, j)) * a_bar(j, i);
  return std::abs(lhs - rhs);
}

// Wasserstein-form objective at radius rho:
// -log det C + lambda (rho^2 - tr(A_bar)) + lambda^2 tr((lambda I - C)^{-1} A_bar)
inline double wasserstein_objective(const SymPDMatrix& c, double lambda, const Dataset& data,
                                    double rho) {
  const SymMatrix a_bar = second_moment(data);
  const int d = c.dim();
  SymMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) m.set(i, j, (i == j ? lambda : 0.0) - c(i, j));
  const LowerFactor mf = cholesky_or_throw(m);
  const SymMatrix minv = mf.inverse();
  return -logdet_pd(c) + lambda * (rho * rho - a_bar.trace()) +
         lambda * lambda * frobenius_inner(minv, a_bar);
}

namespace detail {

struct OuterEval {
  double value;
  double derivative;  // delta^2 - tr(C*(lambda)) / lambda^2 by Danskin
};

inline OuterEval l2_outer_eval(const std::vector<double>& a, double lambda, double delta) {
  double value = lambda * delta * delta;
  double trace = 0.0;
  for (double ai : a) {
    const double ci = l2_inner_c(ai, lambda);
    value += l2_inner_value(ai, ci, lambda);
    trace += ci;
  }
  return {value, delta * delta - trace / (lambda * lambda)};
}

}  // namespace detail

inline L2FitResult fit_l2_from_moment(const SymMatrix& a_bar, double delta,
                                      const L2SolverConfig& cfg = {}) {
  if (!(delta > 0.0))
    throw std::invalid_argument("fit_l2: delta must be positive (use the unpenalized MLE path)");
  const int d = a_bar.dim();
  const EigenDecomposition eig = symeig(a_bar);
  std::vector<double> a(eig.values);
  for (double& ai : a) ai = std::max(ai, 0.0);  // clip eigen roundoff at zero

  // bracket the outer stationary point: derivative is negative for small
  // lambda and approaches delta^2 from below as lambda grows
  double lo = std::sqrt(static_cast<double>(d)) / delta;
  double hi = lo;
  int guard = 0;
  while (detail::l2_outer_eval(a, lo, delta).derivative > 0.0) {
    lo *= 0.5;
    if (++guard > cfg.max_bracket_steps) throw ConvergenceError("fit_l2: bracket expansion failed");
  }
  guard = 0;
  while (detail::l2_outer_eval(a, hi, delta).derivative < 0.0) {
    hi *= 2.0;
    if (++guard > cfg.max_bracket_steps) throw ConvergenceError("fit_l2: bracket expansion failed");
  }

  // golden-section localization, then derivative bisection polish
  const double gr = 0.6180339887498949;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = detail::l2_outer_eval(a, x1, delta).value;
  double f2 = detail::l2_outer_eval(a, x2, delta).value;
  for (int it = 0; it < cfg.golden_iters && (hi - lo) > 1e-12 * (1.0 + hi); ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = detail::l2_outer_eval(a, x1, delta).value;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = detail::l2_outer_eval(a, x2, delta).value;
    }
  }
  double plo = lo * (1.0 - 1e-6), phi = hi * (1.0 + 1e-6);
  if (detail::l2_outer_eval(a, plo, delta).derivative > 0.0) plo = lo * 0.5;
  if (detail::l2_outer_eval(a, phi, delta).derivative < 0.0) phi = hi * 2.0;
  for (int it = 0; it < cfg.polish_iters; ++it) {
    const double mid = 0.5 * (plo + phi);
    if (detail::l2_outer_eval(a, mid, delta).derivative < 0.0)
      plo = mid;
    else
      phi = mid;
  }
  const double lambda = 0.5 * (plo + phi);

  L2FitResult out;
  std::vector<double> c(d);
  for (int i = 0; i < d; ++i) {
    c[i] = detail::l2_inner_c(a[i], lambda);
    if (c[i] >= lambda * (1.0 - 1e-8)) out.boundary = true;
  }
  // precision eigenvalues reverse the sample-covariance order
  for (int i = 0; i + 1 < d; ++i) {
    if (a[i] <= a[i + 1] && c[i] < c[i + 1] - 1e-12 * (1.0 + c[i]))
      throw std::logic_error("fit_l2: eigenvalue order not preserved");
  }
  out.estimate = SymPDMatrix(eigen_recompose(eig.vectors, c));
  out.lambda_star = lambda;
  out.objective = detail::l2_outer_eval(a, lambda, delta).value;
  out.eigen_path.reserve(d);
  for (int i = 0; i < d; ++i) out.eigen_path.emplace_back(a[i], c[i]);
  return out;
}

inline L2FitResult fit_l2(const Dataset& data, double delta, const L2SolverConfig& cfg = {}) {
  if (data.d < 1) throw std::invalid_argument("fit_l2: empty dataset");
  return fit_l2_from_moment(second_moment(data), delta, cfg);
}

// Projected gradient descent over full symmetric C and scalar lambda with
// Cholesky feasibility backtracking; the cross-check for the eigen-decoupled
// ansatz. Slow path, d <= 8.
inline L2FitResult reference_solver_l2(const Dataset& data, double delta, int max_iters = 400000,
                                       double grad_tol = 1e-10) {
  if (data.d > 8) throw std::invalid_argument("reference_solver_l2: slow path capped at d = 8");
  if (!(delta > 0.0)) throw std::invalid_argument("reference_solver_l2: delta must be positive");
  const int d = data.d;
  const SymMatrix a_bar = second_moment(data);

  SymMatrix reg(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) reg.set(i, j, a_bar(i, j) + (i == j ? 0.5 * delta : 0.0));
  SymMatrix c = SymPDMatrix(reg).chol().inverse();
  double lambda = 0.0;
  {
    const EigenDecomposition e = symeig(c);
    lambda = 2.0 * e.values[d - 1] + 1.0;
  }

  auto eval = [&](const SymMatrix& cm, double lm, bool* ok) -> double {
    *ok = false;
    CholeskyResult cr = cholesky(cm);
    if (!std::holds_alternative<LowerFactor>(cr)) return 0.0;
    SymMatrix m(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) m.set(i, j, (i == j ? lm : 0.0) - cm(i, j));
    CholeskyResult mr = cholesky(m);
    if (!std::holds_alternative<LowerFactor>(mr)) return 0.0;
    *ok = true;
    const LowerFactor& cf = std::get<LowerFactor>(cr);
    const LowerFactor& mf = std::get<LowerFactor>(mr);
    const SymMatrix minv = mf.inverse();
    // tr(C M^{-1} C A) via T = M^{-1} C computed columnwise
    double resolvent = 0.0;
    std::vector<double> col(d);
    for (int k = 0; k < d; ++k) {
      for (int i = 0; i < d; ++i) col[i] = cm(i, k);
      const std::vector<double> mc = mf.solve(col);
      for (int i = 0; i < d; ++i) {
        double ca = 0.0;
        for (int r = 0; r < d; ++r) ca += cm(i, r) * a_bar(r, k);
        resolvent += mc[i] * ca;
      }
    }
    return -cf.logdet() + frobenius_inner(a_bar, cm) + lm * delta * delta + resolvent;
  };

  bool ok = false;
  double f = eval(c, lambda, &ok);
  if (!ok) throw ConvergenceError("reference_solver_l2: infeasible start");

  double step = 1e-2;
  int it = 0;
  for (it = 0; it < max_iters; ++it) {
    // gradients
    SymMatrix m(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) m.set(i, j, (i == j ? lambda : 0.0) - c(i, j));
    const LowerFactor mf = cholesky_or_throw(m);
    const SymMatrix minv = mf.inverse();
    const SymMatrix cinv = cholesky_or_throw(c).inverse();

    // P = M^{-1} C A, Q = M^{-1} C A C M^{-1}
    Matrix p(d, d);
    {
      std::vector<double> col(d);
      for (int k = 0; k < d; ++k) {
        for (int i = 0; i < d; ++i) {
          double s = 0.0;
          for (int r = 0; r < d; ++r) s += c(i, r) * a_bar(r, k);
          col[i] = s;
        }
        const std::vector<double> sol = mf.solve(col);  // M^{-1} (C A) column k
        for (int i = 0; i < d; ++i) p(i, k) = sol[i];
      }
    }
    Matrix q(d, d);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) {
        double s = 0.0;
        for (int r = 0; r < d; ++r) s += p(i, r) * c(r, k);
        q(i, k) = s;
      }
    Matrix qm(d, d);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) {
        double s = 0.0;
        for (int r = 0; r < d; ++r) s += q(i, r) * minv(r, k);
        qm(i, k) = s;
      }

    SymMatrix grad_c(d);
    double grad_norm = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) {
        // gradient of tr(C M^{-1} C A): A C M^{-1} + M^{-1} C A + M^{-1} C A C M^{-1},
        // symmetrized
        const double t1 = p(j, i) + p(i, j);  // M^{-1}CA + its transpose (= ACM^{-1})
        const double t2 = 0.5 * (qm(i, j) + qm(j, i));
        const double g = -cinv(i, j) + a_bar(i, j) + t1 + t2;
        grad_c.set(i, j, g);
        grad_norm = std::max(grad_norm, std::abs(g));
      }
    double grad_l = delta * delta;
    for (int i = 0; i < d; ++i) grad_l -= qm(i, i);
    grad_norm = std::max(grad_norm, std::abs(grad_l));

    if (grad_norm <= grad_tol * (1.0 + std::abs(f))) break;

    bool moved = false;
    for (int bt = 0; bt < 80; ++bt) {
      SymMatrix c_new(d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) c_new.set(i, j, c(i, j) - step * grad_c(i, j));
      const double l_new = lambda - step * grad_l;
      bool ok2 = false;
      const double f_new = (l_new > 0.0) ? eval(c_new, l_new, &ok2) : 0.0;
      if (ok2 && f_new <= f - 0.25 * step * grad_norm * grad_norm) {
        c = std::move(c_new);
        lambda = l_new;
        f = f_new;
        step *= 1.25;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // step underflow: as converged as this path gets
  }

  L2FitResult out;
  out.estimate = SymPDMatrix(c);
  out.lambda_star = lambda;
  out.objective = f;
  const EigenDecomposition ea = symeig(a_bar);
  const EigenDecomposition ec = symeig(c);
  out.eigen_path.reserve(d);
  for (int i = 0; i < d; ++i) out.eigen_path.emplace_back(ea.values[i], ec.values[d - 1 - i]);
  return out;
}

// -log det C + mean_i of the exact per-sample worst case; each sample gets
// its own multiplier, so this is the sample-wise dual seen by Lemma-1-style
// reasoning and lower-bounds the shared-lambda objective at the same C.
inline double samplewise_objective_l2(const Dataset& data, const SymPDMatrix& c, double delta) {
  double mean = 0.0;
  std::vector<double> x(data.d);
  for (int i = 0; i < data.n; ++i) {
    for (int j = 0; j < data.d; ++j) x[j] = data(i, j);
    mean += worst_case_l2(x, c, delta).value;
  }
  return -logdet_pd(c) + mean / data.n;
}

struct SamplewiseL2Fit {
  SymPDMatrix estimate;
  double objective = 0.0;
  int iterations = 0;
};

// Minimizes the exact adversarial objective
//   -log det C + mean_i max_{||Delta||_2 <= delta} (x_i+Delta)^T C (x_i+Delta)
// by gradient descent with Danskin gradients (x+Delta*)(x+Delta*)^T and a
// Barzilai-Borwein step safeguarded by Armijo backtracking.
inline SamplewiseL2Fit fit_l2_samplewise(const Dataset& data, double delta, int max_iters = 2000,
                                         double grad_tol = 1e-7) {
  if (!(delta > 0.0)) throw std::invalid_argument("fit_l2_samplewise: delta must be positive");
  const int d = data.d, n = data.n;

  // objective and gradient sharing one eigendecomposition of C per call
  auto eval = [&](const SymMatrix& cm, SymMatrix* grad, bool* ok) -> double {
    *ok = false;
    CholeskyResult cr = cholesky(cm);
    if (!std::holds_alternative<LowerFactor>(cr)) return 0.0;
    const LowerFactor& cf = std::get<LowerFactor>(cr);
    const EigenDecomposition eig = symeig(cm);
    const std::vector<double>& ev = eig.values;
    const double c_max = ev[d - 1];
    const double delta2 = delta * delta;

    std::vector<double> y(d), g(d), u(d), z(d);
    std::vector<double> gacc(static_cast<std::size_t>(d) * d, 0.0);
    double mean = 0.0;
    for (int s = 0; s < n; ++s) {
      const double* xs = data.row(s);
      for (int k = 0; k < d; ++k) {
        double acc = 0.0;
        for (int i = 0; i < d; ++i) acc += eig.vectors(i, k) * xs[i];
        y[k] = acc;
        g[k] = ev[k] * acc;
      }
      const double lam_floor = c_max * (1.0 + 1e-14) + 1e-300;
      double lambda;
      if (detail::secular_phi(ev, g, lam_floor) < delta2) {
        std::fill(u.begin(), u.end(), 0.0);
        double norm2 = 0.0;
        for (int i = 0; i < d; ++i) {
          if (g[i] != 0.0 && c_max - ev[i] > 0.0) {
            u[i] = g[i] / (c_max - ev[i]);
            norm2 += u[i] * u[i];
          }
        }
        u[d - 1] += std::sqrt(std::max(delta2 - norm2, 0.0));
        lambda = c_max;
      } else {
        double gnorm = 0.0;
        for (int i = 0; i < d; ++i) gnorm += g[i] * g[i];
        gnorm = std::sqrt(gnorm);
        double lo = lam_floor, hi = c_max + gnorm / delta + 1e-300;
        lambda = hi;
        for (int it = 0; it < 200; ++it) {
          const double phi = detail::secular_phi(ev, g, lambda);
          if (std::abs(phi - delta2) <= 1e-12 * delta2 ||
              (hi - lo) <= 1e-14 * (1.0 + std::abs(lambda)))
            break;
          if (phi > delta2)
            lo = lambda;
          else
            hi = lambda;
          const double w = std::sqrt(phi);
          const double psi = 1.0 / delta - 1.0 / w;
          const double dpsi = detail::secular_phi_prime(ev, g, lambda) / (2.0 * w * phi);
          double next = lambda - psi / dpsi;
          if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
          lambda = next;
        }
        for (int i = 0; i < d; ++i) u[i] = (g[i] == 0.0) ? 0.0 : g[i] / (lambda - ev[i]);
      }
      double v = 0.0;
      for (int i = 0; i < d; ++i) {
        const double yi = y[i] + u[i];
        v += ev[i] * yi * yi;
        z[i] = yi;
      }
      mean += v;
      if (grad) {
        // z is in the eigenbasis; accumulate V z (V z)^T lazily as z z^T in
        // the eigenbasis and rotate once at the end
        for (int i = 0; i < d; ++i)
          for (int j = 0; j <= i; ++j) gacc[static_cast<std::size_t>(i) * d + j] += z[i] * z[j];
      }
    }
    mean /= n;
    if (grad) {
      SymMatrix zz(d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) zz.set(i, j, gacc[static_cast<std::size_t>(i) * d + j] / n);
      // grad = -C^{-1} + V zz V^T
      const SymMatrix cinv = cf.inverse();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) {
          double s = 0.0;
          for (int r = 0; r < d; ++r) {
            double vr = 0.0;
            for (int t = 0; t < d; ++t) vr += zz(r, t) * eig.vectors(j, t);
            s += eig.vectors(i, r) * vr;
          }
          grad->set(i, j, s - cinv(i, j));
        }
    }
    *ok = true;
    return -cf.logdet() + mean;
  };

  SymMatrix c(d);
  {
    // warm start at the shared-lambda fit
    L2FitResult warm = fit_l2_from_moment(second_moment(data), delta);
    c = warm.estimate.mat();
  }
  SymMatrix grad(d), grad_prev(d), c_prev(d);
  bool ok = false;
  double f = eval(c, &grad, &ok);
  if (!ok) throw ConvergenceError("fit_l2_samplewise: infeasible start");

  double step = 1e-2;
  int it = 0;
  for (it = 0; it < max_iters; ++it) {
    double gnorm = grad.max_abs();
    if (gnorm <= grad_tol) break;

    if (it > 0) {
      // Barzilai-Borwein step from the last displacement pair
      double sy = 0.0, ss = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          const double si = c(i, j) - c_prev(i, j);
          const double yi = grad(i, j) - grad_prev(i, j);
          sy += si * yi;
          ss += si * si;
        }
      if (sy > 0.0) step = std::clamp(ss / sy, 1e-8, 1e4);
    }

    c_prev = c;
    grad_prev = grad;
    bool moved = false;
    double trial = step;
    for (int bt = 0; bt < 60; ++bt) {
      SymMatrix c_new(d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) c_new.set(i, j, c(i, j) - trial * grad(i, j));
      bool ok2 = false;
      const double f_new = eval(c_new, nullptr, &ok2);
      if (ok2 && f_new <= f - 1e-4 * trial * gnorm * gnorm) {
        c = std::move(c_new);
        f = eval(c, &grad, &ok2);
        moved = true;
        break;
      }
      trial *= 0.5;
    }
    if (!moved) break;  // line search exhausted at the numerical floor
  }

  SamplewiseL2Fit out{SymPDMatrix(c), f, it};
  return out;
}

}  // namespace advprec
