// Weighted graphical lasso by proximal Newton: coordinate descent on the
// quadratic model over the free set, entrywise soft-thresholding, Armijo
// backtracking restricted to Cholesky-feasible steps.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "advprec/dataset.hpp"
#include "advprec/matrix.hpp"

namespace advprec {

// Entrywise nonnegative symmetric penalty. Diagonal entries are zero unless
// penalize_diagonal is set.
struct PenaltyMatrix {
  SymMatrix entries;
  bool penalize_diagonal = false;
};

struct SolverConfig {
  double tol_kkt = 1e-6;
  int max_newton_iters = 100;
  int max_cd_sweeps = 20;
  double armijo_sigma = 0.25;  // in (0, 0.5)
  double armijo_beta = 0.5;    // in (0, 1)
  bool center = false;         // subtract column means before forming A_bar
  std::vector<double>* objective_trace = nullptr;
};

struct EstimateResult {
  SymPDMatrix estimate;
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  // unordered off-diagonal pairs (i<j) carrying nonzero entries; the
  // complement is exact zeros produced by the thresholding updates
  std::vector<std::pair<int, int>> support;
};

inline std::vector<double> empirical_abs_means(const Dataset& data) {
  if (data.n < 1) throw std::invalid_argument("empirical_abs_means: empty dataset");
  std::vector<double> omega(data.d, 0.0);
  for (int i = 0; i < data.n; ++i)
    for (int j = 0; j < data.d; ++j) omega[j] += std::abs(data(i, j));
  for (double& w : omega) w /= data.n;
  return omega;
}

// lambda_kj = delta (omega_k + omega_j) + delta^2 off the diagonal; the
// diagonal gets 2 delta omega_k + delta^2 only when flagged.
inline PenaltyMatrix build_penalty(const std::vector<double>& omega, double delta,
                                   bool penalize_diagonal) {
  if (!(delta >= 0.0)) throw std::invalid_argument("build_penalty: negative delta");
  for (double w : omega)
    if (!(w >= 0.0)) throw std::invalid_argument("build_penalty: negative abs mean");
  const int d = static_cast<int>(omega.size());
  PenaltyMatrix pen;
  pen.entries = SymMatrix(d);
  pen.penalize_diagonal = penalize_diagonal;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      if (i == j && !penalize_diagonal) continue;
      pen.entries.set(i, j, delta * (omega[i] + omega[j]) + delta * delta);
    }
  return pen;
}

inline PenaltyMatrix uniform_offdiag_penalty(int d, double lambda) {
  PenaltyMatrix pen;
  pen.entries = SymMatrix(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < i; ++j) pen.entries.set(i, j, lambda);
  return pen;
}

inline double penalty_value(const PenaltyMatrix& pen, const SymMatrix& c) {
  double s = 0.0;
  const int d = c.dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s += pen.entries(i, j) * std::abs(c(i, j));
  return s;
}

inline double glasso_objective(const SymMatrix& a_bar, const PenaltyMatrix& pen,
                               const SymPDMatrix& c) {
  return -logdet_pd(c) + frobenius_inner(a_bar, c.mat()) + penalty_value(pen, c.mat());
}

// Distance of A_bar - C^{-1} from the subdifferential of the penalty term:
// |grad + lambda sign| on nonzero entries, the overshoot beyond [-l, l] on
// zeros.
inline double kkt_residual_from_inverse(const SymMatrix& a_bar, const PenaltyMatrix& pen,
                                        const SymMatrix& c, const SymMatrix& w) {
  const int d = c.dim();
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      const double g = a_bar(i, j) - w(i, j);
      const double l = pen.entries(i, j);
      double r;
      if (c(i, j) != 0.0)
        r = std::abs(g + l * (c(i, j) > 0.0 ? 1.0 : -1.0));
      else
        r = std::max(std::abs(g) - l, 0.0);
      worst = std::max(worst, r);
    }
  return worst;
}

inline double kkt_residual(const SymMatrix& a_bar, const PenaltyMatrix& pen,
                           const SymPDMatrix& c) {
  return kkt_residual_from_inverse(a_bar, pen, c.mat(), inverse_pd(c).mat());
}

inline std::vector<std::pair<int, int>> support_of(const SymMatrix& c) {
  std::vector<std::pair<int, int>> s;
  for (int i = 0; i < c.dim(); ++i)
    for (int j = i + 1; j < c.dim(); ++j)
      if (c(i, j) != 0.0) s.emplace_back(i, j);
  return s;
}

inline EstimateResult weighted_glasso(const SymMatrix& a_bar, const PenaltyMatrix& pen,
                                      const SolverConfig& cfg = {}) {
  const int d = a_bar.dim();
  if (pen.entries.dim() != d) throw std::invalid_argument("weighted_glasso: penalty shape");
  for (int i = 0; i < d; ++i) {
    if (!(a_bar(i, i) > 0.0))
      throw std::invalid_argument("weighted_glasso: A_bar diagonal must be positive");
    for (int j = 0; j < d; ++j)
      if (!(pen.entries(i, j) >= 0.0))
        throw std::invalid_argument("weighted_glasso: negative penalty entry");
  }

  SymMatrix c(d);
  for (int i = 0; i < d; ++i) c.set(i, i, 1.0 / a_bar(i, i));
  LowerFactor chol = cholesky_or_throw(c);
  double objective =
      -chol.logdet() + frobenius_inner(a_bar, c) + penalty_value(pen, c);
  if (cfg.objective_trace) {
    cfg.objective_trace->clear();
    cfg.objective_trace->push_back(objective);
  }

  Matrix u(d, d);  // U = D W, rebuilt each Newton iteration
  SymMatrix dmat(d);
  double kkt = 0.0;
  int iter = 0;
  for (iter = 0; iter < cfg.max_newton_iters; ++iter) {
    const SymMatrix w = chol.inverse();
    kkt = kkt_residual_from_inverse(a_bar, pen, c, w);
    if (kkt <= cfg.tol_kkt) break;

    // free set: nonzeros plus entries whose gradient escapes the
    // subdifferential interval
    std::vector<std::pair<int, int>> free_set;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        if (c(i, j) != 0.0 || std::abs(a_bar(i, j) - w(i, j)) > pen.entries(i, j))
          free_set.emplace_back(i, j);
      }

    dmat = SymMatrix(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) u(i, j) = 0.0;

    double dmax = 0.0;
    for (int sweep = 0; sweep < cfg.max_cd_sweeps; ++sweep) {
      double change = 0.0;
      for (const auto& [i, j] : free_set) {
        const double wij = w(i, j);
        const double a = (i == j) ? wij * wij : wij * wij + w(i, i) * w(j, j);
        double wdw = 0.0;
        for (int k = 0; k < d; ++k) wdw += w(i, k) * u(k, j);
        const double b = a_bar(i, j) - wij + wdw;
        const double cd_old = c(i, j) + dmat(i, j);
        const double l = pen.entries(i, j);
        const double f = cd_old - b / a;
        double cd_new;
        if (l == 0.0)
          cd_new = f;
        else
          cd_new = (f > l / a) ? f - l / a : ((f < -l / a) ? f + l / a : 0.0);
        const double mu = cd_new - cd_old;
        if (mu != 0.0) {
          dmat.set(i, j, dmat(i, j) + mu);
          if (i == j) {
            for (int k = 0; k < d; ++k) u(i, k) += mu * w(j, k);
          } else {
            for (int k = 0; k < d; ++k) u(i, k) += mu * w(j, k);
            for (int k = 0; k < d; ++k) u(j, k) += mu * w(i, k);
          }
          change = std::max(change, std::abs(mu));
        }
      }
      dmax = std::max(dmax, change);
      if (change <= 1e-12 * (1.0 + c.max_abs())) break;
    }

    if (dmat.max_abs() <= 1e-14 * (1.0 + c.max_abs())) break;  // numerical floor

    // line search on f(C + alpha D)
    double dir = -penalty_value(pen, c);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) dir += (a_bar(i, j) - w(i, j)) * dmat(i, j);
    {
      SymMatrix cand(d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) cand.set(i, j, c(i, j) + dmat(i, j));
      dir += penalty_value(pen, cand);
    }

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      SymMatrix cand(d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) cand.set(i, j, c(i, j) + alpha * dmat(i, j));
      CholeskyResult cr = cholesky(cand);
      if (std::holds_alternative<LowerFactor>(cr)) {
        LowerFactor lf = std::get<LowerFactor>(std::move(cr));
        const double cand_obj =
            -lf.logdet() + frobenius_inner(a_bar, cand) + penalty_value(pen, cand);
        if (cand_obj <= objective + cfg.armijo_sigma * alpha * dir) {
          c = std::move(cand);
          chol = std::move(lf);
          objective = cand_obj;
          accepted = true;
          break;
        }
      }
      alpha *= cfg.armijo_beta;
    }
    if (!accepted) throw ConvergenceError("weighted_glasso: line search failed");
    if (cfg.objective_trace) cfg.objective_trace->push_back(objective);

    double diag_max = 0.0;
    for (int i = 0; i < d; ++i) diag_max = std::max(diag_max, c(i, i));
    if (diag_max > 1e10)
      throw DivergenceError("weighted_glasso: diverging diagonal, objective likely unbounded");
  }

  if (kkt > cfg.tol_kkt) {
    // the loop can exit at the cap or at the numerical floor; re-examine
    const SymMatrix w = chol.inverse();
    kkt = kkt_residual_from_inverse(a_bar, pen, c, w);
    if (kkt > cfg.tol_kkt)
      throw ConvergenceError("weighted_glasso: iteration cap before reaching tol_kkt");
  }

  EstimateResult out{SymPDMatrix(c), objective, iter, kkt, support_of(c)};
  return out;
}

// Composition: second moments about zero (unless cfg.center), empirical
// scale weights, Eq.-style penalty, then the weighted solve.
inline EstimateResult fit_linf(const Dataset& data, double delta, const SolverConfig& cfg = {},
                               bool penalize_diagonal = false) {
  if (data.d < 2 || data.n < 2) throw std::invalid_argument("fit_linf: need n >= 2 and d >= 2");
  const SymMatrix a_bar = second_moment(data, cfg.center);
  const std::vector<double> omega = empirical_abs_means(data);
  const PenaltyMatrix pen = build_penalty(omega, delta, penalize_diagonal);
  return weighted_glasso(a_bar, pen, cfg);
}

}  // namespace advprec
