// Computable theory constants and certificates: incoherence quantities, the
// finite-sample constants, scale-transfer bounds, and the primal-dual
// witness construction.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "advprec/dataset.hpp"
#include "advprec/glasso.hpp"
#include "advprec/matrix.hpp"

namespace advprec {

struct SupportIndex {
  int d = 0;
  std::vector<std::pair<int, int>> E;          // unordered off-diagonal pairs, i<j
  std::vector<std::pair<int, int>> S_ordered;  // ordered pairs: both orientations of E plus diagonal
  int s = 1;                                   // max per-row nonzero count, diagonal included
};

inline SupportIndex support_sets(const SymMatrix& precision, double tol = 0.0) {
  const int d = precision.dim();
  SupportIndex out;
  out.d = d;
  std::vector<int> row_count(d, 1);  // diagonal always counted
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (std::abs(precision(i, j)) > tol) {
        out.E.emplace_back(i, j);
        ++row_count[i];
        ++row_count[j];
      }
  out.s = 1;
  for (int c : row_count) out.s = std::max(out.s, c);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j || std::abs(precision(i, j)) > tol) out.S_ordered.emplace_back(i, j);
    }
  return out;
}

struct IncoherenceStats {
  double mu_star = 0.0;
  double psi_star = 0.0;
  double kappa_gamma = 0.0;
  double kappa_sigma = 0.0;
  double kappa_a = 0.0;
  // classic sum restricted to off-diagonal support columns; the
  // homoscedastic small-delta limit of psi_star
  double mu_star_offdiag = 0.0;
};

namespace detail {

// Gamma = Sigma (x) Sigma with ordered-pair indexing (i,j) -> i*d + j, so
// Gamma[(i,j),(k,l)] = Sigma_ik Sigma_jl.
inline double gamma_entry(const SymMatrix& sigma, std::pair<int, int> r, std::pair<int, int> c) {
  return sigma(r.first, c.first) * sigma(r.second, c.second);
}

inline std::vector<std::pair<int, int>> complement_pairs(const SupportIndex& sup) {
  std::vector<std::vector<bool>> in_s(sup.d, std::vector<bool>(sup.d, false));
  for (const auto& p : sup.S_ordered) in_s[p.first][p.second] = true;
  std::vector<std::pair<int, int>> sc;
  for (int i = 0; i < sup.d; ++i)
    for (int j = 0; j < sup.d; ++j)
      if (i != j && !in_s[i][j]) sc.emplace_back(i, j);
  return sc;
}

}  // namespace detail

inline std::vector<double> omega_star(const SymPDMatrix& cov) {
  std::vector<double> w(cov.dim());
  for (int i = 0; i < cov.dim(); ++i) w[i] = std::sqrt(2.0 * cov(i, i) / 3.14159265358979323846);
  return w;
}

inline IncoherenceStats incoherence(const SymPDMatrix& cov, const SupportIndex& sup,
                                    double delta) {
  const int d = cov.dim();
  if (static_cast<double>(d) * d > 4e6)
    throw std::invalid_argument("incoherence: dense Kronecker guard exceeded (d^2 > 4e6)");
  if (!(delta > 0.0)) throw std::invalid_argument("incoherence: delta must be positive");

  const auto& s_idx = sup.S_ordered;
  const int ns = static_cast<int>(s_idx.size());
  SymMatrix gamma_ss(ns);
  for (int a = 0; a < ns; ++a)
    for (int b = 0; b <= a; ++b)
      gamma_ss.set(a, b, detail::gamma_entry(cov.mat(), s_idx[a], s_idx[b]));
  const LowerFactor gf = cholesky_or_throw(gamma_ss);
  const SymMatrix gamma_ss_inv = gf.inverse();

  IncoherenceStats out;
  for (int a = 0; a < ns; ++a) {
    double row = 0.0;
    for (int b = 0; b < ns; ++b) row += std::abs(gamma_ss_inv(a, b));
    out.kappa_gamma = std::max(out.kappa_gamma, row);
  }
  for (int i = 0; i < d; ++i) {
    double row = 0.0;
    for (int j = 0; j < d; ++j) row += std::abs(cov(i, j));
    out.kappa_sigma = std::max(out.kappa_sigma, row);
  }

  const std::vector<double> omega = omega_star(cov);
  auto lam = [&](std::pair<int, int> e) {
    if (e.first == e.second) return 0.0;
    return delta * (omega[e.first] + omega[e.second]) + delta * delta;
  };

  const std::vector<std::pair<int, int>> sc = detail::complement_pairs(sup);
  std::vector<double> gamma_row(ns), a_row(ns);
  for (const auto& e : sc) {
    for (int b = 0; b < ns; ++b) gamma_row[b] = detail::gamma_entry(cov.mat(), e, s_idx[b]);
    const std::vector<double> solved = gf.solve(gamma_row);  // (Gamma_SS)^{-1} Gamma_{S e}
    double sum = 0.0, sum_off = 0.0, psi = 0.0;
    const double lam_e = lam(e);
    for (int b = 0; b < ns; ++b) {
      const double v = std::abs(solved[b]);
      sum += v;
      if (s_idx[b].first != s_idx[b].second) {
        sum_off += v;
        psi += v * lam(s_idx[b]) / lam_e;
      }
    }
    out.mu_star = std::max(out.mu_star, sum);
    out.mu_star_offdiag = std::max(out.mu_star_offdiag, sum_off);
    out.psi_star = std::max(out.psi_star, psi);
  }
  out.kappa_a = out.mu_star;  // ||A||_inf is the same row-sum maximum
  return out;
}

struct Theorem5Constants {
  double c_delta = 0.0;
  double B = 0.0;
  double n_min = 0.0;
  double error_bound_coeff = 0.0;  // 2 kappa_Gamma B
};

inline Theorem5Constants theorem5_constants(const SymPDMatrix& cov, const SupportIndex& sup,
                                            double tau, double alpha, double c1, double c2) {
  if (!(tau > 2.0)) throw std::invalid_argument("theorem5_constants: tau must exceed 2");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("theorem5_constants: alpha must lie in (0,1)");
  const int d = cov.dim();
  const IncoherenceStats inc = incoherence(cov, sup, 1.0);  // kappas are delta-free
  double sigma_max = 0.0, sigma_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    sigma_max = std::max(sigma_max, std::sqrt(cov(i, i)));
    sigma_min = std::min(sigma_min, std::sqrt(cov(i, i)));
  }
  const double pi = 3.14159265358979323846;
  Theorem5Constants out;
  out.c_delta = std::sqrt(tau) / alpha *
                std::max(16.0 * c2 * sigma_max,
                         2.0 * std::sqrt(2.0 * pi) * (1.0 + inc.kappa_a) * c1 * sigma_max *
                             sigma_max / sigma_min);
  out.B = c1 * sigma_max * sigma_max * std::sqrt(tau) +
          3.0 * std::sqrt(2.0 / pi) * sigma_max * out.c_delta + out.c_delta * out.c_delta;
  const double s = static_cast<double>(sup.s);
  const double kg = inc.kappa_gamma, ks = inc.kappa_sigma;
  const double term1 = 2.0 * pi * c2 * c2 * (sigma_max / sigma_min) * (sigma_max / sigma_min) * tau;
  const double term2 = 36.0 * kg * kg * kg * kg * ks * ks * ks * ks * ks * ks * out.B * out.B * s * s;
  const double t3num = 12.0 * std::sqrt(2.0 * pi) * (1.0 + inc.kappa_a) * ks * ks * ks * kg * kg *
                       out.B * out.B;
  const double term3 =
      (t3num / (alpha * sigma_min * out.c_delta)) * (t3num / (alpha * sigma_min * out.c_delta)) *
      s * s;
  out.n_min = std::max({term1, term2, term3}) * std::log(static_cast<double>(d));
  out.error_bound_coeff = 2.0 * kg * out.B;
  return out;
}

struct DiagnosticsReport {
  double kappa_gamma = 0.0;
  double kappa_sigma = 0.0;
  double kappa_a = 0.0;
  double mu_star = 0.0;
  double psi_star = 0.0;
  std::vector<double> omega_star;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double c_delta = 0.0;
  double B = 0.0;
  double n_min = 0.0;
  double error_bound_coeff = 0.0;
  double tau = 0.0;
  double alpha = 0.0;
};

inline DiagnosticsReport diagnostics_report(const SymPDMatrix& cov, const SupportIndex& sup,
                                            double delta, double tau, double alpha, double c1,
                                            double c2) {
  DiagnosticsReport r;
  const IncoherenceStats inc = incoherence(cov, sup, delta);
  r.kappa_gamma = inc.kappa_gamma;
  r.kappa_sigma = inc.kappa_sigma;
  r.kappa_a = inc.kappa_a;
  r.mu_star = inc.mu_star;
  r.psi_star = inc.psi_star;
  r.omega_star = omega_star(cov);
  for (int i = 0; i < cov.dim(); ++i) {
    const double sd = std::sqrt(cov(i, i));
    r.sigma_max = std::max(r.sigma_max, sd);
    r.sigma_min = (i == 0) ? sd : std::min(r.sigma_min, sd);
  }
  const Theorem5Constants t5 = theorem5_constants(cov, sup, tau, alpha, c1, c2);
  r.c_delta = t5.c_delta;
  r.B = t5.B;
  r.n_min = t5.n_min;
  r.error_bound_coeff = t5.error_bound_coeff;
  r.tau = tau;
  r.alpha = alpha;
  return r;
}

struct ScaleBoundCheck {
  double lhs_mu = 0.0;
  double rhs_mu = 0.0;
  double lhs_psi = 0.0;
  double rhs_psi = 0.0;
  bool hypothesis_ok = false;
};

// Both sides of the correlation-factor bounds: mu* against
// (smax/smin)^2 ||Adag||_inf and psi* against (21/20)(smax/smin) ||Adag||_inf,
// valid under 10 delta < sqrt(2/pi) sigma_min.
inline ScaleBoundCheck scale_adaptive_bound_check(const SymPDMatrix& cov, const SupportIndex& sup,
                                                  double delta) {
  const int d = cov.dim();
  const IncoherenceStats inc = incoherence(cov, sup, delta);
  double sigma_max = 0.0, sigma_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    sigma_max = std::max(sigma_max, std::sqrt(cov(i, i)));
    sigma_min = std::min(sigma_min, std::sqrt(cov(i, i)));
  }
  SymMatrix r(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j)
      r.set(i, j, cov(i, j) / (std::sqrt(cov(i, i)) * std::sqrt(cov(j, j))));
  const IncoherenceStats corr = incoherence(SymPDMatrix(r), sup, delta);

  ScaleBoundCheck out;
  out.lhs_mu = inc.mu_star;
  out.rhs_mu = (sigma_max / sigma_min) * (sigma_max / sigma_min) * corr.kappa_a;
  out.lhs_psi = inc.psi_star;
  out.rhs_psi = 21.0 / 20.0 * (sigma_max / sigma_min) * corr.kappa_a;
  out.hypothesis_ok = 10.0 * delta < std::sqrt(2.0 / 3.14159265358979323846) * sigma_min;
  return out;
}

struct PDWCertificate {
  EstimateResult restricted;       // support-restricted solve
  double dual_offsupport_max = 0.0;
  bool strictly_feasible = false;
  double w_max = 0.0;              // ||A_bar - Sigma||_max
  double r = 0.0;                  // 2 kappa_Gamma (||W||_max + lambda_max_S)
  double remainder_max = 0.0;      // ||Cdot^{-1} - Sigma + Sigma Delta Sigma||_max
  double t_omega = 0.0;
  double eps_n = 0.0;              // 2 t_omega / delta
  bool unrestricted_support_in_s = false;  // meaningful when strictly_feasible
};

// Restricted problem: the off-support entries get a prohibitive penalty and
// never enter the solver's free set, so they stay exact zeros. The
// off-support dual is then Zdot_e = (-A_e + [Cdot^{-1}]_e) / lambda_e at the
// true data-driven penalty.
inline PDWCertificate pdw_certificate(const Dataset& data, const SymPDMatrix& cov_truth,
                                      const SupportIndex& sup, double delta,
                                      const SolverConfig& cfg = {}) {
  if (!(delta > 0.0)) throw std::invalid_argument("pdw_certificate: delta must be positive");
  const int d = data.d;
  const SymMatrix a_bar = second_moment(data, cfg.center);
  const std::vector<double> omega = empirical_abs_means(data);
  const PenaltyMatrix pen = build_penalty(omega, delta, false);

  std::vector<std::vector<bool>> in_s(d, std::vector<bool>(d, false));
  for (const auto& p : sup.S_ordered) in_s[p.first][p.second] = true;

  PenaltyMatrix restricted_pen = pen;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (!in_s[i][j]) restricted_pen.entries.set(i, j, 1e12);

  PDWCertificate out;
  out.restricted = weighted_glasso(a_bar, restricted_pen, cfg);
  const SymMatrix& cdot = out.restricted.estimate.mat();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (!in_s[i][j] && cdot(i, j) != 0.0)
        throw std::logic_error("pdw_certificate: restricted solve left the support");

  const SymMatrix cdot_inv = inverse_pd(out.restricted.estimate).mat();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      if (in_s[i][j]) continue;
      const double z = (-a_bar(i, j) + cdot_inv(i, j)) / pen.entries(i, j);
      out.dual_offsupport_max = std::max(out.dual_offsupport_max, std::abs(z));
    }
  out.strictly_feasible = out.dual_offsupport_max < 1.0;

  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      out.w_max = std::max(out.w_max, std::abs(a_bar(i, j) - cov_truth(i, j)));

  double lam_max_s = 0.0;
  for (const auto& p : sup.S_ordered) lam_max_s = std::max(lam_max_s, pen.entries(p.first, p.second));
  const IncoherenceStats inc = incoherence(cov_truth, sup, delta);
  out.r = 2.0 * inc.kappa_gamma * (out.w_max + lam_max_s);

  const SymMatrix prec_truth = inverse_pd(cov_truth).mat();
  SymMatrix delta_mat(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) delta_mat.set(i, j, cdot(i, j) - prec_truth(i, j));
  // R(Delta) = Cdot^{-1} - Sigma + Sigma Delta Sigma
  {
    Matrix sd(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += cov_truth(i, k) * delta_mat(k, j);
        sd(i, j) = s;
      }
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double sds = 0.0;
        for (int k = 0; k < d; ++k) sds += sd(i, k) * cov_truth(k, j);
        const double rem = cdot_inv(i, j) - cov_truth(i, j) + sds;
        out.remainder_max = std::max(out.remainder_max, std::abs(rem));
      }
  }

  const std::vector<double> om_star = omega_star(cov_truth);
  for (int i = 0; i < d; ++i)
    out.t_omega = std::max(out.t_omega, std::abs(omega[i] - om_star[i]));
  out.eps_n = 2.0 * out.t_omega / delta;

  if (out.strictly_feasible) {
    const EstimateResult unrestricted = weighted_glasso(a_bar, pen, cfg);
    out.unrestricted_support_in_s = true;
    for (const auto& p : unrestricted.support) {
      if (!in_s[p.first][p.second]) {
        out.unrestricted_support_in_s = false;
        break;
      }
    }
  }
  return out;
}

}  // namespace advprec
