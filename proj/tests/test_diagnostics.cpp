#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "advprec/diagnostics.hpp"
#include "advprec/glasso.hpp"
#include "advprec/matrix.hpp"
#include "advprec/rng.hpp"
#include "advprec/synth.hpp"

using namespace advprec;

namespace {

// brute-force oracle: build the full d^2 x d^2 Kronecker matrix with
// explicit index enumeration, slice it, and invert the support block by
// Gauss-Jordan with no shared code path
struct BruteIncoherence {
  double mu_star, psi_star, kappa_gamma;
};

BruteIncoherence brute_force_incoherence(const SymMatrix& sigma,
                                         const std::vector<std::pair<int, int>>& edges,
                                         double delta) {
  const int d = sigma.dim();
  const int dd = d * d;
  std::vector<std::vector<double>> gamma(dd, std::vector<double>(dd));
  auto flat = [d](int i, int j) { return i * d + j; };
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) gamma[flat(i, j)][flat(k, l)] = sigma(i, k) * sigma(j, l);

  std::vector<int> s_flat;
  std::vector<std::pair<int, int>> s_pairs;
  std::vector<bool> in_s(dd, false);
  for (int i = 0; i < d; ++i) {
    s_flat.push_back(flat(i, i));
    s_pairs.emplace_back(i, i);
    in_s[flat(i, i)] = true;
  }
  for (auto [i, j] : edges) {
    s_flat.push_back(flat(i, j));
    s_pairs.emplace_back(i, j);
    in_s[flat(i, j)] = true;
    s_flat.push_back(flat(j, i));
    s_pairs.emplace_back(j, i);
    in_s[flat(j, i)] = true;
  }
  const int ns = static_cast<int>(s_flat.size());

  // Gauss-Jordan inverse of the S block
  std::vector<std::vector<double>> a(ns, std::vector<double>(2 * ns, 0.0));
  for (int r = 0; r < ns; ++r) {
    for (int c = 0; c < ns; ++c) a[r][c] = gamma[s_flat[r]][s_flat[c]];
    a[r][ns + r] = 1.0;
  }
  for (int col = 0; col < ns; ++col) {
    int piv = col;
    for (int r = col + 1; r < ns; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    const double p = a[col][col];
    for (int c = 0; c < 2 * ns; ++c) a[col][c] /= p;
    for (int r = 0; r < ns; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (int c = 0; c < 2 * ns; ++c) a[r][c] -= f * a[col][c];
    }
  }

  BruteIncoherence out{0.0, 0.0, 0.0};
  for (int r = 0; r < ns; ++r) {
    double row = 0.0;
    for (int c = 0; c < ns; ++c) row += std::abs(a[r][ns + c]);
    out.kappa_gamma = std::max(out.kappa_gamma, row);
  }

  const double pi = 3.14159265358979323846;
  std::vector<double> omega(d);
  for (int i = 0; i < d; ++i) omega[i] = std::sqrt(2.0 * sigma(i, i) / pi);
  auto lam = [&](std::pair<int, int> e) {
    if (e.first == e.second) return 0.0;
    return delta * (omega[e.first] + omega[e.second]) + delta * delta;
  };

  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const int e = flat(i, j);
      if (i == j || in_s[e]) continue;
      double mu = 0.0, psi = 0.0;
      for (int sc = 0; sc < ns; ++sc) {
        // A_{e,sc} = sum_r Gamma[e][S_r] * invGamma[S_r][S_sc]
        double v = 0.0;
        for (int r = 0; r < ns; ++r) v += gamma[e][s_flat[r]] * a[r][ns + sc];
        mu += std::abs(v);
        if (s_pairs[sc].first != s_pairs[sc].second)
          psi += std::abs(v) * lam(s_pairs[sc]) / lam({i, j});
      }
      out.mu_star = std::max(out.mu_star, mu);
      out.psi_star = std::max(out.psi_star, psi);
    }
  return out;
}

SymMatrix random_sparse_precision(int d, Rng& rng) {
  SymMatrix c(d);
  for (int i = 0; i < d; ++i) c.set(i, i, 1.0);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (rng.uniform01() < 0.25) c.set(i, j, 0.3 * (rng.uniform01() < 0.5 ? 1.0 : -1.0));
  // diagonal dominance keeps it PD
  for (int i = 0; i < d; ++i) {
    double row = 0.0;
    for (int j = 0; j < d; ++j)
      if (j != i) row += std::abs(c(i, j));
    c.set(i, i, row + 0.5 + rng.uniform01());
  }
  return c;
}

}  // namespace

TEST_CASE("support sets") {
  {
    const SupportIndex s = support_sets(SymMatrix::identity(4));
    CHECK(s.E.empty());
    CHECK(s.s == 1);
    CHECK(s.S_ordered.size() == 4);
  }
  {
    const GroundTruth gt = make_model(ModelKind::AR2, 5);
    const SupportIndex s = support_sets(gt.precision);
    CHECK(s.s == 5);  // middle rows carry 2 + 2 + diagonal
    CHECK(s.E.size() == 7);
    CHECK(s.S_ordered.size() == 5 + 14);
  }
  {
    const GroundTruth gt = make_model(ModelKind::Star, 6);
    const SupportIndex s = support_sets(gt.precision);
    CHECK(s.s == 6);
    CHECK(s.E.size() == 5);
  }
}

TEST_CASE("incoherence on the identity") {
  const SymPDMatrix cov = SymPDMatrix::identity(5);
  SymMatrix prec = SymMatrix::identity(5);
  prec.set(0, 1, 0.2);  // any support works; Gamma = I makes A vanish
  const SupportIndex sup = support_sets(prec);
  const IncoherenceStats inc = incoherence(cov, sup, 0.1);
  CHECK(inc.mu_star == Catch::Approx(0.0).margin(1e-14));
  CHECK(inc.psi_star == Catch::Approx(0.0).margin(1e-14));
  CHECK(inc.kappa_gamma == Catch::Approx(1.0));
  CHECK(inc.kappa_sigma == Catch::Approx(1.0));
}

TEST_CASE("incoherence with a diagonal covariance and diagonal support") {
  const SymPDMatrix cov(SymMatrix::diag({2.0, 1.0, 0.5, 3.0}));
  const SupportIndex sup = support_sets(SymMatrix::identity(4));
  const IncoherenceStats inc = incoherence(cov, sup, 0.2);
  CHECK(inc.mu_star == Catch::Approx(0.0).margin(1e-14));
  CHECK(inc.psi_star == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("incoherence matches the brute-force Kronecker oracle") {
  {
    const GroundTruth gt = make_model(ModelKind::AR2, 5);
    const SupportIndex sup = support_sets(gt.precision);
    const IncoherenceStats inc = incoherence(gt.covariance, sup, 0.1);
    const BruteIncoherence brute =
        brute_force_incoherence(gt.covariance.mat(), sup.E, 0.1);
    CHECK(inc.mu_star == Catch::Approx(brute.mu_star).margin(1e-10));
    CHECK(inc.psi_star == Catch::Approx(brute.psi_star).margin(1e-10));
    CHECK(inc.kappa_gamma == Catch::Approx(brute.kappa_gamma).margin(1e-10));
  }
  {
    Rng rng(3111);
    const SymMatrix prec = random_sparse_precision(6, rng);
    const SymPDMatrix cov = inverse_pd(SymPDMatrix(prec));
    const SupportIndex sup = support_sets(prec);
    const IncoherenceStats inc = incoherence(cov, sup, 0.25);
    const BruteIncoherence brute = brute_force_incoherence(cov.mat(), sup.E, 0.25);
    CHECK(inc.mu_star == Catch::Approx(brute.mu_star).margin(1e-10));
    CHECK(inc.psi_star == Catch::Approx(brute.psi_star).margin(1e-10));
    CHECK(inc.kappa_gamma == Catch::Approx(brute.kappa_gamma).margin(1e-10));
  }
}

TEST_CASE("theorem constants arithmetic") {
  const SymPDMatrix cov = SymPDMatrix::identity(4);
  SymMatrix prec = SymMatrix::identity(4);
  const SupportIndex sup = support_sets(prec);
  const Theorem5Constants t = theorem5_constants(cov, sup, 3.0, 0.5, 1.0, 1.0);
  const double pi = 3.14159265358979323846;
  // A = 0 at the identity, so kappa_a = 0
  const double expect_cdelta =
      std::sqrt(3.0) / 0.5 * std::max(16.0, 2.0 * std::sqrt(2.0 * pi));
  CHECK(t.c_delta == Catch::Approx(expect_cdelta));
  const double expect_b = std::sqrt(3.0) + 3.0 * std::sqrt(2.0 / pi) * expect_cdelta +
                          expect_cdelta * expect_cdelta;
  CHECK(t.B == Catch::Approx(expect_b));
  CHECK(t.error_bound_coeff == Catch::Approx(2.0 * expect_b));  // kappa_gamma = 1
  CHECK(t.n_min > 0.0);

  CHECK_THROWS_AS(theorem5_constants(cov, sup, 1.5, 0.5, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(theorem5_constants(cov, sup, 3.0, 1.5, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("homoscedastic c_delta branch") {
  // sigma_max = sigma_min: the second branch simplifies to
  // 2 sqrt(2 pi) (1 + kappa_a) C1 sigma_max
  const GroundTruth gt = make_model(ModelKind::AR2, 5);
  SymMatrix cov_scaled(5);
  // force equal diagonals by rescaling to correlation
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j <= i; ++j)
      cov_scaled.set(i, j, gt.covariance(i, j) / std::sqrt(gt.covariance(i, i) *
                                                           gt.covariance(j, j)));
  const SymPDMatrix cov(cov_scaled);
  const SupportIndex sup = support_sets(gt.precision);
  const IncoherenceStats inc = incoherence(cov, sup, 1.0);
  const double pi = 3.14159265358979323846;
  const Theorem5Constants t = theorem5_constants(cov, sup, 3.0, 0.5, 1.0, 0.01);
  CHECK(t.c_delta ==
        Catch::Approx(std::sqrt(3.0) / 0.5 * 2.0 * std::sqrt(2.0 * pi) * (1.0 + inc.kappa_a)));
}

TEST_CASE("psi bounds and the homoscedastic small-delta limit") {
  const GroundTruth gt = make_model(ModelKind::AR3, 6);
  // correlation-scale covariance: all marginal variances equal
  SymMatrix corr(6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j <= i; ++j)
      corr.set(i, j,
               gt.covariance(i, j) / std::sqrt(gt.covariance(i, i) * gt.covariance(j, j)));
  const SymPDMatrix cov(corr);
  const SupportIndex sup = support_sets(gt.precision);

  const IncoherenceStats tiny = incoherence(cov, sup, 1e-6);
  // psi* <= mu* max ratio always; under equal scales the off-diagonal
  // ratios are exactly 1, so psi* equals the off-diagonal-column sum
  CHECK(tiny.psi_star <= tiny.mu_star + 1e-12);
  CHECK(tiny.psi_star == Catch::Approx(tiny.mu_star_offdiag).margin(1e-4));

  // heteroscedastic: ratio bound
  const GroundTruth scaled = heteroskedastic_scale(gt, {3.0, 1.0, 1.0, 2.0, 1.0, 1.0});
  const IncoherenceStats het = incoherence(scaled.covariance, sup, 0.05);
  const std::vector<double> om = omega_star(scaled.covariance);
  double lam_min = 1e300, lam_max = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (i == j) continue;
      const double l = 0.05 * (om[i] + om[j]) + 0.05 * 0.05;
      lam_min = std::min(lam_min, l);
      lam_max = std::max(lam_max, l);
    }
  CHECK(het.psi_star <= het.mu_star * lam_max / lam_min + 1e-12);
}

TEST_CASE("scale transfer bounds hold whenever the radius hypothesis does") {
  {
    const SymPDMatrix cov = SymPDMatrix::identity(4);
    const SupportIndex sup = support_sets(SymMatrix::identity(4));
    const ScaleBoundCheck b = scale_adaptive_bound_check(cov, sup, 0.01);
    CHECK(b.hypothesis_ok);
    CHECK(b.lhs_mu == Catch::Approx(0.0).margin(1e-14));
    CHECK(b.rhs_mu == Catch::Approx(0.0).margin(1e-14));
  }
  {
    const GroundTruth gt = make_model(ModelKind::AR2, 8);
    std::vector<double> scales(8, 1.0);
    scales[0] = scales[1] = 10.0;
    const GroundTruth scaled = heteroskedastic_scale(gt, scales);
    const SupportIndex sup = support_sets(scaled.precision);
    const double sigma_min = [&] {
      double m = 1e300;
      for (int i = 0; i < 8; ++i) m = std::min(m, std::sqrt(scaled.covariance(i, i)));
      return m;
    }();
    const double delta = 0.09 * std::sqrt(2.0 / 3.14159265358979323846) * sigma_min;
    const ScaleBoundCheck b = scale_adaptive_bound_check(scaled.covariance, sup, delta);
    REQUIRE(b.hypothesis_ok);
    CHECK(b.lhs_mu <= b.rhs_mu + 1e-10);
    CHECK(b.lhs_psi <= b.rhs_psi + 1e-10);
  }
  {
    const GroundTruth gt = make_model(ModelKind::AR2, 6);
    const ScaleBoundCheck b = scale_adaptive_bound_check(gt.covariance, support_sets(gt.precision), 100.0);
    CHECK_FALSE(b.hypothesis_ok);
  }
}

TEST_CASE("proposition bounds on random heteroscedastic instances") {
  Rng rng(1234);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 5 + static_cast<int>(rng.below(3));
    const SymMatrix prec = random_sparse_precision(d, rng);
    GroundTruth gt;
    gt.precision = prec;
    gt.covariance = inverse_pd(SymPDMatrix(prec));
    gt.support = support_pairs(prec);
    std::vector<double> scales(d);
    for (double& s : scales) s = 1.0 + 9.0 * rng.uniform01();
    const GroundTruth scaled = heteroskedastic_scale(gt, scales);
    const SupportIndex sup = support_sets(scaled.precision);
    double sigma_min = 1e300;
    for (int i = 0; i < d; ++i) sigma_min = std::min(sigma_min, std::sqrt(scaled.covariance(i, i)));
    const double delta = 0.05 * std::sqrt(2.0 / 3.14159265358979323846) * sigma_min;
    const ScaleBoundCheck b = scale_adaptive_bound_check(scaled.covariance, sup, delta);
    REQUIRE(b.hypothesis_ok);
    CHECK(b.lhs_mu <= b.rhs_mu + 1e-10);
    CHECK(b.lhs_psi <= b.rhs_psi + 1e-10);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("pdw certificate is feasible under easy conditions") {
  const SymPDMatrix cov = SymPDMatrix::identity(10);
  const SupportIndex sup = support_sets(SymMatrix::identity(10));
  int feasible = 0;
  for (int seed = 0; seed < 50; ++seed) {
    const Dataset x = sample_gaussian(cov, 200, derive_stream(909, seed));
    const PDWCertificate cert = pdw_certificate(x, cov, sup, 0.8);
    if (cert.strictly_feasible) {
      ++feasible;
      CHECK(cert.unrestricted_support_in_s);
    }
  }
  CHECK(feasible >= 45);
}

TEST_CASE("pdw certificate reports infeasibility without failing") {
  // dense truth treated as if the support were diagonal-only
  Rng rng(2222);
  SymMatrix dense(6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j <= i; ++j) dense.set(i, j, (i == j) ? 2.0 : 0.8);
  const SymPDMatrix cov = inverse_pd(SymPDMatrix(dense));
  const SupportIndex sup = support_sets(SymMatrix::identity(6));
  const Dataset x = sample_gaussian(cov, 400, 31337);
  const PDWCertificate cert = pdw_certificate(x, cov, sup, 0.05);
  CHECK_FALSE(cert.strictly_feasible);
  CHECK(cert.dual_offsupport_max >= 1.0);
}
