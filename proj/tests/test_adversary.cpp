#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "advprec/adversary.hpp"
#include "advprec/matrix.hpp"
#include "advprec/rng.hpp"

using namespace advprec;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SymMatrix random_spd(int d, Rng& rng) {
  Matrix b(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
  SymMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += b(i, k) * b(j, k);
      m.set(i, j, s / d + (i == j ? 0.5 : 0.0));
    }
  return m;
}

double objective_at(const SymPDMatrix& c, const std::vector<double>& x,
                    const std::vector<double>& delta) {
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] + delta[i];
  return quad_form(c.mat(), z);
}

// dense boundary-grid oracle with local refinement; d = 2 and d = 3 only
double boundary_grid_max_l2(const SymPDMatrix& c, const std::vector<double>& x, double delta,
                            int grid = 720, int refine_rounds = 40) {
  const int d = c.dim();
  REQUIRE((d == 2 || d == 3));
  const double pi = 3.14159265358979323846;
  double best = -1.0;
  double best_a = 0.0, best_b = 0.0;
  if (d == 2) {
    for (int i = 0; i < grid; ++i) {
      const double th = 2.0 * pi * i / grid;
      const double v = objective_at(c, x, {delta * std::cos(th), delta * std::sin(th)});
      if (v > best) {
        best = v;
        best_a = th;
      }
    }
    double width = 2.0 * pi / grid;
    for (int r = 0; r < refine_rounds; ++r) {
      const double lo = best_a - width, hi = best_a + width;
      for (int i = 0; i <= 24; ++i) {
        const double th = lo + (hi - lo) * i / 24;
        const double v = objective_at(c, x, {delta * std::cos(th), delta * std::sin(th)});
        if (v > best) {
          best = v;
          best_a = th;
        }
      }
      width /= 6.0;
    }
  } else {
    const int g2 = grid / 4;
    for (int i = 0; i < grid; ++i)
      for (int j = 0; j <= g2; ++j) {
        const double th = 2.0 * pi * i / grid;
        const double ph = pi * j / g2;
        const double v = objective_at(
            c, x,
            {delta * std::sin(ph) * std::cos(th), delta * std::sin(ph) * std::sin(th),
             delta * std::cos(ph)});
        if (v > best) {
          best = v;
          best_a = th;
          best_b = ph;
        }
      }
    double width = 2.0 * pi / grid;
    for (int r = 0; r < refine_rounds; ++r) {
      for (int i = -12; i <= 12; ++i)
        for (int j = -12; j <= 12; ++j) {
          const double th = best_a + width * i / 12;
          const double ph = best_b + width * j / 12;
          const double v = objective_at(
              c, x,
              {delta * std::sin(ph) * std::cos(th), delta * std::sin(ph) * std::sin(th),
               delta * std::cos(ph)});
          if (v > best) {
            best = v;
            best_a = th;
            best_b = ph;
          }
        }
      width /= 4.0;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("worst_case_l2 with identity curvature") {
  const SymPDMatrix c = SymPDMatrix::identity(2);
  const WorstCaseResult r = worst_case_l2({3.0, 4.0}, c, 1.0);
  CHECK(r.value == Catch::Approx(36.0).epsilon(1e-10));
  REQUIRE(r.maximizer.size() == 2);
  CHECK(r.maximizer[0] == Catch::Approx(0.6).margin(1e-9));
  CHECK(r.maximizer[1] == Catch::Approx(0.8).margin(1e-9));
}

TEST_CASE("worst_case_l2 matches the boundary grid oracle") {
  const SymPDMatrix c(SymMatrix::diag({2.0, 1.0}));
  const WorstCaseResult r = worst_case_l2({1.0, 1.0}, c, 1.0);
  const double oracle = boundary_grid_max_l2(c, {1.0, 1.0}, 1.0);
  CHECK(r.value == Catch::Approx(oracle).epsilon(1e-6));
  CHECK(r.value == Catch::Approx(9.327).margin(2e-3));
  CHECK(r.dual_lambda == Catch::Approx(4.113).margin(2e-3));
  double norm = std::hypot(r.maximizer[0], r.maximizer[1]);
  CHECK(norm == Catch::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("worst_case_l2 hard case") {
  // data vector orthogonal to the top eigenspace; exact value 4 from the
  // 1-D maximization of 3 + 2t - t^2 over t in [-1, 1] plus the top term
  const SymPDMatrix c(SymMatrix::diag({2.0, 1.0}));
  const WorstCaseResult r = worst_case_l2({0.0, 1.0}, c, 1.0);
  CHECK(r.value == Catch::Approx(4.0).epsilon(1e-9));
  CHECK(r.dual_lambda == Catch::Approx(2.0).margin(1e-6));
  CHECK(std::hypot(r.maximizer[0], r.maximizer[1]) == Catch::Approx(1.0).epsilon(1e-8));

  // strict interior deficiency: secular residual below delta^2 at the top
  const SymPDMatrix c3(SymMatrix::diag({2.0, 1.0, 0.5}));
  const std::vector<double> x3{0.0, 0.05, 0.05};
  const WorstCaseResult r3 = worst_case_l2(x3, c3, 1.0);
  const double oracle = boundary_grid_max_l2(c3, x3, 1.0, 1440, 50);
  CHECK(r3.dual_lambda == Catch::Approx(2.0).margin(1e-9));
  CHECK(r3.value == Catch::Approx(oracle).epsilon(1e-5));
  double n2 = 0.0;
  for (double v : r3.maximizer) n2 += v * v;
  CHECK(std::sqrt(n2) == Catch::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("worst_case_l2 zero radius") {
  Rng rng(5);
  const SymPDMatrix c(random_spd(4, rng));
  std::vector<double> x{0.3, -0.7, 1.1, 0.2};
  const WorstCaseResult r = worst_case_l2(x, c, 0.0);
  CHECK(r.value == Catch::Approx(quad_form(c.mat(), x)));
  for (double v : r.maximizer) CHECK(v == 0.0);
}

TEST_CASE("worst_case_linf_exact enumerated examples") {
  {
    const SymPDMatrix c(SymMatrix::diag({2.0, 1.0}));
    const WorstCaseResult r = worst_case_linf_exact({1.0, -1.0}, c, 0.5);
    CHECK(r.value == Catch::Approx(6.75));
    CHECK(r.maximizer[0] == Catch::Approx(0.5));
    CHECK(r.maximizer[1] == Catch::Approx(-0.5));
  }
  {
    const SymPDMatrix c = SymPDMatrix::identity(6);
    const WorstCaseResult r = worst_case_linf_exact(std::vector<double>(6, 0.0), c, 0.7);
    CHECK(r.value == Catch::Approx(0.49 * 6.0));
  }
  {
    SymMatrix m(2);
    m.set(0, 0, 2.0);
    m.set(0, 1, 1.0);
    m.set(1, 1, 2.0);
    const WorstCaseResult r = worst_case_linf_exact({1.0, -1.0}, SymPDMatrix(m), 0.5);
    CHECK(r.value == Catch::Approx(4.5));
    CHECK(r.maximizer[0] == Catch::Approx(0.5));
    CHECK(r.maximizer[1] == Catch::Approx(-0.5));
  }
}

TEST_CASE("worst_case_linf_exact refuses large dimensions") {
  const SymPDMatrix c = SymPDMatrix::identity(21);
  CHECK_THROWS_AS(worst_case_linf_exact(std::vector<double>(21, 0.0), c, 0.5),
                  std::invalid_argument);
}

TEST_CASE("surrogate_linf examples") {
  {
    const SymPDMatrix c = SymPDMatrix::identity(2);
    CHECK(surrogate_linf({1.0, -1.0}, c, 0.5) == Catch::Approx(4.5));
    const WorstCaseResult exact = worst_case_linf_exact({1.0, -1.0}, c, 0.5);
    CHECK(surrogate_linf({1.0, -1.0}, c, 0.5) == Catch::Approx(exact.value));
  }
  {
    SymMatrix m(2);
    m.set(0, 0, 2.0);
    m.set(0, 1, 1.0);
    m.set(1, 1, 2.0);
    const SymPDMatrix c(m);
    CHECK(surrogate_linf({1.0, -1.0}, c, 0.5) == Catch::Approx(5.5));
    CHECK(worst_case_linf_exact({1.0, -1.0}, c, 0.5).value == Catch::Approx(4.5));
  }
  {
    Rng rng(11);
    const SymPDMatrix c(random_spd(5, rng));
    std::vector<double> x(5);
    for (double& v : x) v = rng.normal();
    CHECK(surrogate_linf(x, c, 0.0) == Catch::Approx(quad_form(c.mat(), x)));
  }
}

TEST_CASE("expansion term examples") {
  {
    const SymPDMatrix c = SymPDMatrix::identity(2);
    const ExpansionTerms t = expansion_terms({3.0, 4.0}, c, PerturbationSpec(2.0, 0.1));
    CHECK(t.zeroth == Catch::Approx(25.0));
    CHECK(t.first == Catch::Approx(1.0));
    CHECK(t.second == Catch::Approx(0.01));
  }
  {
    const SymPDMatrix c = SymPDMatrix::identity(2);
    const ExpansionTerms t = expansion_terms({1.0, -1.0}, c, PerturbationSpec(kInf, 0.5));
    CHECK(t.first == Catch::Approx(2.0));
    CHECK(t.second == Catch::Approx(0.5));
  }
  {
    const SymPDMatrix c(SymMatrix::diag({2.0, 1.0}));
    const ExpansionTerms t = expansion_terms({1.0, 1.0}, c, PerturbationSpec(2.0, 0.01));
    CHECK(t.second == Catch::Approx(1.8e-4));
  }
}

TEST_CASE("expansion fast paths equal the generic formula") {
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 2 + static_cast<int>(rng.below(5));
    const SymPDMatrix c(random_spd(d, rng));
    std::vector<double> x(d);
    for (double& v : x) v = rng.normal() + 0.1;

    const std::vector<double> cx = symv(c.mat(), x);
    bool zero_free = true;
    for (double v : cx) zero_free = zero_free && v != 0.0;
    if (!zero_free) continue;

    // p = 2: delta^2 x^T C^3 x / x^T C^2 x
    const ExpansionTerms t2 = expansion_terms(x, c, PerturbationSpec(2.0, 0.3));
    double den = 0.0;
    for (int i = 0; i < d; ++i) den += cx[i] * cx[i];
    const double num = quad_form(c.mat(), cx);  // x^T C^3 x
    CHECK(t2.second == Catch::Approx(0.09 * num / den).margin(1e-12 * (1.0 + t2.second)));

    // p = inf: sign-vector quadratic form
    const ExpansionTerms ti = expansion_terms(x, c, PerturbationSpec(kInf, 0.3));
    std::vector<double> s(d);
    for (int i = 0; i < d; ++i) s[i] = cx[i] > 0.0 ? 1.0 : -1.0;
    CHECK(ti.second ==
          Catch::Approx(0.09 * quad_form(c.mat(), s)).margin(1e-12 * (1.0 + ti.second)));

    const ExpansionTerms tg = expansion_terms(x, c, PerturbationSpec(3.0, 0.3));
    CHECK(tg.total == Catch::Approx(tg.zeroth + tg.first + tg.second));
  }
}

TEST_CASE("expansion zero component error at p = inf") {
  const SymPDMatrix c = SymPDMatrix::identity(2);
  CHECK_THROWS_AS(expansion_terms({0.0, 1.0}, c, PerturbationSpec(kInf, 0.1)),
                  ZeroComponentError);
}

TEST_CASE("dominance chain over random instances") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + static_cast<int>(rng.below(9));
    const SymPDMatrix c(random_spd(d, rng));
    std::vector<double> x(d);
    for (double& v : x) v = rng.normal();
    for (double delta : {0.1, 0.5, 1.0}) {
      const double v2 = worst_case_l2(x, c, delta).value;
      const double vinf = worst_case_linf_exact(x, c, delta).value;
      const double vsur = surrogate_linf(x, c, delta);
      REQUIRE(v2 <= vinf + 1e-9 * (1.0 + std::abs(vinf)));
      REQUIRE(vinf <= vsur + 1e-9 * (1.0 + std::abs(vsur)));
    }
  }
}

TEST_CASE("worst case value is monotone in the radius") {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + static_cast<int>(rng.below(5));
    const SymPDMatrix c(random_spd(d, rng));
    std::vector<double> x(d);
    for (double& v : x) v = rng.normal();
    double prev2 = -1.0, previnf = -1.0;
    for (double delta : {0.0, 0.05, 0.2, 0.6, 1.2}) {
      const double v2 = worst_case_l2(x, c, delta).value;
      const double vinf = worst_case_linf_exact(x, c, delta).value;
      CHECK(v2 >= prev2 - 1e-12);
      CHECK(vinf >= previnf - 1e-12);
      prev2 = v2;
      previnf = vinf;
    }
  }
}

TEST_CASE("l2 dual tightness against the boundary grid at d = 2 and 3") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + static_cast<int>(rng.below(2));
    const SymPDMatrix c(random_spd(d, rng));
    std::vector<double> x(d);
    for (double& v : x) v = rng.normal();
    const double delta = 0.2 + rng.uniform01();
    const double exact = worst_case_l2(x, c, delta).value;
    const double grid = boundary_grid_max_l2(c, x, delta);
    CHECK(exact == Catch::Approx(grid).epsilon(1e-4));
  }
  // constructed hard case included in the sweep
  const SymPDMatrix c(SymMatrix::diag({3.0, 1.0, 0.5}));
  const std::vector<double> x{0.0, 0.02, 0.01};
  const double exact = worst_case_l2(x, c, 0.8).value;
  const double grid = boundary_grid_max_l2(c, x, 0.8, 1440, 50);
  CHECK(exact == Catch::Approx(grid).epsilon(1e-4));
}

namespace {

// remainder of the quadratic expansion, assembled from the maximizer so the
// O(1) zeroth term cancels algebraically instead of numerically
double expansion_remainder(const std::vector<double>& x, const SymPDMatrix& c, double p,
                           double delta, bool use_linf_exact) {
  const WorstCaseResult wc =
      use_linf_exact ? worst_case_linf_exact(x, c, delta) : worst_case_l2(x, c, delta);
  const std::vector<double> cx = symv(c.mat(), x);
  double gain = quad_form(c.mat(), wc.maximizer);
  for (std::size_t i = 0; i < x.size(); ++i) gain += 2.0 * cx[i] * wc.maximizer[i];
  const ExpansionTerms t = expansion_terms(x, c, PerturbationSpec(p, delta));
  return gain - t.first - t.second;
}

}  // namespace

TEST_CASE("expansion order: remainder vanishes faster than delta^2") {
  {
    Rng rng(37);
    const SymPDMatrix c(random_spd(5, rng));
    std::vector<double> x(5);
    for (double& v : x) v = rng.normal();
    double prev_ratio = -1.0;
    double delta = 0.1;
    while (delta >= 1e-4) {
      const double r = expansion_remainder(x, c, 2.0, delta, false);
      const double ratio = std::abs(r) / (delta * delta);
      if (prev_ratio >= 0.0) CHECK(ratio <= std::max(0.6 * prev_ratio, 1e-10));
      prev_ratio = ratio;
      delta *= 0.5;
    }
  }
  {
    Rng rng(41);
    const SymPDMatrix c(random_spd(8, rng));
    std::vector<double> x(8);
    for (double& v : x) v = rng.normal() + 0.2;  // keep (Cx) away from sign boundaries
    double prev_ratio = -1.0;
    double delta = 0.1;
    while (delta >= 1e-4) {
      const double r = expansion_remainder(x, c, kInf, delta, true);
      const double ratio = std::abs(r) / (delta * delta);
      if (prev_ratio >= 0.0) CHECK(ratio <= std::max(0.6 * prev_ratio, 1e-10));
      prev_ratio = ratio;
      delta *= 0.5;
    }
  }
}
