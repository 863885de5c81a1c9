// Ground-truth precision constructors, heteroskedastic rescaling, and seeded
// Gaussian sampling.
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "advprec/dataset.hpp"
#include "advprec/matrix.hpp"
#include "advprec/rng.hpp"

namespace advprec {

enum class ModelKind { AR2, AR3, AR4, Star, Circle };

inline std::optional<ModelKind> parse_model(std::string_view name) {
  if (name == "ar2") return ModelKind::AR2;
  if (name == "ar3") return ModelKind::AR3;
  if (name == "ar4") return ModelKind::AR4;
  if (name == "star") return ModelKind::Star;
  if (name == "circle") return ModelKind::Circle;
  return std::nullopt;
}

inline std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::AR2: return "ar2";
    case ModelKind::AR3: return "ar3";
    case ModelKind::AR4: return "ar4";
    case ModelKind::Star: return "star";
    case ModelKind::Circle: return "circle";
  }
  return "?";
}

struct GroundTruth {
  SymMatrix precision;
  SymPDMatrix covariance;
  std::vector<std::pair<int, int>> support;  // nonzero off-diagonal pairs, i<j
  bool pd_adjusted = false;
};

namespace detail {

inline void band(SymMatrix& m, int offset, double value) {
  for (int i = offset; i < m.dim(); ++i) m.set(i, i - offset, value);
}

}  // namespace detail

inline std::vector<std::pair<int, int>> support_pairs(const SymMatrix& precision) {
  std::vector<std::pair<int, int>> s;
  for (int i = 0; i < precision.dim(); ++i)
    for (int j = i + 1; j < precision.dim(); ++j)
      if (precision(i, j) != 0.0) s.emplace_back(i, j);
  return s;
}

// Models: AR(2) 1 / .5 / .25; AR(3) 1 / .4 / .2 / .2; AR(4) adds .1 on the
// fourth band; star connects every node to the first with .2; circle is the
// .5 band plus .4 corners. The star matrix is not positive definite once
// 0.2 sqrt(d-1) exceeds 1; the documented adjustment raises c_11 to 1.2 and
// flags the result.
inline GroundTruth make_model(ModelKind kind, int d) {
  if (d < 5) throw std::invalid_argument("make_model: d must be >= 5");
  SymMatrix c(d);
  for (int i = 0; i < d; ++i) c.set(i, i, 1.0);
  switch (kind) {
    case ModelKind::AR2:
      detail::band(c, 1, 0.5);
      detail::band(c, 2, 0.25);
      break;
    case ModelKind::AR3:
      detail::band(c, 1, 0.4);
      detail::band(c, 2, 0.2);
      detail::band(c, 3, 0.2);
      break;
    case ModelKind::AR4:
      detail::band(c, 1, 0.4);
      detail::band(c, 2, 0.2);
      detail::band(c, 3, 0.2);
      detail::band(c, 4, 0.1);
      break;
    case ModelKind::Star:
      for (int i = 1; i < d; ++i) c.set(0, i, 0.2);
      break;
    case ModelKind::Circle:
      detail::band(c, 1, 0.5);
      c.set(0, d - 1, 0.4);
      break;
  }

  GroundTruth out;
  out.support = support_pairs(c);

  EigenDecomposition eig = symeig(c);
  if (eig.values.front() <= 1e-8) {
    if (kind == ModelKind::Star) {
      c.set(0, 0, 1.2);
      eig = symeig(c);
    }
    if (eig.values.front() <= 1e-8) {
      // support-preserving fallback: lift the whole diagonal clear of zero
      const double shift = std::abs(eig.values.front()) + 1e-2;
      for (int i = 0; i < d; ++i) c.set(i, i, c(i, i) + shift);
    }
    out.pd_adjusted = true;
  }

  out.precision = c;
  out.covariance = inverse_pd(SymPDMatrix(c));

  // validate the inverse round trip
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += out.covariance(i, k) * c(k, j);
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  if (worst > 1e-8) throw ConvergenceError("make_model: covariance validation failed");
  return out;
}

// covariance -> S Sigma S, precision -> S^{-1} Sigma^{-1} S^{-1}; the
// support pattern is invariant under the diagonal congruence.
inline GroundTruth heteroskedastic_scale(const GroundTruth& gt, const std::vector<double>& scales) {
  const int d = gt.precision.dim();
  if (static_cast<int>(scales.size()) != d)
    throw std::invalid_argument("heteroskedastic_scale: scale vector size mismatch");
  for (double s : scales)
    if (!(s > 0.0)) throw std::invalid_argument("heteroskedastic_scale: nonpositive scale");
  GroundTruth out;
  SymMatrix prec(d), cov(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      cov.set(i, j, scales[i] * scales[j] * gt.covariance(i, j));
      prec.set(i, j, gt.precision(i, j) / (scales[i] * scales[j]));
    }
  out.precision = prec;
  out.covariance = SymPDMatrix(cov);
  out.support = gt.support;
  out.pd_adjusted = gt.pd_adjusted;
  return out;
}

inline std::vector<double> default_scales(int d) {
  std::vector<double> s(d, 1.0);
  for (int i = 0; i < std::min(d, 5); ++i) s[i] = 10.0;
  return s;
}

// X = Z L^T with Z standard normal from the (seed)-keyed counter stream;
// bit-for-bit reproducible for a fixed (cov, n, seed).
inline Dataset sample_gaussian(const SymPDMatrix& cov, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_gaussian: n must be >= 1");
  const int d = cov.dim();
  const LowerFactor& l = cov.chol();
  Dataset out(n, d);
  out.seed = seed;
  Rng rng(seed);
  std::vector<double> z(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z[j] = rng.normal();
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k <= j; ++k) s += l(j, k) * z[k];
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace advprec
