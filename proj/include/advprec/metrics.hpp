// Support-recovery metrics, BIC, and grid-based parameter selection.
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "advprec/dataset.hpp"
#include "advprec/glasso.hpp"
#include "advprec/matrix.hpp"

namespace advprec {

struct Confusion {
  long tp = 0, tn = 0, fp = 0, fn = 0;
  long total() const { return tp + tn + fp + fn; }
};

// Counted over unordered off-diagonal pairs; positives are true edges.
inline Confusion confusion(const std::vector<std::pair<int, int>>& est,
                           const std::vector<std::pair<int, int>>& truth, int d) {
  auto normalize = [d](const std::vector<std::pair<int, int>>& pairs) {
    std::set<std::pair<int, int>> s;
    for (auto [i, j] : pairs) {
      if (i == j || i < 0 || j < 0 || i >= d || j >= d)
        throw std::invalid_argument("confusion: pair out of range (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
      s.emplace(std::min(i, j), std::max(i, j));
    }
    return s;
  };
  const auto e = normalize(est);
  const auto t = normalize(truth);
  Confusion c;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const bool in_e = e.count({i, j}) > 0;
      const bool in_t = t.count({i, j}) > 0;
      if (in_t && in_e)
        ++c.tp;
      else if (in_t)
        ++c.fn;
      else if (in_e)
        ++c.fp;
      else
        ++c.tn;
    }
  return c;
}

struct MetricsReport {
  double acc = 0.0, mcc = 0.0, tnr = 0.0, tpr = 0.0;
  Confusion c;
};

inline MetricsReport classification_metrics(const Confusion& c) {
  MetricsReport m;
  m.c = c;
  const double total = static_cast<double>(c.total());
  m.acc = total > 0 ? static_cast<double>(c.tn + c.tp) / total : 0.0;
  m.tnr = (c.tn + c.fp) > 0 ? static_cast<double>(c.tn) / (c.tn + c.fp) : 0.0;
  m.tpr = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
  const double den = static_cast<double>(c.tp + c.fp) * (c.tp + c.fn) *
                     static_cast<double>(c.tn + c.fp) * (c.tn + c.fn);
  m.mcc = den > 0.0 ? (static_cast<double>(c.tp) * c.tn - static_cast<double>(c.fp) * c.fn) /
                          std::sqrt(den)
                    : 0.0;
  return m;
}

// n (-log det C + tr(A_bar C)) + log(n) k with k the nonzero upper-triangle
// off-diagonal count.
inline double bic(const SymMatrix& a_bar, const SymPDMatrix& c, long n, long support_size) {
  return n * (-logdet_pd(c) + frobenius_inner(a_bar, c.mat())) +
         std::log(static_cast<double>(n)) * support_size;
}

enum class FitMethod { Perturbed, L1, L1Std };

inline const char* method_name(FitMethod m) {
  switch (m) {
    case FitMethod::Perturbed: return "perturbed";
    case FitMethod::L1: return "l1";
    case FitMethod::L1Std: return "l1_std";
  }
  return "?";
}

struct GridPoint {
  double parameter = 0.0;
  double bic = 0.0;
  long support_size = 0;
  double objective = 0.0;
};

struct SelectionResult {
  double best = 0.0;
  std::vector<GridPoint> table;
  std::vector<std::pair<int, int>> best_support;
};

inline std::vector<double> uniform_grid(double lo, double hi, int count) {
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i)
    g[i] = (count == 1) ? lo : lo + (hi - lo) * i / (count - 1);
  g.front() = lo;
  g.back() = hi;
  return g;
}

inline Dataset standardize_columns(const Dataset& data) {
  const std::vector<double> mean = column_means(data);
  Dataset out = data;
  for (int j = 0; j < data.d; ++j) {
    double var = 0.0;
    for (int i = 0; i < data.n; ++i) {
      const double r = data(i, j) - mean[j];
      var += r * r;
    }
    const double sd = std::sqrt(var / data.n);
    const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
    for (int i = 0; i < data.n; ++i) out(i, j) = data(i, j) * scale;
  }
  return out;
}

// BIC minimization over the grid; ties break toward the smaller parameter.
inline SelectionResult select_parameter(const Dataset& data, const std::vector<double>& grid,
                                        FitMethod method, const SolverConfig& cfg = {}) {
  if (grid.empty()) throw std::invalid_argument("select_parameter: empty grid");
  const Dataset* fit_data = &data;
  Dataset scaled;
  if (method == FitMethod::L1Std) {
    scaled = standardize_columns(data);
    fit_data = &scaled;
  }
  const SymMatrix a_bar = second_moment(*fit_data, cfg.center);

  SelectionResult out;
  bool have_best = false;
  double best_bic = 0.0;
  for (double par : grid) {
    EstimateResult fit;
    try {
      if (method == FitMethod::Perturbed) {
        fit = fit_linf(*fit_data, par, cfg, false);
      } else {
        fit = weighted_glasso(a_bar, uniform_offdiag_penalty(fit_data->d, par), cfg);
      }
    } catch (const std::exception&) {
      continue;  // failed grid point
    }
    const long k = static_cast<long>(fit.support.size());
    const double score = bic(a_bar, fit.estimate, fit_data->n, k);
    out.table.push_back({par, score, k, fit.objective});
    if (!have_best || score < best_bic) {
      have_best = true;
      best_bic = score;
      out.best = par;
      out.best_support = fit.support;
    }
  }
  if (!have_best) throw ConvergenceError("select_parameter: every grid fit failed");
  return out;
}

}  // namespace advprec
