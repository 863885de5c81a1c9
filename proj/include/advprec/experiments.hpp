// Experiment drivers: synthetic table replication, the labeled-expression
// LDA pipeline with nested stratified cross-validation, and atomic result
// serialization.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "advprec/dataset.hpp"
#include "advprec/glasso.hpp"
#include "advprec/matrix.hpp"
#include "advprec/metrics.hpp"
#include "advprec/rng.hpp"
#include "advprec/synth.hpp"

namespace advprec {

struct ExperimentConfig {
  ModelKind model = ModelKind::AR2;
  int d = 30;
  int n = 40;
  int reps = 100;
  std::vector<double> scales;  // empty = all ones
  std::vector<double> grid;    // empty = 25 points on [0.01, 1]
  std::vector<FitMethod> methods{FitMethod::Perturbed};
  std::uint64_t seed = 1;
  SolverConfig solver;
};

struct MethodSummary {
  FitMethod method = FitMethod::Perturbed;
  double acc_mean = 0.0, acc_se = 0.0;
  double mcc_mean = 0.0, mcc_se = 0.0;
  double tnr_mean = 0.0, tnr_se = 0.0;
  double tpr_mean = 0.0, tpr_se = 0.0;
  int replicates = 0;
};

struct SyntheticResult {
  int n = 0;
  std::vector<MethodSummary> methods;
  int dropped_replicates = 0;
  bool pd_adjusted = false;
};

namespace detail {

inline void mean_se(const std::vector<double>& v, double* mean, double* se) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
  *mean = m;
  *se = std::sqrt(var / v.size());
}

}  // namespace detail

inline SyntheticResult run_synthetic(const ExperimentConfig& cfg) {
  if (cfg.reps < 1 || cfg.methods.empty())
    throw std::invalid_argument("run_synthetic: need reps >= 1 and a nonempty method set");
  GroundTruth gt = make_model(cfg.model, cfg.d);
  if (!cfg.scales.empty()) gt = heteroskedastic_scale(gt, cfg.scales);
  const std::vector<double> grid = cfg.grid.empty() ? uniform_grid(0.01, 1.0, 25) : cfg.grid;

  std::vector<std::vector<MetricsReport>> per_method(cfg.methods.size());
  int dropped = 0;
  const int max_dropped = std::max(1, cfg.reps / 50);
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const Dataset data = sample_gaussian(gt.covariance, cfg.n, derive_stream(cfg.seed, rep));
    std::vector<MetricsReport> row;
    row.reserve(cfg.methods.size());
    bool failed = false;
    for (FitMethod m : cfg.methods) {
      try {
        const SelectionResult sel = select_parameter(data, grid, m, cfg.solver);
        row.push_back(classification_metrics(confusion(sel.best_support, gt.support, cfg.d)));
      } catch (const std::exception&) {
        failed = true;
        break;
      }
    }
    if (failed) {
      if (++dropped > max_dropped)
        throw ConvergenceError("run_synthetic: replicate failure budget exceeded");
      continue;
    }
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) per_method[k].push_back(row[k]);
  }

  SyntheticResult out;
  out.n = cfg.n;
  out.dropped_replicates = dropped;
  out.pd_adjusted = gt.pd_adjusted;
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    MethodSummary s;
    s.method = cfg.methods[k];
    s.replicates = static_cast<int>(per_method[k].size());
    std::vector<double> acc, mcc, tnr, tpr;
    for (const MetricsReport& r : per_method[k]) {
      acc.push_back(r.acc);
      mcc.push_back(r.mcc);
      tnr.push_back(r.tnr);
      tpr.push_back(r.tpr);
    }
    detail::mean_se(acc, &s.acc_mean, &s.acc_se);
    detail::mean_se(mcc, &s.mcc_mean, &s.mcc_se);
    detail::mean_se(tnr, &s.tnr_mean, &s.tnr_se);
    detail::mean_se(tpr, &s.tpr_mean, &s.tpr_se);
    out.methods.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// labeled expression data

struct LabeledDataset {
  int n = 0;
  int d = 0;
  std::vector<double> x;  // row-major
  std::vector<int> labels;  // 0 = ALL (negative), 1 = AML (positive)
  std::vector<std::string> gene_ids;
  double operator()(int i, int j) const { return x[static_cast<std::size_t>(i) * d + j]; }
};

// First header column "label", remaining columns gene identifiers; one
// sample per row with an ALL/AML tag.
inline LabeledDataset load_expression_csv(std::istream& in) {
  LabeledDataset out;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  {
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        if (cell != "label") throw ParseError("first header column must be 'label'", 1);
        first = false;
      } else {
        out.gene_ids.push_back(cell);
      }
    }
    if (first) throw ParseError("empty header", 1);
  }
  out.d = static_cast<int>(out.gene_ids.size());
  if (out.d == 0) throw ParseError("no gene columns", 1);

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (!std::getline(ss, cell, ',')) throw ParseError("empty row", lineno);
    int label;
    if (cell == "ALL")
      label = 0;
    else if (cell == "AML")
      label = 1;
    else
      throw ParseError("unknown label '" + cell + "'", lineno);
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      double v;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw ParseError("non-numeric cell '" + cell + "'", lineno);
      }
      out.x.push_back(v);
      ++cols;
    }
    if (cols != out.d)
      throw ParseError("expected " + std::to_string(out.d) + " expression values, got " +
                           std::to_string(cols),
                       lineno);
    out.labels.push_back(label);
    ++out.n;
  }
  if (out.n == 0) throw ParseError("no data rows", lineno);
  return out;
}

inline LabeledDataset load_expression_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open expression file: " + path);
  return load_expression_csv(in);
}

struct LdaConfig {
  int d_genes = 40;
  int reps = 100;
  bool screen_per_fold = false;
  std::vector<double> grid;  // empty = 25 points on [0.01, 1]
  std::vector<FitMethod> methods{FitMethod::Perturbed, FitMethod::L1};
  std::uint64_t seed = 1;
  SolverConfig solver;
  int outer_folds = 10;
  int inner_folds = 5;
};

namespace detail {

inline std::vector<int> top_variance_genes(const LabeledDataset& data,
                                           const std::vector<int>& rows, int d_genes) {
  const int d = data.d;
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (int r : rows)
    for (int j = 0; j < d; ++j) mean[j] += data(r, j);
  for (int j = 0; j < d; ++j) mean[j] /= rows.size();
  for (int r : rows)
    for (int j = 0; j < d; ++j) {
      const double v = data(r, j) - mean[j];
      var[j] += v * v;
    }
  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return var[a] > var[b]; });
  idx.resize(d_genes);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// stratified fold assignment: class-wise shuffle, round-robin deal
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, Rng& rng) {
  std::vector<int> assignment(labels.size(), -1);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<int> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(static_cast<int>(i));
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[rng.below(i)]);
    for (std::size_t i = 0; i < members.size(); ++i)
      assignment[members[i]] = static_cast<int>(i % folds);
  }
  return assignment;
}

struct Standardizer {
  std::vector<double> mean, scale;
};

inline Standardizer fit_standardizer(const LabeledDataset& data, const std::vector<int>& rows,
                                     const std::vector<int>& genes) {
  Standardizer s;
  s.mean.assign(genes.size(), 0.0);
  s.scale.assign(genes.size(), 1.0);
  for (std::size_t g = 0; g < genes.size(); ++g) {
    double m = 0.0;
    for (int r : rows) m += data(r, genes[g]);
    m /= rows.size();
    double var = 0.0;
    for (int r : rows) {
      const double v = data(r, genes[g]) - m;
      var += v * v;
    }
    const double sd = std::sqrt(var / std::max<std::size_t>(rows.size() - 1, 1));
    s.mean[g] = m;
    s.scale[g] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  return s;
}

inline Dataset apply_standardizer(const LabeledDataset& data, const std::vector<int>& rows,
                                  const std::vector<int>& genes, const Standardizer& s) {
  Dataset out(static_cast<int>(rows.size()), static_cast<int>(genes.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t g = 0; g < genes.size(); ++g)
      out(static_cast<int>(i), static_cast<int>(g)) =
          (data(rows[i], genes[g]) - s.mean[g]) * s.scale[g];
  return out;
}

struct LdaModel {
  std::vector<double> mu0, mu1;  // class means in the standardized space
  double log_pi0 = 0.0, log_pi1 = 0.0;
};

inline LdaModel fit_lda_means(const Dataset& x, const std::vector<int>& labels) {
  const int d = x.d;
  LdaModel m;
  m.mu0.assign(d, 0.0);
  m.mu1.assign(d, 0.0);
  int n0 = 0, n1 = 0;
  for (int i = 0; i < x.n; ++i) {
    if (labels[i] == 0) {
      ++n0;
      for (int j = 0; j < d; ++j) m.mu0[j] += x(i, j);
    } else {
      ++n1;
      for (int j = 0; j < d; ++j) m.mu1[j] += x(i, j);
    }
  }
  if (n0 == 0 || n1 == 0) throw std::runtime_error("fit_lda_means: single-class training fold");
  for (int j = 0; j < d; ++j) {
    m.mu0[j] /= n0;
    m.mu1[j] /= n1;
  }
  m.log_pi0 = std::log(static_cast<double>(n0) / x.n);
  m.log_pi1 = std::log(static_cast<double>(n1) / x.n);
  return m;
}

// delta_k(x) = x^T C mu_k - mu_k^T C mu_k / 2 + log pi_k
inline int lda_classify(const SymMatrix& c, const LdaModel& m, const double* x, int d) {
  std::vector<double> cm0(d, 0.0), cm1(d, 0.0);
  for (int i = 0; i < d; ++i) {
    double s0 = 0.0, s1 = 0.0;
    for (int j = 0; j < d; ++j) {
      s0 += c(i, j) * m.mu0[j];
      s1 += c(i, j) * m.mu1[j];
    }
    cm0[i] = s0;
    cm1[i] = s1;
  }
  double score0 = m.log_pi0, score1 = m.log_pi1;
  for (int i = 0; i < d; ++i) {
    score0 += x[i] * cm0[i] - 0.5 * m.mu0[i] * cm0[i];
    score1 += x[i] * cm1[i] - 0.5 * m.mu1[i] * cm1[i];
  }
  return score1 > score0 ? 1 : 0;
}

inline SymMatrix fit_precision(const Dataset& train, FitMethod method, double parameter,
                               const SolverConfig& cfg) {
  if (method == FitMethod::Perturbed) return fit_linf(train, parameter, cfg, false).estimate.mat();
  const SymMatrix a_bar = second_moment(train, cfg.center);
  return weighted_glasso(a_bar, uniform_offdiag_penalty(train.d, parameter), cfg).estimate.mat();
}

}  // namespace detail

struct LdaResult {
  std::vector<MethodSummary> methods;
  int d_genes = 0;
};

// Nested stratified cross-validation: outer folds score the classifier,
// inner folds tune the penalty parameter by MCC with AML as the positive
// class. Gene screening runs on the full data unless screen_per_fold is set.
inline LdaResult lda_pipeline(const LabeledDataset& data, const LdaConfig& cfg) {
  if (cfg.d_genes > data.d)
    throw std::invalid_argument("lda_pipeline: d_genes exceeds the gene count");
  const std::vector<double> grid = cfg.grid.empty() ? uniform_grid(0.01, 1.0, 25) : cfg.grid;
  std::vector<int> all_rows(data.n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  const std::vector<int> global_genes =
      detail::top_variance_genes(data, all_rows, cfg.d_genes);

  std::vector<std::vector<MetricsReport>> per_method(cfg.methods.size());
  for (int rep = 0; rep < cfg.reps; ++rep) {
    Rng rng(cfg.seed, rep);
    std::vector<Confusion> rep_confusion(cfg.methods.size());
    bool rep_ok = false;
    for (int attempt = 0; attempt < 10 && !rep_ok; ++attempt) {
      rep_ok = true;
      for (Confusion& c : rep_confusion) c = Confusion{};
      const std::vector<int> fold_of = detail::stratified_folds(data.labels, cfg.outer_folds, rng);
      for (int fold = 0; fold < cfg.outer_folds && rep_ok; ++fold) {
        std::vector<int> train_rows, test_rows;
        for (int i = 0; i < data.n; ++i)
          (fold_of[i] == fold ? test_rows : train_rows).push_back(i);
        if (test_rows.empty()) continue;
        std::vector<int> train_labels, test_labels;
        for (int r : train_rows) train_labels.push_back(data.labels[r]);
        for (int r : test_rows) test_labels.push_back(data.labels[r]);
        if (std::count(train_labels.begin(), train_labels.end(), 1) == 0 ||
            std::count(train_labels.begin(), train_labels.end(), 0) == 0) {
          rep_ok = false;  // degenerate fold: reshuffle the replication
          break;
        }

        const std::vector<int> genes =
            cfg.screen_per_fold ? detail::top_variance_genes(data, train_rows, cfg.d_genes)
                                : global_genes;
        const detail::Standardizer stz = detail::fit_standardizer(data, train_rows, genes);
        const Dataset train = detail::apply_standardizer(data, train_rows, genes, stz);
        const Dataset test = detail::apply_standardizer(data, test_rows, genes, stz);

        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
          const FitMethod method = cfg.methods[mi];
          // inner stratified CV over the grid, best MCC wins
          const std::vector<int> inner_fold_of =
              detail::stratified_folds(train_labels, cfg.inner_folds, rng);
          double best_par = grid.front();
          double best_mcc = -2.0;
          for (double par : grid) {
            Confusion inner_c;
            bool par_ok = true;
            for (int inner = 0; inner < cfg.inner_folds && par_ok; ++inner) {
              std::vector<int> it_rows, iv_rows;
              for (int i = 0; i < train.n; ++i)
                (inner_fold_of[i] == inner ? iv_rows : it_rows).push_back(i);
              if (iv_rows.empty()) continue;
              Dataset inner_train(static_cast<int>(it_rows.size()), train.d);
              std::vector<int> inner_labels;
              for (std::size_t r = 0; r < it_rows.size(); ++r) {
                for (int j = 0; j < train.d; ++j)
                  inner_train(static_cast<int>(r), j) = train(it_rows[r], j);
                inner_labels.push_back(train_labels[it_rows[r]]);
              }
              if (std::count(inner_labels.begin(), inner_labels.end(), 1) == 0 ||
                  std::count(inner_labels.begin(), inner_labels.end(), 0) == 0) {
                par_ok = false;
                break;
              }
              try {
                const SymMatrix prec =
                    detail::fit_precision(inner_train, method, par, cfg.solver);
                const detail::LdaModel lda = detail::fit_lda_means(inner_train, inner_labels);
                for (int r : iv_rows) {
                  const int predicted = detail::lda_classify(prec, lda, train.row(r), train.d);
                  const int actual = train_labels[r];
                  if (actual == 1 && predicted == 1) ++inner_c.tp;
                  else if (actual == 1) ++inner_c.fn;
                  else if (predicted == 1) ++inner_c.fp;
                  else ++inner_c.tn;
                }
              } catch (const std::exception&) {
                par_ok = false;
              }
            }
            if (!par_ok) continue;
            const double mcc = classification_metrics(inner_c).mcc;
            if (mcc > best_mcc + 1e-15) {
              best_mcc = mcc;
              best_par = par;
            }
          }

          const SymMatrix prec = detail::fit_precision(train, method, best_par, cfg.solver);
          const detail::LdaModel lda = detail::fit_lda_means(train, train_labels);
          for (std::size_t r = 0; r < test_rows.size(); ++r) {
            const int predicted = detail::lda_classify(prec, lda, test.row(static_cast<int>(r)),
                                                       test.d);
            const int actual = test_labels[r];
            Confusion& c = rep_confusion[mi];
            if (actual == 1 && predicted == 1) ++c.tp;
            else if (actual == 1) ++c.fn;
            else if (predicted == 1) ++c.fp;
            else ++c.tn;
          }
        }
      }
    }
    if (!rep_ok) throw ConvergenceError("lda_pipeline: could not stratify after 10 attempts");
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
      per_method[mi].push_back(classification_metrics(rep_confusion[mi]));
  }

  LdaResult out;
  out.d_genes = cfg.d_genes;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    MethodSummary s;
    s.method = cfg.methods[mi];
    s.replicates = static_cast<int>(per_method[mi].size());
    std::vector<double> acc, mcc, tnr, tpr;
    for (const MetricsReport& r : per_method[mi]) {
      acc.push_back(r.acc);
      mcc.push_back(r.mcc);
      tnr.push_back(r.tnr);
      tpr.push_back(r.tpr);
    }
    detail::mean_se(acc, &s.acc_mean, &s.acc_se);
    detail::mean_se(mcc, &s.mcc_mean, &s.mcc_se);
    detail::mean_se(tnr, &s.tnr_mean, &s.tnr_se);
    detail::mean_se(tpr, &s.tpr_mean, &s.tpr_se);
    out.methods.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// result serialization

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline std::string to_csv(const ResultTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

// temp-file-plus-rename so readers never observe a partial write
inline void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("rename failed for " + path + ": " + ec.message());
}

inline ResultTable summary_table(const std::vector<MethodSummary>& methods, int n) {
  ResultTable t;
  t.columns = {"method", "n", "metric", "mean", "stderr"};
  for (const MethodSummary& s : methods) {
    const std::string name = method_name(s.method);
    const std::string ns = std::to_string(n);
    t.rows.push_back({name, ns, "acc", format_double(s.acc_mean), format_double(s.acc_se)});
    t.rows.push_back({name, ns, "mcc", format_double(s.mcc_mean), format_double(s.mcc_se)});
    t.rows.push_back({name, ns, "tnr", format_double(s.tnr_mean), format_double(s.tnr_se)});
    t.rows.push_back({name, ns, "tpr", format_double(s.tpr_mean), format_double(s.tpr_se)});
  }
  return t;
}

}  // namespace advprec
