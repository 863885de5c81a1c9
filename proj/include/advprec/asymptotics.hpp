// Monte-Carlo laboratory for the rescaled-error limits: the perturbation
// bias matrix, replicated rescaled errors under delta_n = eta n^{-gamma},
// and exact-zero mass frequencies for the surrogate path.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "advprec/dataset.hpp"
#include "advprec/glasso.hpp"
#include "advprec/matrix.hpp"
#include "advprec/rng.hpp"
#include "advprec/shrinkage.hpp"
#include "advprec/synth.hpp"

namespace advprec {

enum class AsymptoticEstimator { Exact, Surrogate };

struct AsymptoticsConfig {
  double gamma = 0.5;
  double eta = 1.0;
  std::vector<int> n_values;
  int reps = 100;
  double p = 2.0;  // 2 or infinity
  AsymptoticEstimator estimator = AsymptoticEstimator::Exact;
  std::uint64_t seed = 1;
  SolverConfig solver;
};

// Monte-Carlo estimate of
//   -2 eta Sigma^{-1} E[ (sign(z) .* |z|^{q-1}) x^T / ||z||_q^{q-1} ] Sigma^{-1},
// z = Sigma^{-1} x, symmetrized. The per-entry standard error comes from
// batching the draws and is exact through the sandwich.
inline SymMatrix bias_matrix(const SymPDMatrix& cov, double p, double eta, int mc_samples,
                             std::uint64_t seed, SymMatrix* stderr_out = nullptr) {
  if (mc_samples < 10000)
    throw std::invalid_argument("bias_matrix: need at least 1e4 Monte Carlo samples");
  const int d = cov.dim();
  const bool inf_p = std::isinf(p);
  const double q = inf_p ? 1.0 : p / (p - 1.0);
  const SymMatrix prec = inverse_pd(cov).mat();
  const LowerFactor& l = cov.chol();

  const int batches = 20;
  const int per_batch = mc_samples / batches;
  std::vector<SymMatrix> batch_bias;
  batch_bias.reserve(batches);

  Rng rng(seed);
  std::vector<double> zn(d), x(d), z(d), v(d);
  for (int b = 0; b < batches; ++b) {
    Matrix acc(d, d);
    for (int t = 0; t < per_batch; ++t) {
      for (int j = 0; j < d; ++j) zn[j] = rng.normal();
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int k = 0; k <= j; ++k) s += l(j, k) * zn[k];
        x[j] = s;
      }
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += prec(j, k) * x[k];
        z[j] = s;
      }
      double norm_q = 0.0;
      if (inf_p) {
        for (int j = 0; j < d; ++j) norm_q += std::abs(z[j]);
      } else {
        for (int j = 0; j < d; ++j) norm_q += std::pow(std::abs(z[j]), q);
        norm_q = std::pow(norm_q, 1.0 / q);
      }
      if (norm_q == 0.0) continue;
      const double denom = inf_p ? 1.0 : std::pow(norm_q, q - 1.0);
      for (int j = 0; j < d; ++j) {
        const double sgn = (z[j] > 0.0) ? 1.0 : (z[j] < 0.0 ? -1.0 : 0.0);
        v[j] = inf_p ? sgn : sgn * std::pow(std::abs(z[j]), q - 1.0) / denom;
      }
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) acc(i, j) += v[i] * x[j];
    }
    SymMatrix e_hat(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j)
        e_hat.set(i, j, 0.5 * (acc(i, j) + acc(j, i)) / per_batch);
    // sandwich: -2 eta prec * e_hat * prec
    Matrix pe(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += prec(i, k) * e_hat(k, j);
        pe(i, j) = s;
      }
    SymMatrix bias(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += pe(i, k) * prec(k, j);
        bias.set(i, j, -2.0 * eta * s);
      }
    batch_bias.push_back(std::move(bias));
  }

  SymMatrix mean(d);
  for (const SymMatrix& b : batch_bias)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) mean.set(i, j, mean(i, j) + b(i, j) / batches);
  if (stderr_out) {
    SymMatrix se(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) {
        double var = 0.0;
        for (const SymMatrix& b : batch_bias) {
          const double r = b(i, j) - mean(i, j);
          var += r * r;
        }
        se.set(i, j, std::sqrt(var / (batches - 1) / batches));
      }
    *stderr_out = se;
  }
  return mean;
}

struct RescaledErrorRun {
  int n = 0;
  double delta = 0.0;
  std::vector<SymMatrix> errors;  // scaled per-replicate error matrices
  int failures = 0;
};

struct RescaledErrorSample {
  double gamma = 0.0;
  double scale_exponent = 0.0;  // gamma when gamma < 1/2, else 1/2
  std::vector<RescaledErrorRun> runs;
};

inline SymMatrix entrywise_mean(const std::vector<SymMatrix>& ms) {
  if (ms.empty()) throw std::invalid_argument("entrywise_mean: empty sample");
  const int d = ms.front().dim();
  SymMatrix mean(d);
  for (const SymMatrix& m : ms)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) mean.set(i, j, mean(i, j) + m(i, j) / ms.size());
  return mean;
}

inline SymMatrix entrywise_variance(const std::vector<SymMatrix>& ms) {
  const SymMatrix mean = entrywise_mean(ms);
  const int d = mean.dim();
  SymMatrix var(d);
  for (const SymMatrix& m : ms)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) {
        const double r = m(i, j) - mean(i, j);
        var.set(i, j, var(i, j) + r * r / (ms.size() - 1));
      }
  return var;
}

// Per replicate: sample n points, fit with delta_n = eta n^{-gamma}, record
// n^gamma (C_hat - Sigma^{-1}) below the 1/2 threshold and sqrt(n) at or
// above it. The exact path is the sample-wise l2 solver; the surrogate path
// is the weighted-lasso fit.
inline RescaledErrorSample rescaled_errors(const GroundTruth& truth,
                                           const AsymptoticsConfig& cfg) {
  if (cfg.reps < 2) throw std::invalid_argument("rescaled_errors: need reps >= 2");
  if (!(cfg.gamma > 0.0 && cfg.eta > 0.0))
    throw std::invalid_argument("rescaled_errors: gamma and eta must be positive");
  if (cfg.estimator == AsymptoticEstimator::Exact && cfg.p != 2.0)
    throw std::invalid_argument("rescaled_errors: the exact path is implemented for p = 2 only");
  if (cfg.estimator == AsymptoticEstimator::Surrogate && !std::isinf(cfg.p))
    throw std::invalid_argument("rescaled_errors: the surrogate path is the p = inf estimator");

  const int d = truth.precision.dim();
  const SymMatrix& prec = truth.precision;
  RescaledErrorSample out;
  out.gamma = cfg.gamma;
  out.scale_exponent = cfg.gamma < 0.5 ? cfg.gamma : 0.5;

  for (std::size_t ni = 0; ni < cfg.n_values.size(); ++ni) {
    const int n = cfg.n_values[ni];
    RescaledErrorRun run;
    run.n = n;
    run.delta = cfg.eta * std::pow(static_cast<double>(n), -cfg.gamma);
    const double scale = std::pow(static_cast<double>(n), out.scale_exponent);
    run.errors.reserve(cfg.reps);
    const int max_failures = std::max(1, cfg.reps / 100);
    for (int rep = 0; rep < cfg.reps; ++rep) {
      const std::uint64_t stream =
          derive_stream(cfg.seed, (static_cast<std::uint64_t>(ni) << 32) | static_cast<std::uint32_t>(rep));
      const Dataset data = sample_gaussian(truth.covariance, n, stream);
      SymMatrix estimate(d);
      try {
        if (cfg.estimator == AsymptoticEstimator::Exact)
          estimate = fit_l2_samplewise(data, run.delta).estimate.mat();
        else
          estimate = fit_linf(data, run.delta, cfg.solver, false).estimate.mat();
      } catch (const std::exception&) {
        if (++run.failures > max_failures)
          throw ConvergenceError("rescaled_errors: replicate failure budget exceeded at n = " +
                                 std::to_string(n));
        continue;
      }
      SymMatrix err(d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) err.set(i, j, scale * (estimate(i, j) - prec(i, j)));
      run.errors.push_back(std::move(err));
    }
    out.runs.push_back(std::move(run));
  }
  return out;
}

struct ZeroMassReport {
  // one row per null entry (i<j, not in the true support)
  std::vector<std::pair<int, int>> entries;
  std::vector<double> frequency;
  double min_frequency = 1.0;
};

inline ZeroMassReport zero_mass_frequency(const RescaledErrorRun& run, const GroundTruth& truth) {
  const int d = truth.precision.dim();
  ZeroMassReport out;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      if (truth.precision(i, j) != 0.0) continue;
      long zeros = 0;
      for (const SymMatrix& e : run.errors)
        if (e(i, j) == 0.0) ++zeros;
      out.entries.emplace_back(i, j);
      out.frequency.push_back(static_cast<double>(zeros) / run.errors.size());
    }
  for (double f : out.frequency) out.min_frequency = std::min(out.min_frequency, f);
  if (out.frequency.empty()) out.min_frequency = 0.0;
  return out;
}

inline double zero_frequency_at(const RescaledErrorRun& run, int i, int j) {
  long zeros = 0;
  for (const SymMatrix& e : run.errors)
    if (e(i, j) == 0.0) ++zeros;
  return static_cast<double>(zeros) / run.errors.size();
}

}  // namespace advprec
