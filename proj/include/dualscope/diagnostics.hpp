// Behavioral observability experiments: run two filters from different
// priors on the same observation realizations and measure how far their
// outputs separate, both in sup norm and as the relative-entropy integral
// E int |pi^mu(h) - pi^nu(h)|^2 dt.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dualscope/filter.hpp"
#include "dualscope/observability.hpp"
#include "dualscope/parallel.hpp"
#include "dualscope/simulate.hpp"
#include "dualscope/types.hpp"

namespace dualscope {

struct O3Result {
  double sup_discrepancy = 0.0;
  Matrix trace;  // (n_steps + 1) x m, path-averaged |pi^mu(h) - pi^nu(h)|
  long clamp_events = 0;  // filter instability monitor; 0 on healthy runs
};

namespace detail {

struct PairFilterStats {
  double sup = 0.0;
  double entropy = 0.0;  // sum_k |pi^mu(h) - pi^nu(h)|^2 dt along this path
  Matrix abs_trace;      // (n_steps + 1) x m
  long clamp_events = 0;
};

// Both filters see the identical observation path (drawn under the law with
// prior mu) and identical noise, so prior-induced differences are isolated
// from Monte Carlo variation.
inline PairFilterStats filter_pair_stats(const Model& model,
                                         const ProbabilityMeasure& mu,
                                         const ProbabilityMeasure& nu,
                                         const TimeGrid& grid, uint64_t seed,
                                         uint64_t path_index) {
  const PathBundle b = simulate_physical_path(model, mu, grid, seed, path_index);
  const FilterTrajectory fmu =
      propagate_zakai(model, mu.as_signed(), grid, b.dZ, ZakaiMode::probability);
  const FilterTrajectory fnu =
      propagate_zakai(model, nu.as_signed(), grid, b.dZ, ZakaiMode::probability);
  PairFilterStats st;
  st.clamp_events = fmu.clamp_events + fnu.clamp_events;
  st.abs_trace.resize(grid.points(), model.m);
  for (long k = 0; k < grid.points(); ++k) {
    double sq = 0.0;
    for (int c = 0; c < model.m; ++c) {
      const double gap = (fmu.pi.row(k) - fnu.pi.row(k)).dot(model.H.col(c));
      const double a = std::abs(gap);
      st.abs_trace(k, c) = a;
      st.sup = std::max(st.sup, a);
      if (k < grid.n_steps) sq += gap * gap;
    }
    if (k < grid.n_steps) st.entropy += sq * grid.dt;
  }
  return st;
}

}  // namespace detail

// Sup over paths and grid points of the filter-output gap per channel, plus
// the path-averaged time trace.
inline O3Result o3_experiment(const Model& model, const ProbabilityMeasure& mu,
                              const ProbabilityMeasure& nu,
                              const TimeGrid& grid, int n_paths, uint64_t seed,
                              int threads = 0) {
  if (mu.dim() != model.d || nu.dim() != model.d)
    throw DimensionMismatch("prior dimension mismatch");
  O3Result out;
  std::vector<double> sup(n_paths, 0.0);
  std::vector<long> clamps(n_paths, 0);
  std::vector<Matrix> partial_trace;
  const int64_t n_chunks = std::min<int64_t>(n_paths, 256);
  partial_trace.assign(n_chunks, Matrix::Zero(grid.points(), model.m));
  parallel_chunks(n_paths, threads, [&](int64_t chunk, int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      const auto st = detail::filter_pair_stats(model, mu, nu, grid, seed, p);
      sup[p] = st.sup;
      clamps[p] = st.clamp_events;
      partial_trace[chunk] += st.abs_trace;
    }
  });
  out.trace = Matrix::Zero(grid.points(), model.m);
  for (const Matrix& t : partial_trace) out.trace += t;
  out.trace /= static_cast<double>(n_paths);
  for (double s : sup) out.sup_discrepancy = std::max(out.sup_discrepancy, s);
  for (long c : clamps) out.clamp_events += c;
  return out;
}

struct EntropyEstimate {
  double estimate = 0.0;
  double std_err = 0.0;
};

// Monte Carlo estimate of E^mu int_0^T |pi^mu(h) - pi^nu(h)|^2 dt, the
// relative entropy between the two observation laws.
inline EntropyEstimate relative_entropy_estimate(const Model& model,
                                                 const ProbabilityMeasure& mu,
                                                 const ProbabilityMeasure& nu,
                                                 const TimeGrid& grid,
                                                 int n_paths, uint64_t seed,
                                                 int threads = 0) {
  if (mu.dim() != model.d || nu.dim() != model.d)
    throw DimensionMismatch("prior dimension mismatch");
  Vector samples(n_paths);
  parallel_for(n_paths, threads, [&](int64_t p) {
    samples(p) = detail::filter_pair_stats(model, mu, nu, grid, seed, p).entropy;
  });
  EntropyEstimate out;
  out.estimate = samples.mean();
  if (n_paths > 1) {
    const double var =
        (samples.array() - out.estimate).square().sum() / (n_paths - 1);
    out.std_err = std::sqrt(var / n_paths);
  }
  return out;
}

enum class Verdict { indistinguishable, distinguishable, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::indistinguishable: return "indistinguishable";
    case Verdict::distinguishable: return "distinguishable";
    default: return "inconclusive";
  }
}

struct DistinguishConfig {
  TimeGrid grid = TimeGrid::make(1.0, 1e-4);
  int n_paths = 100;
  uint64_t seed = 12345;
  double eps_entropy = 1e-3;   // tuned at dt = 1e-4
  double eps_sup = 1e-2;
  double algebraic_tol = kDefaultRankTol;
  int threads = 0;
};

struct DistinguishabilityResult {
  double sup_discrepancy = 0.0;
  EntropyEstimate entropy;
  Verdict verdict = Verdict::inconclusive;
  bool algebraic_indistinguishable = false;
  double algebraic_residual = 0.0;  // relative projection residual of nu - mu
  bool mismatch = false;
  DistinguishConfig config;
  Matrix trace;
};

// Behavioral verdict plus a cross-check against the algebraic test: when
// nu - mu lies in the unobservable span the experiments must come back
// indistinguishable, and conversely; a definite contradiction raises the
// mismatch flag.
inline DistinguishabilityResult distinguish(const Model& model,
                                            const ProbabilityMeasure& mu,
                                            const ProbabilityMeasure& nu,
                                            const DistinguishConfig& config) {
  DistinguishabilityResult out;
  out.config = config;
  const O3Result o3 = o3_experiment(model, mu, nu, config.grid, config.n_paths,
                                    config.seed, config.threads);
  out.sup_discrepancy = o3.sup_discrepancy;
  out.trace = o3.trace;
  out.entropy = relative_entropy_estimate(model, mu, nu, config.grid,
                                          config.n_paths, config.seed,
                                          config.threads);

  if (out.entropy.estimate < config.eps_entropy &&
      out.sup_discrepancy < config.eps_sup)
    out.verdict = Verdict::indistinguishable;
  else if (out.entropy.estimate - 3.0 * out.entropy.std_err >
           config.eps_entropy)
    out.verdict = Verdict::distinguishable;
  else
    out.verdict = Verdict::inconclusive;

  const Vector delta = nu.weights - mu.weights;
  const double dn = delta.norm();
  if (dn == 0.0) {
    out.algebraic_indistinguishable = true;
    out.algebraic_residual = 0.0;
  } else {
    const Subspace null_dirs =
        unobservable_directions(model, config.algebraic_tol);
    out.algebraic_residual = null_dirs.dim() == 0
                                 ? 1.0
                                 : null_dirs.residual(delta) / dn;
    out.algebraic_indistinguishable =
        out.algebraic_residual < config.algebraic_tol;
  }
  out.mismatch = (out.algebraic_indistinguishable &&
                  out.verdict == Verdict::distinguishable) ||
                 (!out.algebraic_indistinguishable &&
                  out.verdict == Verdict::indistinguishable);
  return out;
}

}  // namespace dualscope
