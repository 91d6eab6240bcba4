// The estimation-control duality lab: the backward equation solved exactly
// for deterministic inputs, a regression Monte Carlo solver for adapted
// feedback inputs, the forward (filter-side) representation of the same
// value, the adjoint pairing identity, the empirically reachable span, and
// the terminal-value estimator built from a control.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dualscope/control.hpp"
#include "dualscope/filter.hpp"
#include "dualscope/linalg.hpp"
#include "dualscope/parallel.hpp"
#include "dualscope/rng.hpp"
#include "dualscope/simulate.hpp"
#include "dualscope/types.hpp"

namespace dualscope {

struct BsdeSolution {
  TimeGrid grid;
  Vector y0;                // value at time 0 (deterministic by adaptedness)
  Vector y0_std_err;        // per-component MC error (zero for the ODE solver)
  Vector terminal;
  Matrix y_path;            // (n_steps + 1) x d, deterministic solver only
  Matrix batch_y0;          // d x n_batches (regression solver only)
  Matrix v_time_avg_mean;   // d x m, raw martingale-coefficient samples
  Matrix v_time_avg_se;     // matched standard errors
  double ridge = 0.0;
  int n_paths = 0;
  int n_batches = 0;
};

// Backward Euler for -dY/dt = A Y + H u_t with a deterministic input; the
// martingale term vanishes identically, so this is the exact solution of the
// backward equation restricted to deterministic controls.
inline BsdeSolution solve_backward_ode(const Model& model,
                                       const AdaptedControl& control,
                                       const Vector& terminal) {
  if (!control.is_deterministic())
    throw ConfigError("solve_backward_ode needs a deterministic control");
  if (control.m != model.m)
    throw DimensionMismatch("control channel count mismatch");
  if (terminal.size() != model.d)
    throw DimensionMismatch("terminal value dimension mismatch");
  const TimeGrid& grid = control.grid;
  BsdeSolution out;
  out.grid = grid;
  out.terminal = terminal;
  out.y_path.resize(grid.points(), model.d);
  Vector y = terminal;
  out.y_path.row(grid.n_steps) = y;
  for (long k = grid.n_steps - 1; k >= 0; --k) {
    y += grid.dt * (model.A * y + model.H * control.table.row(k).transpose());
    out.y_path.row(k) = y;
  }
  out.y0 = y;
  out.y0_std_err = Vector::Zero(model.d);
  out.v_time_avg_mean = Matrix::Zero(model.d, model.m);
  out.v_time_avg_se = Matrix::Zero(model.d, model.m);
  return out;
}

namespace detail {

// Ridge-regularized least squares on a precomputed Gram matrix; throws when
// the regularized normal equations are still numerically singular.
struct RidgeRegression {
  Eigen::LDLT<Matrix> factor;
  double lambda = 0.0;

  RidgeRegression(const Matrix& gram, double ridge) {
    const int F = static_cast<int>(gram.rows());
    lambda = ridge >= 0.0 ? ridge : 1e-6 * gram.trace() / F;
    Matrix reg = gram;
    reg.diagonal().array() += lambda;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(reg);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12)
      throw SingularRegression(
          "feature Gram matrix is numerically singular (condition " +
          std::to_string(lo > 0.0 ? hi / lo : std::nan("")) +
          "); increase the ridge or reduce the feature set");
    factor.compute(reg);
  }

  Vector solve(const Vector& rhs) const { return factor.solve(rhs); }
};

inline void fill_brownian_step(Matrix& dZ, long k, int m, double sqrt_dt,
                               uint64_t seed, uint64_t stream_base,
                               long path_begin) {
  for (long p = 0; p < dZ.rows(); ++p)
    for (int c = 0; c < m; ++c)
      dZ(p, c) = sqrt_dt * rng::normal_at(seed, stream_base + path_begin + p,
                                          static_cast<uint64_t>(k) * m + c);
}

}  // namespace detail

// Regression Monte Carlo solver for the backward equation
//   -dY = (A Y + H u + rowsum(H .* V)) dt - V dZ,  Y_T given,
// on reference-measure Brownian paths. Conditional expectations are ridge
// regressions on the quadratic feature library of the current observation
// value; the martingale coefficient is recovered from V_k ~ E[Y_{k+1} dZ_k] /
// dt. Paths are split into independent batches, each solved with its own
// regressions, so the spread of the batch values is an honest standard error
// that includes the regression noise.
inline BsdeSolution solve_bsde_lsmc(const Model& model,
                                    const AdaptedControl& control,
                                    const Vector& terminal, int n_paths,
                                    uint64_t seed, double ridge = -1.0,
                                    int n_batches = 8,
                                    uint64_t stream_base = 0) {
  if (control.m != model.m)
    throw DimensionMismatch("control channel count mismatch");
  if (terminal.size() != model.d)
    throw DimensionMismatch("terminal value dimension mismatch");
  if (n_paths < 2) throw ConfigError("regression solver needs n_paths >= 2");
  const TimeGrid& grid = control.grid;
  const FeatureBasis basis{model.m};
  const int F = basis.count();
  n_batches = std::max(1, std::min<int>(n_batches, n_paths / std::max(2 * F, 8)));
  if (n_batches < 1) n_batches = 1;

  const double sqrt_dt = std::sqrt(grid.dt);

  BsdeSolution out;
  out.grid = grid;
  out.terminal = terminal;
  out.n_paths = n_paths;
  out.n_batches = n_batches;
  out.batch_y0.resize(model.d, n_batches);

  // Raw martingale-coefficient samples, time-averaged per path.
  Matrix v_raw = Matrix::Zero(n_paths, model.d * model.m);
  double ridge_used = 0.0;

  for (int b = 0; b < n_batches; ++b) {
    const long p0 = static_cast<long>(b) * n_paths / n_batches;
    const long p1 = static_cast<long>(b + 1) * n_paths / n_batches;
    const long P = p1 - p0;

    // Terminal observation values, rebuilt backwards step by step from the
    // counter-based increments (no path storage).
    Matrix Zcur = Matrix::Zero(P, model.m);
    for (long k = 0; k < grid.n_steps; ++k)
      for (long p = 0; p < P; ++p)
        for (int c = 0; c < model.m; ++c)
          Zcur(p, c) += sqrt_dt * rng::normal_at(seed, stream_base + p0 + p,
                                                 static_cast<uint64_t>(k) *
                                                         model.m + c);

    Matrix Y = terminal.transpose().replicate(P, 1);
    Matrix dZ(P, model.m);
    Matrix phi(P, F);
    Matrix vfit(P, model.d * model.m);
    Vector feat(F), u(model.m);

    for (long k = grid.n_steps - 1; k >= 0; --k) {
      detail::fill_brownian_step(dZ, k, model.m, sqrt_dt, seed, stream_base,
                                 p0);
      Zcur -= dZ;
      for (long p = 0; p < P; ++p) {
        basis.eval(Zcur.row(p), 0.0, feat);
        phi.row(p) = feat;
      }

      if (k > 0) {
        const Matrix gram = phi.transpose() * phi;
        detail::RidgeRegression reg(gram, ridge);
        ridge_used = reg.lambda;
        for (int i = 0; i < model.d; ++i)
          for (int c = 0; c < model.m; ++c) {
            const Vector target =
                Y.col(i).cwiseProduct(dZ.col(c)) / grid.dt;
            vfit.col(i * model.m + c) =
                phi * reg.solve(phi.transpose() * target);
          }
        // Driver target, then the conditional expectation of the whole sum.
        Matrix G = Y + grid.dt * (Y * model.A.transpose());
        for (long p = 0; p < P; ++p) {
          control.eval(k, Zcur.row(p), feat, u);
          G.row(p) += grid.dt * (model.H * u).transpose();
        }
        for (int i = 0; i < model.d; ++i)
          for (int c = 0; c < model.m; ++c)
            G.col(i) += grid.dt * model.H(i, c) * vfit.col(i * model.m + c);
        for (long p = 0; p < P; ++p)
          for (int i = 0; i < model.d; ++i)
            for (int c = 0; c < model.m; ++c)
              v_raw(p0 + p, i * model.m + c) +=
                  Y(p, i) * dZ(p, c) / (grid.dt * grid.n_steps);
        for (int i = 0; i < model.d; ++i)
          Y.col(i) = phi * reg.solve(phi.transpose() * G.col(i));
      } else {
        // Z_0 = 0: the step-0 sigma-algebra is trivial, conditional
        // expectations reduce to plain cross-path means.
        for (long p = 0; p < P; ++p)
          for (int i = 0; i < model.d; ++i)
            for (int c = 0; c < model.m; ++c)
              v_raw(p0 + p, i * model.m + c) +=
                  Y(p, i) * dZ(p, c) / (grid.dt * grid.n_steps);
        Matrix vmean(model.d, model.m);
        for (int i = 0; i < model.d; ++i)
          for (int c = 0; c < model.m; ++c)
            vmean(i, c) = Y.col(i).cwiseProduct(dZ.col(c)).mean() / grid.dt;
        Matrix G = Y + grid.dt * (Y * model.A.transpose());
        for (long p = 0; p < P; ++p) {
          control.eval(k, Zcur.row(p), feat, u);
          G.row(p) += grid.dt * (model.H * u).transpose();
        }
        for (int i = 0; i < model.d; ++i) {
          double hv = 0.0;
          for (int c = 0; c < model.m; ++c) hv += model.H(i, c) * vmean(i, c);
          G.col(i).array() += grid.dt * hv;
        }
        out.batch_y0.col(b) = G.colwise().mean().transpose();
      }
    }
  }

  out.ridge = ridge_used;
  out.y0 = out.batch_y0.rowwise().mean();
  out.y0_std_err = Vector::Zero(model.d);
  if (n_batches > 1) {
    for (int i = 0; i < model.d; ++i) {
      const double mean = out.y0(i);
      double ss = 0.0;
      for (int b = 0; b < n_batches; ++b) {
        const double dev = out.batch_y0(i, b) - mean;
        ss += dev * dev;
      }
      out.y0_std_err(i) =
          std::sqrt(ss / (n_batches - 1) / static_cast<double>(n_batches));
    }
  }
  out.v_time_avg_mean.resize(model.d, model.m);
  out.v_time_avg_se.resize(model.d, model.m);
  for (int i = 0; i < model.d; ++i)
    for (int c = 0; c < model.m; ++c) {
      const auto col = v_raw.col(i * model.m + c);
      const double mean = col.mean();
      const double var =
          (col.array() - mean).square().sum() / (n_paths - 1);
      out.v_time_avg_mean(i, c) = mean;
      out.v_time_avg_se(i, c) = std::sqrt(var / n_paths);
    }
  return out;
}

struct ForwardRepresentation {
  Vector y0;
  Vector std_err;
  Matrix samples;  // d x n_paths
};

// Filter-side representation of the backward value: per reference path,
// accumulate sum_k dt Phi_k^T H u_k plus c * 1. The naive estimator carries
// c * Phi_T^T 1 instead of c * 1; since the discrete mass of every point
// mass is a martingale (E[Phi^T 1] = 1 exactly for this scheme), replacing
// it is an exact-mean control variate that removes the dominant noise term.
inline ForwardRepresentation y0_forward_representation(
    const Model& model, const AdaptedControl& control, double c, int n_paths,
    uint64_t seed, uint64_t stream_base = 0, int threads = 0) {
  if (control.m != model.m)
    throw DimensionMismatch("control channel count mismatch");
  if (n_paths < 2) throw ConfigError("need n_paths >= 2");
  const TimeGrid& grid = control.grid;
  const double sqrt_dt = std::sqrt(grid.dt);
  ForwardRepresentation out;
  out.samples.resize(model.d, n_paths);

  const Matrix At = model.A.transpose();
  parallel_for(n_paths, threads, [&](int64_t p) {
    Matrix phi = Matrix::Identity(model.d, model.d);
    Matrix scratch(model.d, model.d);
    RowVector z = RowVector::Zero(model.m);
    RowVector dz(model.m);
    Vector acc = Vector::Zero(model.d);
    Vector feat, u(model.m);
    for (long k = 0; k < grid.n_steps; ++k) {
      control.eval(k, z, feat, u);
      acc.noalias() += grid.dt * (phi.transpose() * (model.H * u));
      for (int ch = 0; ch < model.m; ++ch)
        dz(ch) = sqrt_dt * rng::normal_at(seed, stream_base + p,
                                          static_cast<uint64_t>(k) * model.m +
                                              ch);
      detail::zakai_matrix_step(At, model.H, grid.dt, dz, phi, scratch);
      if (phi.cwiseAbs().maxCoeff() > 1e300)
        throw OverflowError("fundamental matrix overflow in forward "
                            "representation; shorten the horizon");
      z += dz;
    }
    out.samples.col(p) = acc;
    out.samples.col(p).array() += c;
  });

  out.y0 = out.samples.rowwise().mean();
  out.std_err.resize(model.d);
  for (int i = 0; i < model.d; ++i) {
    const double var = (out.samples.row(i).array() - out.y0(i)).square().sum() /
                       (n_paths - 1);
    out.std_err(i) = std::sqrt(var / n_paths);
  }
  return out;
}

struct AdjointIdentityResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double std_err = 0.0;
  double lhs_std_err = 0.0;
  double rhs_std_err = 0.0;
  int n_paths = 0;
  double dt = 0.0;
};

// Checks <pi0, Y0> = E[ sum_k u_k^T sigma_k(h) dt ] + c pi0(1) with the
// backward value on the left and an independent filter-side Monte Carlo
// estimate on the right. Left and right use disjoint stream ranges.
inline AdjointIdentityResult verify_adjoint_identity(
    const Model& model, const SignedMeasure& pi0, const AdaptedControl& control,
    double c, int n_paths, uint64_t seed, int threads = 0) {
  if (pi0.dim() != model.d)
    throw DimensionMismatch("initial measure dimension mismatch");
  const TimeGrid& grid = control.grid;
  AdjointIdentityResult out;
  out.n_paths = n_paths;
  out.dt = grid.dt;

  if (control.is_deterministic()) {
    const BsdeSolution ode =
        solve_backward_ode(model, control, c * model.ones());
    out.lhs = pi0(ode.y0);
    out.lhs_std_err = 0.0;
  } else {
    const BsdeSolution bsde = solve_bsde_lsmc(model, control, c * model.ones(),
                                              n_paths, seed);
    out.lhs = pi0(bsde.y0);
    double ss = 0.0;
    for (int b = 0; b < bsde.n_batches; ++b) {
      const double dev = pi0(Vector(bsde.batch_y0.col(b))) - out.lhs;
      ss += dev * dev;
    }
    out.lhs_std_err = bsde.n_batches > 1
                          ? std::sqrt(ss / (bsde.n_batches - 1) /
                                      static_cast<double>(bsde.n_batches))
                          : 0.0;
  }

  // Right side on its own paths.
  const double sqrt_dt = std::sqrt(grid.dt);
  const Matrix At = model.A.transpose();
  Vector per_path(n_paths);
  parallel_for(n_paths, threads, [&](int64_t p) {
    Vector s = pi0.weights;
    Vector scratch(model.d);
    RowVector z = RowVector::Zero(model.m);
    RowVector dz(model.m);
    Vector feat, u(model.m);
    double integral = 0.0;
    for (long k = 0; k < grid.n_steps; ++k) {
      control.eval(k, z, feat, u);
      for (int ch = 0; ch < model.m; ++ch)
        integral += grid.dt * u(ch) * s.dot(model.H.col(ch));
      for (int ch = 0; ch < model.m; ++ch)
        dz(ch) = sqrt_dt * rng::normal_at(seed, n_paths + p,
                                          static_cast<uint64_t>(k) * model.m +
                                              ch);
      detail::zakai_vector_step(At, model.H, grid.dt, dz, s, scratch);
      z += dz;
    }
    per_path(p) = integral;
  });
  const double mean = per_path.mean();
  out.rhs = mean + c * pi0.mass();
  const double var = (per_path.array() - mean).square().sum() / (n_paths - 1);
  out.rhs_std_err = std::sqrt(var / n_paths);

  out.residual = std::abs(out.lhs - out.rhs);
  out.std_err = std::hypot(out.lhs_std_err, out.rhs_std_err);
  return out;
}

struct SpanEstimate {
  int rank = 0;
  Subspace span;
  double noise_floor = 0.0;           // singular-value threshold component
  double subspace_noise_floor = 0.0;  // relative basis-perturbation scale
  Matrix y0s;      // d x n_controls
  Matrix std_errs; // d x n_controls
  Vector singular_values;
};

// Rank of the set of backward values reached by randomly drawn feedback
// rules and terminal constants, with the singular-value cut placed above the
// Monte Carlo noise floor estimated from the per-entry standard errors.
// Feedback magnitudes are drawn bounded away from zero so no single unlucky
// draw can silence a feature direction; the floor is a seeded parametric
// bootstrap of the spectral norm of the error matrix.
inline SpanEstimate empirical_reachable_span(const Model& model,
                                             int n_controls, int n_paths,
                                             uint64_t seed,
                                             const TimeGrid& grid,
                                             double tol = kDefaultRankTol,
                                             int threads = 0) {
  if (n_controls < model.d)
    throw ConfigError("need at least d random controls to probe the span");
  const FeatureBasis basis{model.m};
  rng::Stream draw(seed, 0x7370616e);  // dedicated stream for control draws
  SpanEstimate out;
  out.y0s.resize(model.d, n_controls);
  out.std_errs.resize(model.d, n_controls);
  for (int j = 0; j < n_controls; ++j) {
    Matrix theta(basis.count(), model.m);
    for (int i = 0; i < theta.rows(); ++i)
      for (int c = 0; c < theta.cols(); ++c) {
        const double x = draw.normal();
        theta(i, c) = (x < 0.0 ? -1.0 : 1.0) * (0.4 + std::abs(x));
      }
    const double cterm = 0.3 * draw.normal();
    const AdaptedControl control = AdaptedControl::feedback(grid, theta);
    const ForwardRepresentation fr = y0_forward_representation(
        model, control, cterm, n_paths, seed,
        static_cast<uint64_t>(j + 1) * n_paths, threads);
    out.y0s.col(j) = fr.y0;
    out.std_errs.col(j) = fr.std_err;
  }
  // The entry errors are Gaussian to excellent accuracy, so resampling the
  // error matrix from the measured standard errors gives the distribution
  // of the spurious singular values directly; keep 1.5x its observed max.
  {
    rng::Stream boot(seed, 0x626f6f74);
    Matrix noise(model.d, n_controls);
    double worst = 0.0;
    for (int b = 0; b < 256; ++b) {
      for (int i = 0; i < model.d; ++i)
        for (int j = 0; j < n_controls; ++j)
          noise(i, j) = out.std_errs(i, j) * boot.normal();
      Eigen::JacobiSVD<Matrix> nsvd(noise);
      worst = std::max(worst, nsvd.singularValues()(0));
    }
    out.noise_floor = 1.5 * worst;
  }
  Eigen::JacobiSVD<Matrix> svd(out.y0s, Eigen::ComputeThinU);
  out.singular_values = svd.singularValues();
  const double smax = out.singular_values.size() ? out.singular_values(0) : 0.0;
  const double cut = std::max(out.noise_floor, tol * smax);
  int r = 0;
  for (int i = 0; i < out.singular_values.size(); ++i)
    if (out.singular_values(i) > cut) ++r;
  out.rank = r;
  out.span = Subspace(svd.matrixU().leftCols(r), tol);
  out.subspace_noise_floor =
      r > 0 ? out.noise_floor / out.singular_values(r - 1) : 0.0;
  return out;
}

struct EstimatorResult {
  Vector s_samples;   // one estimate per physical path
  double mse = 0.0;   // mean of |S_T - f(X_T)|^2
  double mse_std_err = 0.0;
  Vector y0;
};

// Linear estimator S_T = mu(Y_0) - sum_k u_k^T dZ_k of f(X_T), evaluated on
// paths of the physical measure; reports the empirical mean-square error.
inline EstimatorResult estimator_terminal(const Model& model,
                                          const ProbabilityMeasure& mu,
                                          const AdaptedControl& control,
                                          const Vector& f, int n_paths,
                                          uint64_t seed, int threads = 0) {
  if (f.size() != model.d)
    throw DimensionMismatch("terminal function dimension mismatch");
  const TimeGrid& grid = control.grid;
  EstimatorResult out;
  if (control.is_deterministic()) {
    out.y0 = solve_backward_ode(model, control, f).y0;
  } else {
    out.y0 = solve_bsde_lsmc(model, control, f, n_paths, seed, -1.0, 8,
                             2 * static_cast<uint64_t>(n_paths)).y0;
  }
  const double s0 = mu(out.y0);
  out.s_samples.resize(n_paths);
  Vector sq(n_paths);
  parallel_for(n_paths, threads, [&](int64_t p) {
    const PathBundle b = simulate_physical_path(model, mu, grid, seed, p);
    Vector feat, u(model.m);
    double stoch = 0.0;
    for (long k = 0; k < grid.n_steps; ++k) {
      control.eval(k, b.Z.row(k), feat, u);
      stoch += u.dot(b.dZ.row(k));
    }
    const double st = s0 - stoch;
    out.s_samples(p) = st;
    const double dev = st - f(b.states[grid.n_steps]);
    sq(p) = dev * dev;
  });
  out.mse = sq.mean();
  const double var = (sq.array() - out.mse).square().sum() / (n_paths - 1);
  out.mse_std_err = std::sqrt(var / n_paths);
  return out;
}

}  // namespace dualscope
