// Euler-Maruyama propagation of the unnormalized conditional measure, its
// normalized counterpart, the fundamental matrix of the same recursion, and
// the normalization-constant identity check.
//
// One step of the vector recursion:
//   sigma_{k+1} = sigma_k + dt * A^T sigma_k + sum_c H_col(c) .* sigma_k dZ_k^c
// In probability mode the state is renormalized every step (the removed mass
// accumulates in log_norm) and discretization negatives are clamped to zero;
// in signed mode the raw linear recursion runs untouched.
#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "dualscope/simulate.hpp"
#include "dualscope/types.hpp"

namespace dualscope {

enum class ZakaiMode { auto_detect, probability, signed_measure };

struct FilterTrajectory {
  TimeGrid grid;
  Matrix sigma;          // (n_steps + 1) x d, row k = filter state at t_k
  Matrix pi;             // normalized rows (probability mode only, else 0x0)
  Vector log_norm;       // accumulated log of removed mass
  long clamp_events = 0; // steps on which a negative component was clamped
  bool probability_mode = true;
};

namespace detail {

template <class RowT>
inline void zakai_vector_step(const Matrix& At, const Matrix& H, double dt,
                              const RowT& dZ, Vector& s, Vector& scratch) {
  scratch.noalias() = At * s;
  scratch *= dt;
  scratch += s;
  for (int c = 0; c < H.cols(); ++c)
    scratch.noalias() += dZ(c) * H.col(c).cwiseProduct(s);
  s.swap(scratch);
}

template <class RowT>
inline void zakai_matrix_step(const Matrix& At, const Matrix& H, double dt,
                              const RowT& dZ, Matrix& phi, Matrix& scratch) {
  scratch.noalias() = At * phi;
  scratch *= dt;
  scratch += phi;
  for (int c = 0; c < H.cols(); ++c)
    scratch.noalias() += dZ(c) * H.col(c).asDiagonal() * phi;
  phi.swap(scratch);
}

}  // namespace detail

inline FilterTrajectory propagate_zakai(const Model& model,
                                        const SignedMeasure& pi0,
                                        const TimeGrid& grid, const Matrix& dZ,
                                        ZakaiMode mode = ZakaiMode::auto_detect) {
  if (pi0.dim() != model.d)
    throw DimensionMismatch("initial measure dimension mismatch");
  if (dZ.rows() != grid.n_steps || dZ.cols() != model.m)
    throw DimensionMismatch("observation increments do not match the grid");
  if (mode == ZakaiMode::auto_detect)
    mode = (pi0.weights.array() >= 0.0).all() ? ZakaiMode::probability
                                              : ZakaiMode::signed_measure;
  const bool prob = mode == ZakaiMode::probability;
  if (prob && !(pi0.weights.array() >= 0.0).all())
    throw ConfigError("probability mode needs a nonnegative initial measure");

  FilterTrajectory out;
  out.grid = grid;
  out.probability_mode = prob;
  out.sigma.resize(grid.points(), model.d);
  out.log_norm = Vector::Zero(grid.points());
  if (prob) out.pi.resize(grid.points(), model.d);

  const Matrix At = model.A.transpose();
  Vector s = pi0.weights;
  Vector scratch(model.d);
  out.sigma.row(0) = s;
  if (prob) {
    const double mass0 = s.sum();
    if (mass0 < 1e-300) throw DegenerateMass("initial mass is zero");
    out.pi.row(0) = s / mass0;
  }
  for (long k = 0; k < grid.n_steps; ++k) {
    detail::zakai_vector_step(At, model.H, grid.dt, dZ.row(k), s,
                              scratch);
    if (prob) {
      bool clamped = false;
      for (int i = 0; i < model.d; ++i)
        if (s(i) < 0.0) {
          s(i) = 0.0;
          clamped = true;
        }
      if (clamped) ++out.clamp_events;
      const double mass = s.sum();
      if (mass < 1e-300)
        throw DegenerateMass("filter mass vanished at step " +
                             std::to_string(k + 1));
      out.log_norm(k + 1) = out.log_norm(k) + std::log(mass);
      s /= mass;
      out.pi.row(k + 1) = s / s.sum();
    }
    out.sigma.row(k + 1) = s;
  }
  if (prob && out.clamp_events > std::max(1.0, 1e-3 * double(grid.n_steps)))
    throw ExcessiveClamping("negativity clamped on " +
                            std::to_string(out.clamp_events) + " of " +
                            std::to_string(grid.n_steps) + " steps");
  return out;
}

inline FilterTrajectory propagate_zakai(const Model& model,
                                        const SignedMeasure& pi0,
                                        const PathBundle& path,
                                        ZakaiMode mode = ZakaiMode::auto_detect) {
  return propagate_zakai(model, pi0, path.grid, path.dZ, mode);
}

// Row-wise normalization of an unnormalized trajectory.
inline Matrix normalize(const Matrix& sigma_path) {
  Matrix pi(sigma_path.rows(), sigma_path.cols());
  for (long k = 0; k < sigma_path.rows(); ++k) {
    const double mass = sigma_path.row(k).sum();
    if (!(mass > 0.0))
      throw ZeroMass("trajectory has nonpositive mass at grid point " +
                     std::to_string(k));
    pi.row(k) = sigma_path.row(k) / mass;
  }
  return pi;
}

struct FundamentalMatrixPath {
  TimeGrid grid;
  std::vector<Matrix> Phi;  // Phi[k] maps an initial measure to sigma at t_k
};

// Matrix flow of the signed recursion from the identity; columns are the
// flows of the canonical point masses, so sigma(mu) = Phi * mu by linearity.
inline FundamentalMatrixPath propagate_fundamental(const Model& model,
                                                   const TimeGrid& grid,
                                                   const Matrix& dZ) {
  if (dZ.rows() != grid.n_steps || dZ.cols() != model.m)
    throw DimensionMismatch("observation increments do not match the grid");
  FundamentalMatrixPath out;
  out.grid = grid;
  out.Phi.reserve(grid.points());
  const Matrix At = model.A.transpose();
  Matrix phi = Matrix::Identity(model.d, model.d);
  Matrix scratch(model.d, model.d);
  out.Phi.push_back(phi);
  for (long k = 0; k < grid.n_steps; ++k) {
    detail::zakai_matrix_step(At, model.H, grid.dt, dZ.row(k), phi,
                              scratch);
    if (phi.cwiseAbs().maxCoeff() > 1e300)
      throw OverflowError(
          "fundamental matrix overflow; shorten the horizon or use the "
          "renormalized filter");
    out.Phi.push_back(phi);
  }
  return out;
}

// Max over paths and grid points of |sigma_k(1) - mass_0 - sum_{j<k}
// (sigma_j . H)^T dZ_j| for the signed recursion driven by reference noise.
// The discrete recursion satisfies the identity exactly, so the residual
// measures accumulated floating-point noise only.
inline double mass_identity_check(const Model& model,
                                  const ProbabilityMeasure& mu,
                                  const TimeGrid& grid,
                                  const std::vector<Matrix>& dZ_paths) {
  if (mu.dim() != model.d)
    throw DimensionMismatch("initial measure dimension mismatch");
  const Matrix At = model.A.transpose();
  double worst = 0.0;
  for (const Matrix& dZ : dZ_paths) {
    if (dZ.rows() != grid.n_steps || dZ.cols() != model.m)
      throw DimensionMismatch("observation increments do not match the grid");
    Vector s = mu.weights;
    Vector scratch(model.d);
    const double base = s.sum();
    double integral = 0.0;
    for (long k = 0; k < grid.n_steps; ++k) {
      for (int c = 0; c < model.m; ++c)
        integral += s.dot(model.H.col(c)) * dZ(k, c);
      detail::zakai_vector_step(At, model.H, grid.dt, dZ.row(k), s,
                                scratch);
      worst = std::max(worst, std::abs(s.sum() - base - integral));
    }
  }
  return worst;
}

inline double mass_identity_check(const Model& model,
                                  const ProbabilityMeasure& mu,
                                  const TimeGrid& grid, int n_paths,
                                  uint64_t seed) {
  std::vector<Matrix> paths;
  paths.reserve(n_paths);
  for (int p = 0; p < n_paths; ++p)
    paths.push_back(
        sample_reference_brownian(grid, model.m, seed, 2 * p + 1).second);
  return mass_identity_check(model, mu, grid, paths);
}

}  // namespace dualscope
