// Core domain types for finite-state hidden Markov models (A, H) with
// additive Gaussian observation noise, plus the shared error taxonomy.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dualscope {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonSquareGenerator : Error { using Error::Error; };
struct RowSumViolation : Error {
  int row;
  double residual;
  RowSumViolation(int r, double res)
      : Error("generator row " + std::to_string(r) + " sums to " +
              std::to_string(res) + ", expected 0"),
        row(r),
        residual(res) {}
};
struct NegativeOffDiagonal : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct NotFinite : Error { using Error::Error; };
struct OverflowError : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };
struct NotInjective : Error { using Error::Error; };
struct DegenerateMass : Error { using Error::Error; };
struct ZeroMass : Error { using Error::Error; };
struct ExcessiveClamping : Error { using Error::Error; };
struct SingularRegression : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Tolerances
// ---------------------------------------------------------------------------

inline constexpr double kRowSumTol = 1e-12;       // generator row sums
inline constexpr double kMeasureTol = 1e-12;      // probability mass deficit
inline constexpr double kDefaultRankTol = 1e-9;   // relative singular-value cut
inline constexpr double kDistinctRowTol = 1e-12;  // H-row collision test

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

// Finite-state model (A, H). The generator A acts on functions,
// (A f)_i = sum_j A_ij f_j, has nonnegative off-diagonal rates and zero row
// sums, so exp(At) is row-stochastic and constants are preserved. Row i of H
// is the observation vector attached to state i.
struct Model {
  int d = 0;  // number of states
  int m = 0;  // observation channels
  Matrix A;   // d x d rate matrix
  Matrix H;   // d x m observation matrix
  std::vector<std::string> labels;  // optional state names (empty or size d)

  Vector ones() const { return Vector::Ones(d); }
};

inline Model validate_model(const Matrix& A, const Matrix& H,
                            std::vector<std::string> labels = {}) {
  if (A.rows() != A.cols())
    throw NonSquareGenerator("generator must be square, got " +
                             std::to_string(A.rows()) + "x" +
                             std::to_string(A.cols()));
  const int d = static_cast<int>(A.rows());
  if (d < 1) throw DimensionMismatch("generator must have at least one state");
  if (H.rows() != d)
    throw DimensionMismatch("observation matrix has " +
                            std::to_string(H.rows()) + " rows, generator has " +
                            std::to_string(d));
  const int m = static_cast<int>(H.cols());
  if (m < 1)
    throw DimensionMismatch("observation matrix needs at least one column");
  if (!A.allFinite() || !H.allFinite())
    throw NotFinite("model matrices must have finite entries");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && A(i, j) < 0.0)
        throw NegativeOffDiagonal("rate A(" + std::to_string(i) + "," +
                                  std::to_string(j) + ") = " +
                                  std::to_string(A(i, j)) + " is negative");
  int worst_row = 0;
  double worst = 0.0;
  for (int i = 0; i < d; ++i) {
    const double s = A.row(i).sum();
    if (std::abs(s) > std::abs(worst)) {
      worst = s;
      worst_row = i;
    }
  }
  if (std::abs(worst) > kRowSumTol) throw RowSumViolation(worst_row, worst);
  if (!labels.empty() && static_cast<int>(labels.size()) != d)
    throw DimensionMismatch("expected " + std::to_string(d) +
                            " state labels, got " +
                            std::to_string(labels.size()));
  Model md;
  md.d = d;
  md.m = m;
  md.A = A;
  md.H = H;
  md.labels = std::move(labels);
  return md;
}

// ---------------------------------------------------------------------------
// Measures
// ---------------------------------------------------------------------------

// Signed measure on the d states; pairs with functions by mu(f) = sum mu_i f_i.
struct SignedMeasure {
  Vector weights;

  SignedMeasure() = default;
  explicit SignedMeasure(Vector w) : weights(std::move(w)) {
    if (!weights.allFinite())
      throw NotFinite("signed measure must have finite entries");
  }

  int dim() const { return static_cast<int>(weights.size()); }
  double mass() const { return weights.sum(); }
  double operator()(const Vector& f) const { return weights.dot(f); }
};

struct ProbabilityMeasure {
  Vector weights;

  ProbabilityMeasure() = default;
  explicit ProbabilityMeasure(Vector w) : weights(std::move(w)) {
    if (!weights.allFinite())
      throw NotFinite("probability measure must have finite entries");
    if ((weights.array() < 0.0).any())
      throw ConfigError("probability measure has a negative entry");
    const double mass = weights.sum();
    if (std::abs(mass - 1.0) > kMeasureTol)
      throw ConfigError("probability measure mass is " + std::to_string(mass) +
                        ", expected 1");
  }

  int dim() const { return static_cast<int>(weights.size()); }
  double operator()(const Vector& f) const { return weights.dot(f); }
  SignedMeasure as_signed() const { return SignedMeasure(weights); }
};

// ---------------------------------------------------------------------------
// Subspace
// ---------------------------------------------------------------------------

// Orthonormal basis of a subspace of R^d, columns of `basis`. `tol` records
// the relative singular-value threshold used to build it.
struct Subspace {
  Matrix basis;  // d x r, orthonormal columns (r may be 0)
  double tol = kDefaultRankTol;

  Subspace() = default;
  Subspace(Matrix b, double t) : basis(std::move(b)), tol(t) {}

  int dim() const { return static_cast<int>(basis.cols()); }
  int ambient_dim() const { return static_cast<int>(basis.rows()); }

  // Norm of the component of v orthogonal to the subspace.
  double residual(const Vector& v) const {
    if (dim() == 0) return v.norm();
    return (v - basis * (basis.transpose() * v)).norm();
  }

  bool contains(const Vector& v, double eps) const {
    return residual(v) <= eps * std::max(1.0, v.norm());
  }
};

// ---------------------------------------------------------------------------
// Time grid
// ---------------------------------------------------------------------------

// Uniform grid t_k = k*dt, k = 0..n_steps. The horizon is snapped to the
// nearest multiple of dt; the originally requested value is kept for records.
struct TimeGrid {
  double dt = 0.0;
  long n_steps = 0;
  double requested_horizon = 0.0;

  static TimeGrid make(double T, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt))
      throw ConfigError("time step must be positive and finite");
    if (!(T > 0.0) || !std::isfinite(T))
      throw ConfigError("horizon must be positive and finite");
    TimeGrid g;
    g.dt = dt;
    g.n_steps = std::max(1L, std::lround(T / dt));
    g.requested_horizon = T;
    return g;
  }

  double horizon() const { return dt * static_cast<double>(n_steps); }
  double time(long k) const { return dt * static_cast<double>(k); }
  long points() const { return n_steps + 1; }
};

}  // namespace dualscope
