// Dense linear-algebra utilities: scaling-and-squaring matrix exponential,
// SVD-based numerical rank, orthonormal complements, and an incremental
// Gram-Schmidt basis used by the closure algorithms.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dualscope/types.hpp"

namespace dualscope {

namespace detail {

// Pade approximant of degree 3/5/7/9 on an unscaled argument.
inline Matrix expm_pade_small(const Matrix& A, int degree) {
  static const std::vector<std::vector<double>> coeffs = {
      {120, 60, 12, 1},
      {30240, 15120, 3360, 420, 30, 1},
      {17297280, 8648640, 1995840, 277200, 25200, 1512, 56, 1},
      {17643225600, 8821612800, 2075673600, 302702400, 30270240, 2162160,
       110880, 3960, 90, 1}};
  const std::vector<double>& b = coeffs[(degree - 3) / 2];
  const int n = static_cast<int>(A.rows());
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = A * A;
  // Even/odd split: U = A * sum b_{2k+1} A^{2k}, V = sum b_{2k} A^{2k}.
  Matrix Ueven = b[1] * I;
  Matrix V = b[0] * I;
  Matrix P = I;
  for (int k = 1; 2 * k <= degree; ++k) {
    P = P * A2;
    V.noalias() += b[2 * k] * P;
    if (2 * k + 1 <= degree) Ueven.noalias() += b[2 * k + 1] * P;
  }
  const Matrix U = A * Ueven;
  return (V - U).partialPivLu().solve(V + U);
}

inline Matrix expm_pade13(const Matrix& A) {
  static const double b[] = {64764752532480000.0,
                             32382376266240000.0,
                             7771770303897600.0,
                             1187353796428800.0,
                             129060195264000.0,
                             10559470521600.0,
                             670442572800.0,
                             33522128640.0,
                             1323241920.0,
                             40840800.0,
                             960960.0,
                             16380.0,
                             182.0,
                             1.0};
  const int n = static_cast<int>(A.rows());
  const Matrix I = Matrix::Identity(n, n);
  const Matrix A2 = A * A;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;
  const Matrix U =
      A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 +
           b[3] * A2 + b[1] * I);
  const Matrix V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 +
                   b[4] * A4 + b[2] * A2 + b[0] * I;
  return (V - U).partialPivLu().solve(V + U);
}

}  // namespace detail

// exp(M t) by scaling and squaring with Pade cores (Higham's degree and
// scaling selection). Arguments with 1-norm above 1e4 are rejected.
inline Matrix matrix_exponential(const Matrix& M, double t) {
  if (M.rows() != M.cols())
    throw DimensionMismatch("matrix exponential needs a square matrix");
  Matrix A = M * t;
  if (!A.allFinite())
    throw NotFinite("matrix exponential argument must be finite");
  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 > 1e4)
    throw OverflowError("matrix exponential argument has 1-norm " +
                        std::to_string(norm1) + " > 1e4");
  constexpr double theta3 = 1.495585217958292e-2;
  constexpr double theta5 = 2.539398330063230e-1;
  constexpr double theta7 = 9.504178996162932e-1;
  constexpr double theta9 = 2.097847961257068e0;
  constexpr double theta13 = 5.371920351148152e0;
  if (norm1 <= theta3) return detail::expm_pade_small(A, 3);
  if (norm1 <= theta5) return detail::expm_pade_small(A, 5);
  if (norm1 <= theta7) return detail::expm_pade_small(A, 7);
  if (norm1 <= theta9) return detail::expm_pade_small(A, 9);
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    A /= std::ldexp(1.0, squarings);
  }
  Matrix F = detail::expm_pade13(A);
  for (int s = 0; s < squarings; ++s) F = F * F;
  return F;
}

struct RankResult {
  int rank = 0;
  Subspace space;
};

// Rank and orthonormal column basis of the span of `columns` (one vector per
// column). Singular values below tol * sigma_max are treated as zero.
inline RankResult numerical_rank(const Matrix& columns,
                                 double tol = kDefaultRankTol) {
  if (columns.cols() == 0 || columns.rows() == 0)
    throw DimensionMismatch("numerical_rank needs a nonempty set of vectors");
  if (!columns.allFinite())
    throw NotFinite("numerical_rank input must be finite");
  Eigen::JacobiSVD<Matrix> svd(columns, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  RankResult out;
  out.space.tol = tol;
  if (smax <= 0.0) {
    out.space.basis = Matrix(columns.rows(), 0);
    return out;
  }
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) >= tol * smax) ++r;
  out.rank = r;
  out.space.basis = svd.matrixU().leftCols(r);
  return out;
}

inline RankResult numerical_rank(const std::vector<Vector>& vectors,
                                 double tol = kDefaultRankTol) {
  if (vectors.empty())
    throw DimensionMismatch("numerical_rank needs a nonempty set of vectors");
  Matrix cols(vectors.front().size(), vectors.size());
  for (size_t i = 0; i < vectors.size(); ++i) cols.col(i) = vectors[i];
  return numerical_rank(cols, tol);
}

// Orthonormal basis of the orthogonal complement of `space` in R^d.
inline Subspace orthogonal_complement(const Subspace& space, int d) {
  if (space.dim() == 0) return Subspace(Matrix::Identity(d, d), space.tol);
  Eigen::JacobiSVD<Matrix> svd(space.basis, Eigen::ComputeFullU);
  return Subspace(svd.matrixU().rightCols(d - space.dim()), space.tol);
}

// Largest residual of either basis against the other span; 0 iff the two
// subspaces coincide.
inline double mutual_subspace_residual(const Subspace& a, const Subspace& b) {
  double worst = 0.0;
  for (int j = 0; j < a.dim(); ++j)
    worst = std::max(worst, b.residual(a.basis.col(j)));
  for (int j = 0; j < b.dim(); ++j)
    worst = std::max(worst, a.residual(b.basis.col(j)));
  return worst;
}

// Growing orthonormal basis with re-orthogonalized Gram-Schmidt admission.
class IncrementalBasis {
 public:
  explicit IncrementalBasis(int ambient_dim)
      : basis_(ambient_dim, 0) {}

  // Admits g if its residual against the current span exceeds
  // tol * max(1, |g|); returns true when a new direction was added.
  bool admit(const Vector& g, double tol) {
    const double scale = std::max(1.0, g.norm());
    Vector r = g;
    if (basis_.cols() > 0) {
      r.noalias() -= basis_ * (basis_.transpose() * g);
      r.noalias() -= basis_ * (basis_.transpose() * r);
    }
    const double rn = r.norm();
    if (rn <= tol * scale) return false;
    basis_.conservativeResize(Eigen::NoChange, basis_.cols() + 1);
    basis_.col(basis_.cols() - 1) = r / rn;
    return true;
  }

  int dim() const { return static_cast<int>(basis_.cols()); }
  const Matrix& basis() const { return basis_; }
  Vector direction(int j) const { return basis_.col(j); }

 private:
  Matrix basis_;
};

}  // namespace dualscope
