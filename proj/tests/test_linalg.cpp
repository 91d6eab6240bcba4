#include <gtest/gtest.h>

#include <cmath>

#include "dualscope/linalg.hpp"
#include "test_util.hpp"

namespace ds = dualscope;

TEST(MatrixExponential, ZeroTimeGivesIdentity) {
  ds::rng::Stream stream(7, 0);
  ds::Matrix M(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) M(i, j) = stream.normal();
  const ds::Matrix E = ds::matrix_exponential(M, 0.0);
  EXPECT_LT((E - ds::Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
}

// Eigenvalues of the symmetric two-state generator are 0 and -2, so the
// exponential has the closed form (1 +- e^{-2t}) / 2.
TEST(MatrixExponential, TwoStateClosedForm) {
  const ds::Model md = testutil::m1();
  for (double t : {0.1, 0.7, 1.0, 3.5}) {
    const ds::Matrix E = ds::matrix_exponential(md.A, t);
    const double a = 0.5 * (1 + std::exp(-2 * t));
    const double b = 0.5 * (1 - std::exp(-2 * t));
    ds::Matrix expected(2, 2);
    expected << a, b, b, a;
    EXPECT_LT((E - expected).cwiseAbs().maxCoeff(), 1e-12) << "t=" << t;
  }
}

TEST(MatrixExponential, GeneratorRowsSumToOne) {
  ds::rng::Stream stream(11, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + static_cast<int>(stream.uniform() * 7);
    const ds::Matrix A = testutil::random_generator(stream, d);
    for (double t : {0.1, 0.7, 1.0, 10.0}) {
      const ds::Vector rowsums =
          ds::matrix_exponential(A, t) * ds::Vector::Ones(d);
      EXPECT_LT((rowsums.array() - 1.0).abs().maxCoeff(), 1e-10);
    }
  }
}

TEST(MatrixExponential, SemigroupProperty) {
  ds::rng::Stream stream(13, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + static_cast<int>(stream.uniform() * 7);
    const ds::Matrix A = testutil::random_generator(stream, d);
    const double s = 0.3 + stream.uniform();
    const double t = 0.2 + stream.uniform();
    const ds::Matrix lhs = ds::matrix_exponential(A, s + t);
    const ds::Matrix rhs =
        ds::matrix_exponential(A, s) * ds::matrix_exponential(A, t);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(MatrixExponential, RejectsHugeArguments) {
  ds::Matrix M(1, 1);
  M << 2e4;
  EXPECT_THROW(ds::matrix_exponential(M, 1.0), ds::OverflowError);
  EXPECT_NO_THROW(ds::matrix_exponential(M, 1e-4));
}

TEST(NumericalRank, Examples) {
  ds::Matrix id2(2, 2);
  id2 << 1, 0, 0, 1;
  EXPECT_EQ(ds::numerical_rank(id2).rank, 2);

  ds::Matrix collinear(3, 2);
  collinear << 1, 2, 1, 2, 0, 0;
  EXPECT_EQ(ds::numerical_rank(collinear).rank, 1);

  ds::Matrix ones_and_h(2, 2);
  ones_and_h << 1, 1, 1, -1;
  EXPECT_EQ(ds::numerical_rank(ones_and_h).rank, 2);

  EXPECT_EQ(ds::numerical_rank(ds::Matrix::Zero(3, 4)).rank, 0);
  EXPECT_EQ(ds::numerical_rank(ds::Matrix::Zero(3, 4)).space.dim(), 0);
}

TEST(NumericalRank, InvariantUnderPermutationAndScaling) {
  ds::rng::Stream stream(17, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 3 + static_cast<int>(stream.uniform() * 4);
    const int n = 2 + static_cast<int>(stream.uniform() * 5);
    ds::Matrix cols(d, n);
    for (int j = 0; j < n; ++j) {
      if (j >= 2 && stream.uniform() < 0.4) {
        // make some columns dependent on earlier ones
        cols.col(j) = cols.col(j - 1) - 2.0 * cols.col(j - 2);
      } else {
        for (int i = 0; i < d; ++i) cols(i, j) = stream.normal();
      }
    }
    const int base = ds::numerical_rank(cols).rank;

    ds::Matrix shuffled(d, n);
    std::vector<int> perm(n);
    for (int j = 0; j < n; ++j) perm[j] = j;
    for (int j = n - 1; j > 0; --j)
      std::swap(perm[j], perm[static_cast<int>(stream.uniform() * (j + 1))]);
    for (int j = 0; j < n; ++j) {
      double scale = 0.0;
      while (std::abs(scale) < 1e-3) scale = 4.0 * (stream.uniform() - 0.5);
      shuffled.col(j) = scale * cols.col(perm[j]);
    }
    EXPECT_EQ(ds::numerical_rank(shuffled).rank, base);
  }
}

TEST(Subspace, BasisIsOrthonormalAndComplementFills) {
  ds::rng::Stream stream(19, 0);
  ds::Matrix cols(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) cols(i, j) = stream.normal();
  const ds::Subspace s = ds::numerical_rank(cols).space;
  const ds::Matrix gram = s.basis.transpose() * s.basis;
  EXPECT_LT((gram - ds::Matrix::Identity(s.dim(), s.dim()))
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
  const ds::Subspace comp = ds::orthogonal_complement(s, 5);
  EXPECT_EQ(comp.dim() + s.dim(), 5);
  EXPECT_LT((comp.basis.transpose() * s.basis).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(IncrementalBasis, AdmitsOnlyNewDirections) {
  ds::IncrementalBasis basis(3);
  ds::Vector a(3), b(3), c(3);
  a << 1, 1, 1;
  b << 2, 2, 2;
  c << 1, 0, 0;
  EXPECT_TRUE(basis.admit(a, 1e-9));
  EXPECT_FALSE(basis.admit(b, 1e-9));
  EXPECT_TRUE(basis.admit(c, 1e-9));
  EXPECT_EQ(basis.dim(), 2);
}
