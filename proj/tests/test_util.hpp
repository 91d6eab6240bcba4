// Shared fixtures and generators for the test suites.
#pragma once

#include <string>
#include <vector>

#include "dualscope/dualscope.hpp"

namespace testutil {

using dualscope::Matrix;
using dualscope::Model;
using dualscope::Vector;

// Two-state symmetric chain with sign observation; observable, and the
// classical linear rank test fails on it (AH is collinear with H).
inline Model m1() {
  Matrix A(2, 2), H(2, 1);
  A << -1, 1, 1, -1;
  H << 1, -1;
  return dualscope::validate_model(A, H);
}

// Three-state chain whose first two states share the observation value; the
// closure stalls at span{1, h}.
inline Model m2() {
  Matrix A(3, 3), H(3, 1);
  A << -1, 0, 1, 0, -1, 1, 0.5, 0.5, -1;
  H << 1, 1, 0;
  return dualscope::validate_model(A, H);
}

// Frozen chain (A = 0) with a colliding observation pair.
inline Model m3() {
  Matrix A = Matrix::Zero(3, 3), H(3, 1);
  H << 1, 1, 2;
  return dualscope::validate_model(A, H);
}

// Frozen chain with pairwise-distinct observations; the closure fills R^3
// through the Vandermonde powers of h.
inline Model m4() {
  Matrix A = Matrix::Zero(3, 3), H(3, 1);
  H << 0, 1, 2;
  return dualscope::validate_model(A, H);
}

inline std::string models_dir() {
#ifdef DUALSCOPE_MODELS_DIR
  return DUALSCOPE_MODELS_DIR;
#else
  return "models";
#endif
}

// Random valid generator: off-diagonal rates U(0, 2) with some entries
// zeroed, diagonal set to minus the row sum.
inline Matrix random_generator(dualscope::rng::Stream& stream, int d) {
  Matrix A = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    double row = 0.0;
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      const double keep = stream.uniform();
      const double rate = keep < 0.3 ? 0.0 : 2.0 * stream.uniform();
      A(i, j) = rate;
      row += rate;
    }
    A(i, i) = -row;
  }
  return A;
}

inline Model random_model(dualscope::rng::Stream& stream, int d, int m,
                          bool distinct_rows = false) {
  const Matrix A = random_generator(stream, d);
  Matrix H(d, m);
  for (;;) {
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < m; ++c) H(i, c) = stream.normal();
    if (!distinct_rows) break;
    double min_gap = 1e300;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        min_gap = std::min(min_gap, (H.row(i) - H.row(j)).norm());
    if (min_gap > 0.1) break;
  }
  return dualscope::validate_model(A, H);
}

// Random point on the probability simplex with a floor on each entry.
inline Vector random_simplex(dualscope::rng::Stream& stream, int d,
                             double floor = 0.02) {
  Vector w(d);
  double total = 0.0;
  for (int i = 0; i < d; ++i) {
    w(i) = floor - std::log(stream.uniform());
    total += w(i);
  }
  return w / total;
}

// Upper 99% chi-square quantiles for 1..8 degrees of freedom.
inline double chi2_99(int dof) {
  static const double q[] = {6.635, 9.210, 11.345, 13.277,
                             15.086, 16.812, 18.475, 20.090};
  return q[dof - 1];
}

}  // namespace testutil
