// Algebraic observability tests for the finite-state model (A, H): the
// generator-closure construction, the classical linear rank test, the
// injective-observation sufficient condition, and extraction of the
// unobservable directions.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dualscope/linalg.hpp"
#include "dualscope/rng.hpp"
#include "dualscope/types.hpp"

namespace dualscope {

// Smallest subspace of R^d that contains the constant vector and is closed
// under g -> A g and g -> g .* H_col. Breadth-first expansion over an
// orthonormal basis: each admitted direction is dequeued once and its images
// under the generators are tested for admission. The result spans the set of
// values reachable by the dual backward dynamics.
inline Subspace nonlinear_closure(const Model& model,
                                  double tol = kDefaultRankTol) {
  IncrementalBasis basis(model.d);
  std::deque<int> pending;  // indices of admitted, not yet expanded directions
  basis.admit(model.ones(), tol);
  pending.push_back(0);
  while (!pending.empty() && basis.dim() < model.d) {
    const Vector g = basis.direction(pending.front());
    pending.pop_front();
    Vector child = model.A * g;
    if (basis.admit(child, tol)) pending.push_back(basis.dim() - 1);
    for (int c = 0; c < model.m && basis.dim() < model.d; ++c) {
      child = g.cwiseProduct(model.H.col(c));
      if (basis.admit(child, tol)) pending.push_back(basis.dim() - 1);
    }
  }
  return Subspace(basis.basis(), tol);
}

// Literal enumeration oracle: every word of length <= depth in the alphabet
// {A, .*H_col} applied to the constant vector, then one SVD rank. Vectors are
// normalized as generated so the rank cut is scale-free.
inline Subspace brute_force_closure(const Model& model, int depth,
                                    double tol = kDefaultRankTol) {
  if (depth < 1) throw ConfigError("brute-force depth must be >= 1");
  double projected = 1.0;
  double level_size = 1.0;
  for (int l = 1; l <= depth; ++l) {
    level_size *= static_cast<double>(1 + model.m);
    projected += level_size;
  }
  if (projected > 1e6)
    throw BudgetExceeded("brute-force enumeration would generate " +
                         std::to_string(static_cast<long long>(projected)) +
                         " vectors");
  std::vector<Vector> all;
  std::vector<Vector> level;
  level.push_back(model.ones().normalized());
  all.push_back(level.front());
  for (int l = 1; l <= depth; ++l) {
    std::vector<Vector> next;
    next.reserve(level.size() * (1 + model.m));
    for (const Vector& g : level) {
      Vector child = model.A * g;
      double n = child.norm();
      if (n > 0.0) {
        next.push_back(child / n);
        all.push_back(next.back());
      }
      for (int c = 0; c < model.m; ++c) {
        child = g.cwiseProduct(model.H.col(c));
        n = child.norm();
        if (n > 0.0) {
          next.push_back(child / n);
          all.push_back(next.back());
        }
      }
    }
    level.swap(next);
    if (level.empty()) break;
  }
  return numerical_rank(all, tol).space;
}

// Span of the columns of H, AH, ..., A^{d-1} H (A acting on functions), the
// rank test of linear systems theory in the same convention as the closure.
inline Subspace linear_observability(const Model& model,
                                     double tol = kDefaultRankTol) {
  Matrix cols(model.d, model.d * model.m);
  Matrix P = model.H;
  for (int k = 0; k < model.d; ++k) {
    for (int c = 0; c < model.m; ++c) {
      Vector v = P.col(c);
      const double n = v.norm();
      cols.col(k * model.m + c) = n > 0.0 ? Vector(v / n) : v;
    }
    if (k + 1 < model.d) P = model.A * P;
  }
  return numerical_rank(cols, tol).space;
}

struct InjectivityResult {
  bool injective = true;
  std::vector<std::pair<int, int>> colliding_pairs;  // (i, j) with i < j
};

// The observation map is injective iff the rows of H are pairwise distinct.
inline InjectivityResult injectivity_check(const Model& model) {
  InjectivityResult out;
  for (int i = 0; i < model.d; ++i)
    for (int j = i + 1; j < model.d; ++j) {
      bool equal = true;
      for (int c = 0; c < model.m; ++c)
        if (std::abs(model.H(i, c) - model.H(j, c)) > kDistinctRowTol) {
          equal = false;
          break;
        }
      if (equal) {
        out.injective = false;
        out.colliding_pairs.emplace_back(i, j);
      }
    }
  return out;
}

// A direction a such that the entries of H a are pairwise distinct. Tries the
// canonical axes first, then seeded random unit vectors; outside finitely
// many hyperplanes every direction works, so the search terminates quickly.
inline Vector collapse_vector(const Model& model, uint64_t seed = 12345) {
  if (!injectivity_check(model).injective)
    throw NotInjective("observation rows collide; no collapse vector exists");
  const auto distinct = [&](const Vector& a) {
    const Vector ha = model.H * a;
    const double scale = ha.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) return model.d == 1;
    double min_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < model.d; ++i)
      for (int j = i + 1; j < model.d; ++j)
        min_gap = std::min(min_gap, std::abs(ha(i) - ha(j)));
    return model.d == 1 || min_gap > 1e-9 * scale;
  };
  for (int c = 0; c < model.m; ++c) {
    Vector a = Vector::Zero(model.m);
    a(c) = 1.0;
    if (distinct(a)) return a;
  }
  rng::Stream stream(seed, 0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vector a(model.m);
    for (int c = 0; c < model.m; ++c) a(c) = stream.normal();
    const double n = a.norm();
    if (n == 0.0) continue;
    a /= n;
    if (distinct(a)) return a;
  }
  throw Error("collapse vector search exhausted 1000 random draws");
}

// Orthogonal complement of the closure: the signed measures that pair to
// zero with every reachable value. Empty exactly when the model is
// observable; every member is automatically orthogonal to the constant.
inline Subspace unobservable_directions(const Model& model,
                                        double tol = kDefaultRankTol) {
  return orthogonal_complement(nonlinear_closure(model, tol), model.d);
}

struct ObservabilityReport {
  bool observable = false;
  int closure_dim = 0;
  Subspace closure_basis;
  int linear_dim = 0;
  Subspace linear_basis;
  bool injective = true;
  std::vector<std::pair<int, int>> colliding_pairs;
  Subspace unobservable_basis;
  double tol = kDefaultRankTol;
};

inline ObservabilityReport analyze(const Model& model,
                                   double tol = kDefaultRankTol) {
  ObservabilityReport report;
  report.tol = tol;
  report.closure_basis = nonlinear_closure(model, tol);
  report.closure_dim = report.closure_basis.dim();
  report.observable = report.closure_dim == model.d;
  report.linear_basis = linear_observability(model, tol);
  report.linear_dim = report.linear_basis.dim();
  const InjectivityResult inj = injectivity_check(model);
  report.injective = inj.injective;
  report.colliding_pairs = inj.colliding_pairs;
  report.unobservable_basis =
      orthogonal_complement(report.closure_basis, model.d);
  return report;
}

}  // namespace dualscope
