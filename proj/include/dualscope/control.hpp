// Adapted control signals: deterministic per-step tables, or feedback rules
// that read a quadratic feature library of the current observation value.
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dualscope/types.hpp"

namespace dualscope {

// Feature library evaluated at one observation value z in R^m:
// [1, z_1..z_m, z_c * z_c' for c <= c']. With clip > 0 every feature is
// clamped into [-clip, clip] before use.
struct FeatureBasis {
  int m = 1;

  int count() const { return 1 + m + m * (m + 1) / 2; }

  template <class RowT>
  void eval(const RowT& z, double clip, Vector& out) const {
    out.resize(count());
    int idx = 0;
    out(idx++) = 1.0;
    for (int c = 0; c < m; ++c) out(idx++) = z(c);
    for (int c = 0; c < m; ++c)
      for (int cc = c; cc < m; ++cc) out(idx++) = z(c) * z(cc);
    if (clip > 0.0)
      for (int i = 0; i < out.size(); ++i)
        out(i) = std::clamp(out(i), -clip, clip);
  }
};

// Control rule on the observation filtration: at step k it may read the path
// only through the current observation value, so adaptedness holds by
// construction.
struct AdaptedControl {
  enum class Kind { deterministic, feedback };

  Kind kind = Kind::deterministic;
  TimeGrid grid;
  int m = 1;
  Matrix table;                // n_steps x m (deterministic)
  std::vector<Matrix> thetas;  // feature_count x m; size 1 or n_steps
  double clip = 5.0;
  std::string description;

  static AdaptedControl constant(const TimeGrid& grid, const Vector& u) {
    if (!u.allFinite()) throw NotFinite("control values must be finite");
    AdaptedControl c;
    c.kind = Kind::deterministic;
    c.grid = grid;
    c.m = static_cast<int>(u.size());
    c.table = u.transpose().replicate(grid.n_steps, 1);
    c.description = "const";
    return c;
  }

  static AdaptedControl zero(const TimeGrid& grid, int m) {
    return constant(grid, Vector::Zero(m));
  }

  static AdaptedControl deterministic_table(const TimeGrid& grid,
                                            Matrix values) {
    if (values.rows() != grid.n_steps)
      throw DimensionMismatch("control table must have one row per step");
    if (!values.allFinite()) throw NotFinite("control values must be finite");
    AdaptedControl c;
    c.kind = Kind::deterministic;
    c.grid = grid;
    c.m = static_cast<int>(values.cols());
    c.table = std::move(values);
    c.description = "table";
    return c;
  }

  // Time-constant feedback rule u_k = theta^T features(Z_{t_k}).
  static AdaptedControl feedback(const TimeGrid& grid, Matrix theta,
                                 double clip = 5.0,
                                 std::string description = "feedback") {
    if (!theta.allFinite())
      throw NotFinite("feedback coefficients must be finite");
    AdaptedControl c;
    c.kind = Kind::feedback;
    c.grid = grid;
    c.m = static_cast<int>(theta.cols());
    const FeatureBasis basis{c.m};
    if (theta.rows() != basis.count())
      throw DimensionMismatch("feedback rule expects " +
                              std::to_string(basis.count()) +
                              " feature coefficients per channel");
    c.thetas.push_back(std::move(theta));
    c.clip = clip;
    c.description = std::move(description);
    return c;
  }

  static AdaptedControl feedback_per_step(const TimeGrid& grid,
                                          std::vector<Matrix> thetas,
                                          double clip = 5.0) {
    if (static_cast<long>(thetas.size()) != grid.n_steps)
      throw DimensionMismatch("per-step feedback needs one theta per step");
    AdaptedControl c = feedback(grid, thetas.front(), clip, "feedback");
    c.thetas = std::move(thetas);
    return c;
  }

  bool is_deterministic() const { return kind == Kind::deterministic; }

  const Matrix& theta_at(long k) const {
    return thetas.size() == 1 ? thetas.front() : thetas[k];
  }

  // u at step k given the observation value z at t_k.
  template <class RowT>
  void eval(long k, const RowT& z, Vector& features, Vector& out) const {
    if (kind == Kind::deterministic) {
      out = table.row(k).transpose();
      return;
    }
    const FeatureBasis basis{m};
    basis.eval(z, clip, features);
    out.noalias() = theta_at(k).transpose() * features;
  }
};

}  // namespace dualscope
