// Sampling of the hidden chain and its observation process: exact event-time
// CTMC simulation recorded on a uniform grid, observation increments
// dZ_k = h(X_k) dt + sqrt(dt) xi_k, and pure Brownian reference paths.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "dualscope/rng.hpp"
#include "dualscope/types.hpp"

namespace dualscope {

enum class MeasureTag { physical, reference };

// One Monte Carlo sample of (X, Z): the state index per grid point, the
// observation path Z (rows = grid points, Z_0 = 0) and its increments dZ
// (rows = steps). Z is the cumulative sum of dZ in fixed order.
struct PathBundle {
  TimeGrid grid;
  MeasureTag tag = MeasureTag::reference;
  Vector mu;                // initial law when tag == physical, else empty
  std::vector<int> states;  // empty for reference paths
  Matrix Z;                 // (n_steps + 1) x m
  Matrix dZ;                // n_steps x m
};

// Exact holding-time simulation of the chain with rates A_ij (i -> j),
// sampled at the grid points. Stream convention: the caller hands one RNG
// stream per path.
inline std::vector<int> sample_ctmc(const Model& model,
                                    const ProbabilityMeasure& mu,
                                    const TimeGrid& grid, uint64_t seed,
                                    uint64_t stream_id) {
  if (mu.dim() != model.d)
    throw DimensionMismatch("initial measure dimension mismatch");
  rng::Stream stream(seed, stream_id);
  std::vector<int> states(grid.points());
  int s = stream.categorical(model.d, 1.0,
                             [&](int i) { return mu.weights(i); });
  double t_jump;  // time of the next jump out of the current state
  long k = 0;
  double t_now = 0.0;
  for (;;) {
    const double rate = -model.A(s, s);
    t_jump = rate > 0.0 ? t_now + stream.exponential(rate)
                        : std::numeric_limits<double>::infinity();
    while (k < grid.points() && grid.time(k) < t_jump) states[k++] = s;
    if (k >= grid.points()) break;
    t_now = t_jump;
    s = stream.categorical(model.d, rate,
                           [&](int j) { return j == s ? 0.0 : model.A(s, j); });
  }
  return states;
}

// Observation increments along a given state path; left-endpoint drift.
inline std::pair<Matrix, Matrix> synthesize_observation(
    const Model& model, const std::vector<int>& states, const TimeGrid& grid,
    uint64_t seed, uint64_t stream_id) {
  if (static_cast<long>(states.size()) != grid.points())
    throw DimensionMismatch("state path does not match the grid");
  rng::Stream stream(seed, stream_id);
  const double sqrt_dt = std::sqrt(grid.dt);
  Matrix dZ(grid.n_steps, model.m);
  Matrix Z = Matrix::Zero(grid.points(), model.m);
  for (long k = 0; k < grid.n_steps; ++k) {
    for (int c = 0; c < model.m; ++c)
      dZ(k, c) = model.H(states[k], c) * grid.dt + sqrt_dt * stream.normal();
    Z.row(k + 1) = Z.row(k) + dZ.row(k);
  }
  return {std::move(Z), std::move(dZ)};
}

// Brownian observation path under the reference measure.
inline std::pair<Matrix, Matrix> sample_reference_brownian(const TimeGrid& grid,
                                                           int m, uint64_t seed,
                                                           uint64_t stream_id) {
  rng::Stream stream(seed, stream_id);
  const double sqrt_dt = std::sqrt(grid.dt);
  Matrix dZ(grid.n_steps, m);
  Matrix Z = Matrix::Zero(grid.points(), m);
  for (long k = 0; k < grid.n_steps; ++k) {
    for (int c = 0; c < m; ++c) dZ(k, c) = sqrt_dt * stream.normal();
    Z.row(k + 1) = Z.row(k) + dZ.row(k);
  }
  return {std::move(Z), std::move(dZ)};
}

// Per-path stream slots: chain noise on stream 2*path, observation noise on
// stream 2*path + 1, both offset by `stream_base`.
inline PathBundle simulate_physical_path(const Model& model,
                                         const ProbabilityMeasure& mu,
                                         const TimeGrid& grid, uint64_t seed,
                                         uint64_t path_index,
                                         uint64_t stream_base = 0) {
  PathBundle b;
  b.grid = grid;
  b.tag = MeasureTag::physical;
  b.mu = mu.weights;
  b.states =
      sample_ctmc(model, mu, grid, seed, stream_base + 2 * path_index);
  auto zs = synthesize_observation(model, b.states, grid, seed,
                                   stream_base + 2 * path_index + 1);
  b.Z = std::move(zs.first);
  b.dZ = std::move(zs.second);
  return b;
}

inline PathBundle simulate_reference_path(int m, const TimeGrid& grid,
                                          uint64_t seed, uint64_t path_index,
                                          uint64_t stream_base = 0) {
  PathBundle b;
  b.grid = grid;
  b.tag = MeasureTag::reference;
  auto zs = sample_reference_brownian(grid, m, seed,
                                      stream_base + 2 * path_index + 1);
  b.Z = std::move(zs.first);
  b.dZ = std::move(zs.second);
  return b;
}

}  // namespace dualscope
