// File formats: strict JSON model files, JSON reports for the analysis and
// experiment results, and CSV trajectory exports.
#pragma once

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dualscope/control.hpp"
#include "dualscope/diagnostics.hpp"
#include "dualscope/duality.hpp"
#include "dualscope/filter.hpp"
#include "dualscope/observability.hpp"
#include "dualscope/simulate.hpp"
#include "dualscope/types.hpp"

namespace dualscope {

using json = nlohmann::json;

namespace detail {

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty())
    throw ConfigError(what + " must be a nonempty array of rows");
  const size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty())
    throw ConfigError(what + " rows must be nonempty arrays of numbers");
  const size_t cols = j[0].size();
  Matrix out(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ConfigError(what + " rows have inconsistent lengths");
    for (size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number())
        throw ConfigError(what + " entries must be numbers");
      out(i, c) = j[i][c].get<double>();
    }
  }
  return out;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(row);
  }
  return rows;
}

inline json basis_to_json(const Subspace& s) {
  // One array of d doubles per basis vector.
  json vecs = json::array();
  for (int j = 0; j < s.dim(); ++j) {
    json v = json::array();
    for (int i = 0; i < s.ambient_dim(); ++i) v.push_back(s.basis(i, j));
    vecs.push_back(v);
  }
  return vecs;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

// Model files are parsed strictly: unknown keys are rejected, shapes must
// match the declared d and m.
inline Model model_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model file must be a JSON object");
  static const std::set<std::string> allowed = {"d", "m", "A", "H", "labels"};
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ConfigError("model file has unknown key '" + item.key() + "'");
  for (const char* key : {"d", "m", "A", "H"})
    if (!j.contains(key))
      throw ConfigError(std::string("model file is missing key '") + key +
                        "'");
  if (!j["d"].is_number_integer() || !j["m"].is_number_integer())
    throw ConfigError("model d and m must be integers");
  const int d = j["d"].get<int>();
  const int m = j["m"].get<int>();
  const Matrix A = detail::matrix_from_json(j["A"], "A");
  const Matrix H = detail::matrix_from_json(j["H"], "H");
  if (A.rows() != d || A.cols() != d)
    throw DimensionMismatch("A must be d x d with d = " + std::to_string(d));
  if (H.rows() != d || H.cols() != m)
    throw DimensionMismatch("H must be d x m with d = " + std::to_string(d) +
                            ", m = " + std::to_string(m));
  std::vector<std::string> labels;
  if (j.contains("labels")) {
    if (!j["labels"].is_array())
      throw ConfigError("labels must be an array of strings");
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) throw ConfigError("labels must be strings");
      labels.push_back(l.get<std::string>());
    }
  }
  return validate_model(A, H, std::move(labels));
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("model file '" + path + "' is not valid JSON: " +
                      e.what());
  }
  return model_from_json(j);
}

inline json model_to_json(const Model& model) {
  json j;
  j["d"] = model.d;
  j["m"] = model.m;
  j["A"] = detail::matrix_to_json(model.A);
  j["H"] = detail::matrix_to_json(model.H);
  if (!model.labels.empty()) j["labels"] = model.labels;
  return j;
}

inline json report_to_json(const ObservabilityReport& r) {
  json pairs = json::array();
  for (const auto& [i, k] : r.colliding_pairs) pairs.push_back({i, k});
  json j;
  j["observable"] = r.observable;
  j["closure_dim"] = r.closure_dim;
  j["linear_dim"] = r.linear_dim;
  j["injective"] = r.injective;
  j["colliding_pairs"] = pairs;
  j["closure_basis"] = detail::basis_to_json(r.closure_basis);
  j["unobservable_basis"] = detail::basis_to_json(r.unobservable_basis);
  j["tol"] = r.tol;
  return j;
}

inline json adjoint_to_json(const AdjointIdentityResult& r) {
  json j;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["residual"] = r.residual;
  j["std_err"] = r.std_err;
  j["n_paths"] = r.n_paths;
  j["dt"] = r.dt;
  return j;
}

inline json distinguish_to_json(const DistinguishabilityResult& r) {
  json j;
  j["sup_discrepancy"] = r.sup_discrepancy;
  j["entropy"] = {{"estimate", r.entropy.estimate},
                  {"std_err", r.entropy.std_err}};
  j["verdict"] = to_string(r.verdict);
  j["thresholds"] = {{"eps_entropy", r.config.eps_entropy},
                     {"eps_sup", r.config.eps_sup},
                     {"algebraic_tol", r.config.algebraic_tol}};
  j["budgets"] = {{"n_paths", r.config.n_paths},
                  {"T", r.config.grid.horizon()},
                  {"dt", r.config.grid.dt},
                  {"seed", r.config.seed}};
  j["algebraic_indistinguishable"] = r.algebraic_indistinguishable;
  j["algebraic_residual"] = r.algebraic_residual;
  j["mismatch"] = r.mismatch;
  return j;
}

inline json span_to_json(const SpanEstimate& s) {
  json j;
  j["rank"] = s.rank;
  j["noise_floor"] = s.noise_floor;
  j["subspace_noise_floor"] = s.subspace_noise_floor;
  json sv = json::array();
  for (int i = 0; i < s.singular_values.size(); ++i)
    sv.push_back(s.singular_values(i));
  j["singular_values"] = sv;
  j["basis"] = detail::basis_to_json(s.span);
  return j;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

// Long-format trajectory export: path_id, t, state, Z_1..Z_m. Reference
// paths carry state -1.
inline void write_paths_csv(std::ostream& os,
                            const std::vector<PathBundle>& bundles) {
  if (bundles.empty()) return;
  const int m = static_cast<int>(bundles.front().Z.cols());
  os << "path_id,t,state";
  for (int c = 1; c <= m; ++c) os << ",Z_" << c;
  os << "\n";
  for (size_t p = 0; p < bundles.size(); ++p) {
    const PathBundle& b = bundles[p];
    for (long k = 0; k < b.grid.points(); ++k) {
      os << p << ',' << detail::format_double(b.grid.time(k)) << ','
         << (b.states.empty() ? -1 : b.states[k]);
      for (int c = 0; c < m; ++c)
        os << ',' << detail::format_double(b.Z(k, c));
      os << "\n";
    }
  }
}

// Long-format filter export: path_id, t, sigma_1.., pi_1.., log_norm.
inline void write_filter_csv(std::ostream& os,
                             const std::vector<FilterTrajectory>& filters) {
  if (filters.empty()) return;
  const int d = static_cast<int>(filters.front().sigma.cols());
  os << "path_id,t";
  for (int i = 1; i <= d; ++i) os << ",sigma_" << i;
  for (int i = 1; i <= d; ++i) os << ",pi_" << i;
  os << ",log_norm\n";
  for (size_t p = 0; p < filters.size(); ++p) {
    const FilterTrajectory& f = filters[p];
    for (long k = 0; k < f.grid.points(); ++k) {
      os << p << ',' << detail::format_double(f.grid.time(k));
      for (int i = 0; i < d; ++i)
        os << ',' << detail::format_double(f.sigma(k, i));
      for (int i = 0; i < d; ++i)
        os << ',' << detail::format_double(f.pi.size() > 0 ? f.pi(k, i) : 0.0);
      os << ',' << detail::format_double(f.log_norm(k)) << "\n";
    }
  }
}

// Discrepancy time trace: t, channel columns.
inline void write_trace_csv(std::ostream& os, const TimeGrid& grid,
                            const Matrix& trace) {
  os << "t";
  for (long c = 1; c <= trace.cols(); ++c) os << ",channel_" << c;
  os << "\n";
  for (long k = 0; k < trace.rows(); ++k) {
    os << detail::format_double(grid.time(k));
    for (long c = 0; c < trace.cols(); ++c)
      os << ',' << detail::format_double(trace(k, c));
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// Small parsing helpers shared with the CLI
// ---------------------------------------------------------------------------

inline Vector parse_vector(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      vals.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse '" + tok + "' as a number");
    }
  }
  if (vals.empty()) throw ConfigError("empty vector literal");
  Vector out(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) out(i) = vals[i];
  return out;
}

inline AdaptedControl control_from_json(const json& j, const TimeGrid& grid,
                                        int m) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("control spec must be an object with a 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "const") {
    if (!j.contains("value")) throw ConfigError("const control needs 'value'");
    const json& v = j["value"];
    Vector u(m);
    if (v.is_number() && m == 1) {
      u(0) = v.get<double>();
    } else if (v.is_array() && static_cast<int>(v.size()) == m) {
      for (int c = 0; c < m; ++c) u(c) = v[c].get<double>();
    } else {
      throw ConfigError("const control value must have one entry per channel");
    }
    return AdaptedControl::constant(grid, u);
  }
  if (kind == "feedback") {
    if (!j.contains("theta")) throw ConfigError("feedback control needs 'theta'");
    const FeatureBasis basis{m};
    Matrix theta;
    const json& t = j["theta"];
    if (t.is_array() && !t.empty() && t[0].is_array()) {
      theta = detail::matrix_from_json(t, "theta");
    } else if (t.is_array() && m == 1) {
      theta.resize(t.size(), 1);
      for (size_t i = 0; i < t.size(); ++i) theta(i, 0) = t[i].get<double>();
    } else {
      throw ConfigError("feedback theta must be a feature x channel matrix");
    }
    if (theta.rows() != basis.count() || theta.cols() != m)
      throw ConfigError("feedback theta must be " +
                        std::to_string(basis.count()) + " x " +
                        std::to_string(m));
    const double clip = j.value("clip", 5.0);
    return AdaptedControl::feedback(grid, theta, clip);
  }
  throw ConfigError("unknown control kind '" + kind + "'");
}

// Compact control specs: "const:v1,v2" or "feedback:<json file>".
inline AdaptedControl parse_control_spec(const std::string& spec,
                                         const TimeGrid& grid, int m) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  if (head == "const") {
    if (colon == std::string::npos)
      throw ConfigError("const control spec needs values, e.g. const:1.0");
    const Vector u = parse_vector(spec.substr(colon + 1));
    if (u.size() != m)
      throw ConfigError("control has " + std::to_string(u.size()) +
                        " channels, model expects " + std::to_string(m));
    return AdaptedControl::constant(grid, u);
  }
  if (head == "feedback") {
    if (colon == std::string::npos)
      throw ConfigError("feedback control spec needs a file path");
    const std::string path = spec.substr(colon + 1);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open control file '" + path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw ConfigError("control file '" + path + "' is not valid JSON: " +
                        e.what());
    }
    return control_from_json(j, grid, m);
  }
  throw ConfigError("unknown control spec '" + spec +
                    "'; use const:<values> or feedback:<file>");
}

}  // namespace dualscope
