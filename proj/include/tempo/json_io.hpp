#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/ads.hpp"
#include "tempo/lq.hpp"
#include "tempo/lq_theory.hpp"
#include "tempo/schwarz.hpp"
#include "tempo/solver_options.hpp"

namespace tempo {

using json = nlohmann::json;

// fixed 17-significant-digit form: round-trips any double
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError("expected a nested array of numbers");
  const long rows = static_cast<long>(j.size());
  const long cols = static_cast<long>(j[0].size());
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (static_cast<long>(j[i].size()) != cols)
      throw ValidationError("ragged matrix rows");
    for (long c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("expected an array of numbers");
  Vector v(static_cast<long>(j.size()));
  for (long i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return j;
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path);
}

inline LqProblemData lq_from_json(const json& j) {
  LqProblemData d;
  for (const char* key : {"A", "B", "Q", "R", "c", "f_lin", "M", "N"})
    if (!j.contains(key)) throw ValidationError(std::string("missing key ") + key);
  d.A = matrix_from_json(j["A"]);
  d.B = matrix_from_json(j["B"]);
  d.Q = matrix_from_json(j["Q"]);
  d.R = matrix_from_json(j["R"]);
  d.c = vector_from_json(j["c"]);
  d.f_lin = vector_from_json(j["f_lin"]);
  d.start = j["M"].get<long>();
  d.end = j["N"].get<long>();
  d.validate();
  return d;
}

inline json lq_to_json(const LqProblemData& d) {
  json j;
  j["A"] = matrix_to_json(d.A);
  j["B"] = matrix_to_json(d.B);
  j["Q"] = matrix_to_json(d.Q);
  j["R"] = matrix_to_json(d.R);
  j["c"] = vector_to_json(d.c);
  j["f_lin"] = vector_to_json(d.f_lin);
  j["M"] = d.start;
  j["N"] = d.end;
  return j;
}

// optional boundary data stored next to a problem; zeros when absent
inline BoundaryCondition boundary_from_json(const json& j, int n_x) {
  BoundaryCondition bc{Vector::Zero(n_x), Vector::Zero(n_x)};
  if (j.contains("x_init")) bc.x_init = vector_from_json(j["x_init"]);
  if (j.contains("lambda_terminal"))
    bc.lambda_terminal = vector_from_json(j["lambda_terminal"]);
  if (bc.x_init.size() != n_x || bc.lambda_terminal.size() != n_x)
    throw ValidationError("boundary data has wrong dimensions");
  return bc;
}

inline json kkt_to_json(const KktResidual& r) {
  return json{{"stationarity_x", r.stationarity_x},
              {"stationarity_u", r.stationarity_u},
              {"primal_feas", r.primal_feas},
              {"ineq_feas", r.ineq_feas},
              {"complementarity", r.complementarity},
              {"dual_feas", r.dual_feas},
              {"max", r.max()}};
}

inline json report_to_json(const SolveReport& r) {
  return json{{"converged", r.converged},
              {"iterations", r.iterations},
              {"final_kkt", kkt_to_json(r.final_kkt)},
              {"wall_time", r.wall_time}};
}

inline json bounds_to_json(const TheoryBounds& tb) {
  json j;
  j["lambda1"] = tb.lambda1;
  j["lambda2"] = tb.lambda2;
  j["rho"] = tb.rho;
  j["N_s"] = tb.N_s;
  j["L_constants"] = json{{"H", tb.L.H}, {"Z", tb.L.Z},   {"Zt", tb.L.Zt},
                          {"Y", tb.L.Y}, {"Yt", tb.L.Yt}, {"W", tb.L.W},
                          {"Wt", tb.L.Wt}, {"L", tb.L.L}};
  j["epsilon_prefix"] = tb.epsilon_prefix;
  return j;
}

inline json ads_to_json(const AdsReport& r) {
  json curve = json::array();
  for (const auto& p : r.curve) curve.push_back(json{{"d", p.d}, {"eps_hat", p.eps_hat}});
  return json{{"rho_fit", r.rho_fit},   {"r_squared", r.r_squared},
              {"decays", r.decays},     {"d_lo", r.d_lo},
              {"d_hi", r.d_hi},         {"failures", r.failures},
              {"curve", std::move(curve)}};
}

inline void write_residual_csv(const std::string& path,
                               const std::vector<IterationRecord>& log) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "iter,r,s,err_inf,wall_ms\n";
  for (const auto& rec : log) {
    out << rec.iter << ',' << fmt_g17(rec.r) << ',' << fmt_g17(rec.s) << ',';
    if (std::isfinite(rec.err_inf)) out << fmt_g17(rec.err_inf);
    out << ',' << fmt_g17(rec.wall_ms) << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

inline void write_eps_csv(const std::string& path,
                          const std::vector<AdsCurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "d,eps_hat\n";
  for (const auto& p : curve) out << p.d << ',' << fmt_g17(p.eps_hat) << '\n';
  if (!out) throw Error("failed writing " + path);
}

inline void write_timing_csv(const std::string& path,
                             const std::vector<std::pair<int, double>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "workers,wall_ms\n";
  for (const auto& [w, ms] : rows) out << w << ',' << fmt_g17(ms) << '\n';
  if (!out) throw Error("failed writing " + path);
}

}  // namespace tempo
