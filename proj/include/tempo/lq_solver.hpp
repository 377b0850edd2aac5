#pragma once

#include <chrono>
#include <utility>

#include "tempo/lq.hpp"
#include "tempo/riccati.hpp"
#include "tempo/solver_options.hpp"

namespace tempo {

namespace detail {

struct LqRows {
  std::vector<Vector> vx;   // stationarity in x, stages start..end-1
  std::vector<Vector> vu;   // stationarity in u
  std::vector<Vector> vdyn; // dynamics defect
  Vector e_init;
  Vector e_term;
};

inline LqRows lq_kkt_rows(const LqProblemData& d, const BoundaryCondition& bc,
                          const TpbvpSolution& s) {
  const size_t T = s.us.size();
  LqRows rows;
  rows.vx.resize(T);
  rows.vu.resize(T);
  rows.vdyn.resize(T);
  for (size_t i = 0; i < T; ++i) {
    rows.vx[i] = 2.0 * d.Q * s.xs[i] - d.f_lin + d.A.transpose() * s.lams[i + 1] -
                 s.lams[i];
    rows.vu[i] = 2.0 * d.R * s.us[i] + d.B.transpose() * s.lams[i + 1];
    rows.vdyn[i] = d.A * s.xs[i] + d.B * s.us[i] + d.c - s.xs[i + 1];
  }
  rows.e_init = s.xs[0] - bc.x_init;
  rows.e_term = s.lams[T] - bc.lambda_terminal;
  return rows;
}

}  // namespace detail

// Direct solve of the linear-quadratic subproblem instance by Riccati-form
// block elimination plus one iterative-refinement pass. Cost is linear in
// end - start.
inline std::pair<PrimalDualTrajectory, SolveReport> solve_lq(
    const LqProblemData& data, const BoundaryCondition& bc,
    const SolverOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  data.validate();
  if (bc.x_init.size() != data.n_x() || bc.lambda_terminal.size() != data.n_x())
    throw ValidationError("boundary condition has wrong dimensions");
  const size_t T = static_cast<size_t>(data.end - data.start);

  TpbvpStage blk;
  blk.A = data.A;
  blk.B = data.B;
  blk.Qxx = 2.0 * data.Q;
  blk.Sux = Matrix::Zero(data.n_u(), data.n_x());
  blk.Ruu = 2.0 * data.R;
  TpbvpFactorization fact(std::vector<TpbvpStage>(T, blk), data.start);

  TpbvpRhs rhs;
  rhs.q.assign(T, -data.f_lin);
  rhs.r.assign(T, Vector::Zero(data.n_u()));
  rhs.c.assign(T, data.c);
  rhs.x_init = bc.x_init;
  rhs.lambda_terminal = bc.lambda_terminal;
  TpbvpSolution sol = fact.solve(rhs);

  // One refinement pass on the stationarity rows; the rollout already
  // satisfies the dynamics and boundary rows exactly.
  detail::LqRows rows = detail::lq_kkt_rows(data, bc, sol);
  TpbvpRhs corr;
  corr.q = rows.vx;
  corr.r = rows.vu;
  corr.c = rows.vdyn;
  corr.x_init = -rows.e_init;
  corr.lambda_terminal = -rows.e_term;
  TpbvpSolution delta = fact.solve(corr);
  for (size_t i = 0; i <= T; ++i) {
    sol.xs[i] += delta.xs[i];
    sol.lams[i] += delta.lams[i];
    if (i < T) sol.us[i] += delta.us[i];
  }

  PrimalDualTrajectory traj;
  traj.start = data.start;
  traj.end = data.end;
  traj.xs = std::move(sol.xs);
  traj.us = std::move(sol.us);
  traj.lams = std::move(sol.lams);

  SolveReport rep;
  rep.iterations = 1;
  detail::LqRows fin = detail::lq_kkt_rows(data, bc,
                                           TpbvpSolution{traj.xs, traj.us, traj.lams});
  for (size_t i = 0; i < T; ++i) {
    rep.final_kkt.stationarity_x =
        std::max(rep.final_kkt.stationarity_x, inf_norm(fin.vx[i]));
    rep.final_kkt.stationarity_u =
        std::max(rep.final_kkt.stationarity_u, inf_norm(fin.vu[i]));
    rep.final_kkt.primal_feas =
        std::max(rep.final_kkt.primal_feas, inf_norm(fin.vdyn[i]));
  }
  rep.final_kkt.stationarity_x =
      std::max(rep.final_kkt.stationarity_x, inf_norm(fin.e_term));
  rep.final_kkt.primal_feas =
      std::max(rep.final_kkt.primal_feas, inf_norm(fin.e_init));
  rep.converged = rep.final_kkt.max() <= opts.kkt_tol;
  rep.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(traj), rep};
}

}  // namespace tempo
