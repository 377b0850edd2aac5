#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <utility>
#include <vector>

#include "tempo/ocp.hpp"
#include "tempo/riccati.hpp"
#include "tempo/solver_options.hpp"

namespace tempo {

namespace detail {

inline CostHessian fd_cost_hessian(const OcpProblem& p, const Vector& x,
                                   const Vector& u, long i) {
  // forward differences of the cost gradients; only used when the problem
  // author supplies no second-order callback
  CostHessian h;
  h.xx.resize(p.n_x, p.n_x);
  h.ux.resize(p.n_u, p.n_x);
  h.uu.resize(p.n_u, p.n_u);
  const CostEval base = p.cost(x, u, i);
  for (int j = 0; j < p.n_x; ++j) {
    const double eps = 1e-7 * (1.0 + std::abs(x[j]));
    Vector xp = x;
    xp[j] += eps;
    CostEval e = p.cost(xp, u, i);
    h.xx.col(j) = (e.grad_x - base.grad_x) / eps;
    h.ux.col(j) = (e.grad_u - base.grad_u) / eps;
  }
  for (int j = 0; j < p.n_u; ++j) {
    const double eps = 1e-7 * (1.0 + std::abs(u[j]));
    Vector up = u;
    up[j] += eps;
    CostEval e = p.cost(x, up, i);
    h.uu.col(j) = (e.grad_u - base.grad_u) / eps;
  }
  h.xx = 0.5 * (h.xx + h.xx.transpose()).eval();
  h.uu = 0.5 * (h.uu + h.uu.transpose()).eval();
  return h;
}

struct StageEval {
  CostEval cost;
  CostHessian hess;
  DynamicsEval dyn;
  IneqEval ineq;
};

// Curvature of lam' * f(x, u, i) by forward differences of the dynamics
// Jacobians. Stage costs that are linear in the state (economic objectives)
// leave the Lagrangian with no primal curvature of their own, and the Newton
// iteration stalls unless this term is kept.
struct LagrHessian {
  Matrix xx, ux, uu;
};

inline LagrHessian fd_lagr_hessian(const OcpProblem& p, const Vector& x,
                                   const Vector& u, const Vector& lam_next,
                                   long i, const DynamicsEval& base) {
  LagrHessian w;
  w.xx = Matrix::Zero(p.n_x, p.n_x);
  w.ux = Matrix::Zero(p.n_u, p.n_x);
  w.uu = Matrix::Zero(p.n_u, p.n_u);
  const Vector gx0 = base.jac_x.transpose() * lam_next;
  const Vector gu0 = base.jac_u.transpose() * lam_next;
  for (int j = 0; j < p.n_x; ++j) {
    const double eps = 1e-6 * (1.0 + std::abs(x[j]));
    Vector xp = x;
    xp[j] += eps;
    DynamicsEval d = p.dynamics(xp, u, i);
    w.xx.col(j) = (d.jac_x.transpose() * lam_next - gx0) / eps;
    w.ux.col(j) = (d.jac_u.transpose() * lam_next - gu0) / eps;
  }
  for (int j = 0; j < p.n_u; ++j) {
    const double eps = 1e-6 * (1.0 + std::abs(u[j]));
    Vector up = u;
    up[j] += eps;
    DynamicsEval d = p.dynamics(x, up, i);
    w.uu.col(j) = (d.jac_u.transpose() * lam_next - gu0) / eps;
  }
  w.xx = 0.5 * (w.xx + w.xx.transpose()).eval();
  w.uu = 0.5 * (w.uu + w.uu.transpose()).eval();
  return w;
}

}  // namespace detail

// Primal-dual interior-point solve of the subproblem instance. Stage-wise
// slacks s = -g with a monotone log barrier; Newton steps use the exact
// Lagrangian Hessian (dynamics curvature by finite differences unless
// switched off) solved by the Riccati elimination under a fraction-to-
// boundary step rule. There is no merit line search; instead a step whose
// barrier residual blows up, or that lands where an evaluator fails, is
// undone and retried with a larger Levenberg shift. Non-convergence is
// reported, not thrown.
inline std::pair<PrimalDualTrajectory, SolveReport> solve_nlp(
    const OcpProblem& p, const BoundaryCondition& bc,
    const SolverOptions& opts = {}, const PrimalDualTrajectory* warm = nullptr) {
  const auto t_start = std::chrono::steady_clock::now();
  p.validate();
  if (bc.x_init.size() != p.n_x || bc.lambda_terminal.size() != p.n_x)
    throw ValidationError("boundary condition has wrong dimensions");
  const long M = p.start, N = p.end;
  const size_t T = static_cast<size_t>(N - M);
  const bool has_g = p.n_g > 0;

  PrimalDualTrajectory z;
  bool fresh_mu = true;
  if (warm) {
    z = *warm;
    if (z.start != M || z.end != N)
      throw ValidationError("warm start range does not match problem horizon");
    if (has_g) {
      if (!z.has_mu())
        z.mus.assign(T, Vector::Zero(p.n_g));
      else
        for (const auto& m : z.mus)
          if (m.maxCoeff() > 0.0) fresh_mu = false;
    }
  } else {
    z = PrimalDualTrajectory::zero(p, bc);
    for (size_t i = 0; i + 1 < z.xs.size(); ++i) z.xs[i] = bc.x_init;
    for (auto& l : z.lams) l = bc.lambda_terminal;
  }
  z.x(M) = bc.x_init;
  z.lam(N) = bc.lambda_terminal;

  std::vector<Vector> slack(T);
  std::vector<detail::StageEval> ev(T);

  auto evaluate_stages = [&]() {
    for (size_t k = 0; k < T; ++k) {
      const long i = M + static_cast<long>(k);
      const Vector& xi = z.x(i);
      const Vector& ui = z.u(i);
      detail::StageEval& e = ev[k];
      e.cost = p.cost(xi, ui, i);
      e.hess = p.cost_hessian ? p.cost_hessian(xi, ui, i)
                              : detail::fd_cost_hessian(p, xi, ui, i);
      e.dyn = p.dynamics(xi, ui, i);
      if (!all_finite(e.cost.grad_x) || !all_finite(e.cost.grad_u) ||
          !all_finite(e.dyn.next) || !all_finite(e.dyn.jac_x) ||
          !all_finite(e.dyn.jac_u))
        throw EvaluationError("non-finite evaluator output", i);
      if (has_g) {
        e.ineq = p.inequality(xi, ui, i);
        if (!all_finite(e.ineq.value)) throw EvaluationError("non-finite inequality", i);
      }
    }
  };

  auto true_kkt = [&]() {
    KktResidual r;
    r.primal_feas = inf_norm(z.x(M) - bc.x_init);
    r.stationarity_x = inf_norm(bc.lambda_terminal - z.lam(N));
    for (size_t k = 0; k < T; ++k) {
      const long i = M + static_cast<long>(k);
      const detail::StageEval& e = ev[k];
      Vector sx = e.cost.grad_x + e.dyn.jac_x.transpose() * z.lam(i + 1) - z.lam(i);
      Vector su = e.cost.grad_u + e.dyn.jac_u.transpose() * z.lam(i + 1);
      if (has_g) {
        sx += e.ineq.jac_x.transpose() * z.mu(i);
        su += e.ineq.jac_u.transpose() * z.mu(i);
        r.ineq_feas = std::max(r.ineq_feas, e.ineq.value.cwiseMax(0.0).maxCoeff());
        r.complementarity = std::max(
            r.complementarity, inf_norm(z.mu(i).cwiseProduct(e.ineq.value)));
        r.dual_feas = std::max(r.dual_feas, (-z.mu(i)).cwiseMax(0.0).maxCoeff());
      }
      r.stationarity_x = std::max(r.stationarity_x, inf_norm(sx));
      r.stationarity_u = std::max(r.stationarity_u, inf_norm(su));
      r.primal_feas = std::max(r.primal_feas, inf_norm(z.x(i + 1) - e.dyn.next));
    }
    return r;
  };

  double mu_b = opts.barrier_initial;
  const double mu_floor = std::min(1e-9, 1e-2 * opts.kkt_tol);

  auto barrier_residual = [&]() {
    double res = std::max(inf_norm(z.x(M) - bc.x_init),
                          inf_norm(bc.lambda_terminal - z.lam(N)));
    for (size_t k = 0; k < T; ++k) {
      const long i = M + static_cast<long>(k);
      const detail::StageEval& e = ev[k];
      Vector sx = e.cost.grad_x + e.dyn.jac_x.transpose() * z.lam(i + 1) - z.lam(i);
      Vector su = e.cost.grad_u + e.dyn.jac_u.transpose() * z.lam(i + 1);
      if (has_g) {
        sx += e.ineq.jac_x.transpose() * z.mu(i);
        su += e.ineq.jac_u.transpose() * z.mu(i);
        res = std::max(res, inf_norm(e.ineq.value + slack[k]));
        res = std::max(res, inf_norm(z.mu(i).cwiseProduct(slack[k]) -
                                     Vector::Constant(p.n_g, mu_b)));
      }
      res = std::max(res, inf_norm(sx));
      res = std::max(res, inf_norm(su));
      res = std::max(res, inf_norm(z.x(i + 1) - e.dyn.next));
    }
    return res;
  };

  evaluate_stages();
  if (has_g) {
    for (size_t k = 0; k < T; ++k) {
      // a warm slack may sit near zero at an active constraint, but a
      // violated inequality is pushed a finite margin interior; flooring it
      // at 1e-8 would raise a barrier wall on the wrong side of the bound
      slack[k].resize(p.n_g);
      for (int j = 0; j < p.n_g; ++j) {
        const double nat = -ev[k].ineq.value[j];
        slack[k][j] = std::max(nat, warm && nat > 0.0 ? 1e-8 : 1e-2);
      }
    }
    if (warm) {
      // pick the barrier level the warm start is already consistent with
      // instead of dragging a good iterate out to the default barrier path
      const double r0 = true_kkt().max();
      double comp = 0.0;
      long cnt = 0;
      if (!fresh_mu)
        for (size_t k = 0; k < T; ++k) {
          const long i = M + static_cast<long>(k);
          comp += z.mu(i).cwiseProduct(slack[k]).sum();
          cnt += p.n_g;
        }
      const double level = fresh_mu ? r0 : std::max(r0, comp / std::max(cnt, 1L));
      mu_b = std::min(std::max(level, 10.0 * mu_floor), opts.barrier_initial);
    }
    for (size_t k = 0; k < T; ++k) {
      const long i = M + static_cast<long>(k);
      if (fresh_mu)
        z.mu(i) = (mu_b * slack[k].cwiseInverse()).cwiseMax(1e-8);
      else
        z.mu(i) = z.mu(i).cwiseMax(1e-8);
    }
  }

  SolveReport rep;
  double delta = 0.0;
  double prev_barrier_res = std::numeric_limits<double>::infinity();
  int stall = 0;
  int failed_steps = 0;
  static const bool trace = std::getenv("TEMPO_NLP_TRACE") != nullptr;

  for (int iter = 0; iter < opts.max_newton_iters; ++iter) {
    rep.final_kkt = true_kkt();
    if (rep.final_kkt.max() <= opts.kkt_tol) {
      rep.converged = true;
      break;
    }
    rep.iterations = iter + 1;

    double barrier_res = barrier_residual();
    if (has_g) {
      while (barrier_res <= mu_b && mu_b > mu_floor) {
        mu_b = std::max(mu_b * opts.barrier_reduction, mu_floor);
        barrier_res = barrier_residual();
        prev_barrier_res = std::numeric_limits<double>::infinity();
      }
    }
    // Levenberg adjustment: residual growth at a fixed barrier level means
    // the linearization was overtrusted
    if (barrier_res > 1.5 * prev_barrier_res)
      delta = std::max(4.0 * delta, 1e-8);
    else if (delta > 0.0)
      delta = delta > opts.reg_min ? 0.5 * delta : 0.0;
    prev_barrier_res = barrier_res;

    // condensed Newton step system
    std::vector<TpbvpStage> stages(T);
    TpbvpRhs rhs;
    rhs.q.resize(T);
    rhs.r.resize(T);
    rhs.c.resize(T);
    rhs.x_init = Vector::Zero(p.n_x);
    rhs.lambda_terminal = Vector::Zero(p.n_x);
    std::vector<Vector> e_g(T), e_comp(T);
    for (size_t k = 0; k < T; ++k) {
      const long i = M + static_cast<long>(k);
      const detail::StageEval& e = ev[k];
      TpbvpStage& s = stages[k];
      s.A = e.dyn.jac_x;
      s.B = e.dyn.jac_u;
      s.Qxx = e.hess.xx;
      s.Sux = e.hess.ux;
      s.Ruu = e.hess.uu;
      if (opts.dynamics_curvature) {
        const detail::LagrHessian w =
            detail::fd_lagr_hessian(p, z.x(i), z.u(i), z.lam(i + 1), i, e.dyn);
        s.Qxx += w.xx;
        s.Sux += w.ux;
        s.Ruu += w.uu;
      }
      Vector q = e.cost.grad_x + e.dyn.jac_x.transpose() * z.lam(i + 1) - z.lam(i);
      Vector r = e.cost.grad_u + e.dyn.jac_u.transpose() * z.lam(i + 1);
      if (has_g) {
        q += e.ineq.jac_x.transpose() * z.mu(i);
        r += e.ineq.jac_u.transpose() * z.mu(i);
        e_g[k] = e.ineq.value + slack[k];
        e_comp[k] = z.mu(i).cwiseProduct(slack[k]) - Vector::Constant(p.n_g, mu_b);
        const Vector sigma = z.mu(i).cwiseQuotient(slack[k]);
        s.Qxx += e.ineq.jac_x.transpose() * sigma.asDiagonal() * e.ineq.jac_x;
        s.Sux += e.ineq.jac_u.transpose() * sigma.asDiagonal() * e.ineq.jac_x;
        s.Ruu += e.ineq.jac_u.transpose() * sigma.asDiagonal() * e.ineq.jac_u;
        const Vector fold =
            sigma.cwiseProduct(e_g[k]) - e_comp[k].cwiseQuotient(slack[k]);
        q += e.ineq.jac_x.transpose() * fold;
        r += e.ineq.jac_u.transpose() * fold;
      }
      rhs.q[k] = q;
      rhs.r[k] = r;
      rhs.c[k] = e.dyn.next - z.x(i + 1);
    }

    // inertia correction: the shift is doubled until every stage factors
    TpbvpSolution step;
    bool solved = false;
    while (!solved) {
      try {
        std::vector<TpbvpStage> reg = stages;
        if (delta > 0.0)
          for (auto& s : reg) {
            s.Qxx += delta * Matrix::Identity(p.n_x, p.n_x);
            s.Ruu += delta * Matrix::Identity(p.n_u, p.n_u);
          }
        TpbvpFactorization fact(reg, M);
        step = fact.solve(rhs);
        solved = true;
      } catch (const FactorizationError&) {
        delta = delta == 0.0 ? opts.reg_min : 2.0 * delta;
        if (delta > 1e10) throw;
      }
    }

    // fraction-to-boundary step sizes
    double a_pri = 1.0, a_dual = 1.0;
    std::vector<Vector> dslack(T), dmu(T);
    if (has_g) {
      const double tau = opts.fraction_to_boundary;
      for (size_t k = 0; k < T; ++k) {
        const long i = M + static_cast<long>(k);
        const detail::StageEval& e = ev[k];
        const Vector dxu = e.ineq.jac_x * step.xs[k] + e.ineq.jac_u * step.us[k];
        dslack[k] = -e_g[k] - dxu;
        dmu[k] =
            -(e_comp[k] + z.mu(i).cwiseProduct(dslack[k])).cwiseQuotient(slack[k]);
        for (int j = 0; j < p.n_g; ++j) {
          if (dslack[k][j] < 0.0)
            a_pri = std::min(a_pri, -tau * slack[k][j] / dslack[k][j]);
          if (dmu[k][j] < 0.0)
            a_dual = std::min(a_dual, -tau * z.mu(i)[j] / dmu[k][j]);
        }
      }
    }

    if (trace)
      std::fprintf(stderr,
                   "nlp it=%3d mu=%9.2e barrier_res=%9.2e kkt=%9.2e a_pri=%6.4f "
                   "a_dual=%6.4f delta=%8.1e\n",
                   iter, mu_b, barrier_res, rep.final_kkt.max(), a_pri, a_dual, delta);

    const PrimalDualTrajectory z_old = z;
    const std::vector<Vector> slack_old = slack;
    for (size_t k = 0; k <= T; ++k) {
      const long i = M + static_cast<long>(k);
      z.x(i) += a_pri * step.xs[k];
      z.lam(i) += a_dual * step.lams[k];
      if (k < T) {
        z.u(i) += a_pri * step.us[k];
        if (has_g) {
          slack[k] += a_pri * dslack[k];
          z.mu(i) += a_dual * dmu[k];
          // keep each multiplier within a fixed factor of the barrier
          // centering value; otherwise mu/s can run away when a slack is
          // ground down and the scaling matrix goes singular
          const double kappa = 1e10;
          for (int j = 0; j < p.n_g; ++j) {
            const double c = mu_b / slack[k][j];
            z.mu(i)[j] = std::min(std::max(z.mu(i)[j], c / kappa), c * kappa);
          }
        }
      }
    }

    double step_size = 0.0;
    for (size_t k = 0; k <= T; ++k) {
      step_size = std::max(step_size, inf_norm(step.xs[k]) * a_pri);
      if (k < T) step_size = std::max(step_size, inf_norm(step.us[k]) * a_pri);
    }
    if (step_size < 1e-14) {
      if (++stall >= 5) break;
    } else {
      stall = 0;
    }

    // accept unless the step broke an evaluator or blew the residual up
    bool reject = false;
    try {
      evaluate_stages();
      const double post = barrier_residual();
      if (post > 2.0 * barrier_res + 10.0 * mu_b) reject = true;
      if (trace && reject)
        std::fprintf(stderr, "  reject: post=%9.2e limit=%9.2e\n", post,
                     2.0 * barrier_res + 10.0 * mu_b);
    } catch (const Error& err) {
      if (++failed_steps > 40) throw;
      reject = true;
      if (trace) std::fprintf(stderr, "  reject: eval \"%s\"\n", err.what());
    }
    if (reject) {
      z = z_old;
      slack = slack_old;
      evaluate_stages();
      if (++failed_steps > 60) break;
      delta = std::max(10.0 * delta, 1e-6);
      prev_barrier_res = std::numeric_limits<double>::infinity();
    } else {
      failed_steps = 0;
    }
  }

  rep.final_kkt = true_kkt();
  rep.converged = rep.final_kkt.max() <= opts.kkt_tol;
  rep.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(z), rep};
}

}  // namespace tempo
