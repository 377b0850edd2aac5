#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tempo/types.hpp"

namespace tempo {

// Stage cost value and first derivatives at (x_i, u_i).
struct CostEval {
  double value = 0.0;
  Vector grad_x;
  Vector grad_u;
};

// Optional exact stage-cost second derivatives. `ux` is d2l/du dx.
struct CostHessian {
  Matrix xx;
  Matrix ux;
  Matrix uu;
};

// Discrete dynamics x_{i+1} = f(x_i, u_i) and Jacobians.
struct DynamicsEval {
  Vector next;
  Matrix jac_x;
  Matrix jac_u;
};

// Stage inequality g(x_i, u_i) <= 0 and Jacobians, n_g rows.
struct IneqEval {
  Vector value;
  Matrix jac_x;
  Matrix jac_u;
};

// Discrete-time optimal control problem on stages [start, end]:
// states on start..end, inputs/inequalities on start..end-1.
// Evaluators take the absolute stage index and must be reentrant; the
// solvers call them concurrently from subdomain workers.
struct OcpProblem {
  long start = 0;
  long end = 0;
  int n_x = 0;
  int n_u = 0;
  int n_g = 0;

  std::function<CostEval(const Vector&, const Vector&, long)> cost;
  std::function<DynamicsEval(const Vector&, const Vector&, long)> dynamics;
  std::function<IneqEval(const Vector&, const Vector&, long)> inequality;
  // Optional; solvers fall back to a finite-difference approximation of the
  // cost gradients when absent.
  std::function<CostHessian(const Vector&, const Vector&, long)> cost_hessian;

  long num_stages() const { return end - start + 1; }
  long num_inputs() const { return end - start; }

  void validate() const {
    if (end <= start) throw ValidationError("horizon must satisfy end > start");
    if (n_x <= 0 || n_u <= 0) throw ValidationError("n_x and n_u must be positive");
    if (n_g < 0) throw ValidationError("n_g must be nonnegative");
    if (!cost) throw ValidationError("missing cost evaluator");
    if (!dynamics) throw ValidationError("missing dynamics evaluator");
    if (n_g > 0 && !inequality) throw ValidationError("missing inequality evaluator");
  }

  // Same evaluators restricted to [a, b]; used for subdomain problems.
  OcpProblem window(long a, long b) const {
    if (a < start || b > end || b <= a)
      throw ValidationError("window outside the horizon");
    OcpProblem w = *this;
    w.start = a;
    w.end = b;
    return w;
  }
};

// Boundary data (x*_start, lambda*_end) defining the subproblem instance.
struct BoundaryCondition {
  Vector x_init;
  Vector lambda_terminal;
};

// Primal-dual iterate over stages [start, end]. Costates follow the adjoint
// convention: lambda_i is the multiplier propagated by
//   lambda_i = grad_x l_i + (grad_x f_i)^T lambda_{i+1} + (grad_x g_i)^T mu_i,
// so lambda_end equals the terminal cost gradient at a KKT point.
struct PrimalDualTrajectory {
  long start = 0;
  long end = 0;
  std::vector<Vector> xs;    // size end-start+1
  std::vector<Vector> us;    // size end-start
  std::vector<Vector> lams;  // size end-start+1
  std::vector<Vector> mus;   // size end-start, empty when n_g == 0

  Vector& x(long i) { return xs[static_cast<size_t>(i - start)]; }
  const Vector& x(long i) const { return xs[static_cast<size_t>(i - start)]; }
  Vector& u(long i) { return us[static_cast<size_t>(i - start)]; }
  const Vector& u(long i) const { return us[static_cast<size_t>(i - start)]; }
  Vector& lam(long i) { return lams[static_cast<size_t>(i - start)]; }
  const Vector& lam(long i) const { return lams[static_cast<size_t>(i - start)]; }
  Vector& mu(long i) { return mus[static_cast<size_t>(i - start)]; }
  const Vector& mu(long i) const { return mus[static_cast<size_t>(i - start)]; }

  bool has_mu() const { return !mus.empty(); }

  static PrimalDualTrajectory zero(const OcpProblem& p, const BoundaryCondition& bc) {
    PrimalDualTrajectory t;
    t.start = p.start;
    t.end = p.end;
    t.xs.assign(static_cast<size_t>(p.num_stages()), Vector::Zero(p.n_x));
    t.us.assign(static_cast<size_t>(p.num_inputs()), Vector::Zero(p.n_u));
    t.lams.assign(static_cast<size_t>(p.num_stages()), Vector::Zero(p.n_x));
    if (p.n_g > 0)
      t.mus.assign(static_cast<size_t>(p.num_inputs()), Vector::Zero(p.n_g));
    t.xs.front() = bc.x_init;
    t.lams.back() = bc.lambda_terminal;
    return t;
  }

  // Copy of stages [a, b]; inputs/multipliers cover a..b-1.
  PrimalDualTrajectory window(long a, long b) const {
    if (a < start || b > end || b <= a)
      throw ValidationError("window outside the trajectory range");
    PrimalDualTrajectory t;
    t.start = a;
    t.end = b;
    for (long i = a; i <= b; ++i) {
      t.xs.push_back(x(i));
      t.lams.push_back(lam(i));
    }
    for (long i = a; i < b; ++i) {
      t.us.push_back(u(i));
      if (has_mu()) t.mus.push_back(mu(i));
    }
    return t;
  }
};

// max over stages of the (x, lambda) deviation; the z-metric of the
// sensitivity analysis. Trajectories must share the stage range.
inline double z_distance(const PrimalDualTrajectory& a, const PrimalDualTrajectory& b) {
  double d = 0.0;
  for (long i = a.start; i <= a.end; ++i) {
    d = std::max(d, inf_norm(a.x(i) - b.x(i)));
    d = std::max(d, inf_norm(a.lam(i) - b.lam(i)));
  }
  return d;
}

inline double z_norm(const PrimalDualTrajectory& a) {
  double d = 0.0;
  for (long i = a.start; i <= a.end; ++i) {
    d = std::max(d, inf_norm(a.x(i)));
    d = std::max(d, inf_norm(a.lam(i)));
  }
  return d;
}

// Infinity norms of the six KKT defect groups. All six vanish exactly at a
// KKT point of the subproblem instance.
struct KktResidual {
  double stationarity_x = 0.0;
  double stationarity_u = 0.0;
  double primal_feas = 0.0;
  double ineq_feas = 0.0;
  double complementarity = 0.0;
  double dual_feas = 0.0;

  double max() const {
    return std::max({stationarity_x, stationarity_u, primal_feas, ineq_feas,
                     complementarity, dual_feas});
  }
};

// Evaluates the KKT defects of `traj` for the subproblem defined by `bc`.
// The terminal stationarity row is lambda*_end - lambda_end; the initial
// primal row is x_start - x*_start.
inline KktResidual evaluate_kkt_residual(const OcpProblem& p,
                                         const PrimalDualTrajectory& traj,
                                         const BoundaryCondition& bc) {
  p.validate();
  if (traj.start != p.start || traj.end != p.end)
    throw ValidationError("trajectory range does not match problem horizon");
  KktResidual r;
  r.primal_feas = inf_norm(traj.x(p.start) - bc.x_init);
  r.stationarity_x = inf_norm(bc.lambda_terminal - traj.lam(p.end));
  for (long i = p.start; i < p.end; ++i) {
    const Vector& xi = traj.x(i);
    const Vector& ui = traj.u(i);
    CostEval c = p.cost(xi, ui, i);
    DynamicsEval f = p.dynamics(xi, ui, i);
    if (!all_finite(c.grad_x) || !all_finite(c.grad_u) || !all_finite(f.next) ||
        !all_finite(f.jac_x) || !all_finite(f.jac_u))
      throw EvaluationError("non-finite evaluator output", i);
    Vector sx = c.grad_x + f.jac_x.transpose() * traj.lam(i + 1) - traj.lam(i);
    Vector su = c.grad_u + f.jac_u.transpose() * traj.lam(i + 1);
    if (p.n_g > 0) {
      IneqEval g = p.inequality(xi, ui, i);
      if (!all_finite(g.value)) throw EvaluationError("non-finite inequality value", i);
      const Vector& mui = traj.mu(i);
      sx += g.jac_x.transpose() * mui;
      su += g.jac_u.transpose() * mui;
      r.ineq_feas = std::max(r.ineq_feas, g.value.cwiseMax(0.0).maxCoeff());
      r.complementarity =
          std::max(r.complementarity, inf_norm(mui.cwiseProduct(g.value)));
      r.dual_feas = std::max(r.dual_feas, (-mui).cwiseMax(0.0).maxCoeff());
    }
    r.stationarity_x = std::max(r.stationarity_x, inf_norm(sx));
    r.stationarity_u = std::max(r.stationarity_u, inf_norm(su));
    r.primal_feas = std::max(r.primal_feas, inf_norm(traj.x(i + 1) - f.next));
  }
  return r;
}

}  // namespace tempo
