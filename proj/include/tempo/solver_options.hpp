#pragma once

#include "tempo/ocp.hpp"

namespace tempo {

struct SolverOptions {
  double kkt_tol = 1e-8;
  int max_newton_iters = 100;
  double barrier_initial = 0.1;
  double barrier_reduction = 0.2;   // kappa
  double fraction_to_boundary = 0.995;
  double reg_min = 1e-12;           // smallest inertia-correcting delta
  bool dynamics_curvature = true;   // keep lam' * d2f in the step Hessian
};

// Non-convergence is reported here, not thrown; `final_kkt` always describes
// the returned trajectory.
struct SolveReport {
  bool converged = false;
  int iterations = 0;
  KktResidual final_kkt;
  double wall_time = 0.0;  // seconds
};

}  // namespace tempo
