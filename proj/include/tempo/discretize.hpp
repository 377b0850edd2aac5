#pragma once

#include <Eigen/LU>
#include <functional>

#include "tempo/ocp.hpp"
#include "tempo/types.hpp"

namespace tempo {

// Continuous-time right-hand side dx/dt = f(x, u) with Jacobians.
struct OdeEval {
  Vector value;
  Matrix jac_x;
  Matrix jac_u;
};

using OdeRhs = std::function<OdeEval(const Vector&, const Vector&)>;

// Builds the discrete map x+ = step(x, u) over one control interval of
// length `dt`, integrating with `substeps` implicit-Euler substeps. Each
// substep solves y = x + h f(y, u) by Newton; the returned Jacobians are the
// exact sensitivities of the converged substep chain (implicit function
// theorem, accumulated forward).
inline std::function<DynamicsEval(const Vector&, const Vector&, long)>
discretize_implicit_euler(OdeRhs rhs, int n_x, int n_u, double dt, int substeps,
                          double newton_tol = 1e-12, int max_newton = 50) {
  if (substeps < 1) throw ValidationError("substeps must be >= 1");
  if (dt <= 0.0) throw ValidationError("dt must be positive");
  const double h = dt / substeps;
  return [rhs, n_x, n_u, h, substeps, newton_tol, max_newton](
             const Vector& x, const Vector& u, long stage) {
    DynamicsEval out;
    out.jac_x = Matrix::Identity(n_x, n_x);
    out.jac_u = Matrix::Zero(n_x, n_u);
    Vector y = x;
    for (int s = 0; s < substeps; ++s) {
      const Vector x_prev = y;
      // predictor: explicit Euler
      OdeEval e0 = rhs(x_prev, u);
      if (!all_finite(e0.value)) throw EvaluationError("non-finite ode rhs", stage);
      y = x_prev + h * e0.value;
      OdeEval e = rhs(y, u);
      double res = inf_norm(y - x_prev - h * e.value);
      int it = 0;
      while (res > newton_tol) {
        if (++it > max_newton)
          throw NewtonError("implicit Euler substep did not converge", y, res);
        if (!all_finite(e.value) || !all_finite(e.jac_x))
          throw EvaluationError("non-finite ode rhs", stage);
        Matrix J = Matrix::Identity(n_x, n_x) - h * e.jac_x;
        y -= J.partialPivLu().solve(y - x_prev - h * e.value);
        e = rhs(y, u);
        res = inf_norm(y - x_prev - h * e.value);
      }
      // d y / d x_prev = (I - h jac_x(y))^{-1}, d y / d u = same * h jac_u(y)
      Matrix D = (Matrix::Identity(n_x, n_x) - h * e.jac_x).partialPivLu().inverse();
      out.jac_x = D * out.jac_x;
      out.jac_u = D * (out.jac_u + h * e.jac_u);
    }
    out.next = y;
    return out;
  };
}

}  // namespace tempo
