#pragma once

#include <cmath>

#include "tempo/discretize.hpp"
#include "tempo/ocp.hpp"

namespace tempo {

// Exothermic reactor with consecutive reactions A -> B -> waste, scaled
// temperature T driven by the coolant input u, unit inflow of A, and unit
// outflow of everything. The payoff is the produced amount of B.
//
//   c_A' = 1 - 1e4 c_A^2 exp(-1/T) - 400 c_A exp(-0.55/T) - c_A
//   c_B' =     1e4 c_A^2 exp(-1/T)                        - c_B
//   T'   = u - T
//
// States stay positive along trajectories of interest; the exponentials clamp
// T away from zero so stray iterates cannot overflow them.
inline OdeRhs cstr_rhs() {
  return [](const Vector& x, const Vector& u) {
    constexpr double t_min = 1e-6;
    const double cA = x[0], T = x[2];
    const double Tc = std::max(T, t_min);
    const double dT = T > t_min ? 1.0 / (Tc * Tc) : 0.0;
    const double k1 = 1e4 * std::exp(-1.0 / Tc);
    const double k2 = 400.0 * std::exp(-0.55 / Tc);

    OdeEval e;
    e.value.resize(3);
    e.value[0] = 1.0 - k1 * cA * cA - k2 * cA - cA;
    e.value[1] = k1 * cA * cA - x[1];
    e.value[2] = u[0] - T;
    e.jac_x = Matrix::Zero(3, 3);
    e.jac_x(0, 0) = -2.0 * k1 * cA - k2 - 1.0;
    e.jac_x(0, 2) = (-k1 * cA * cA - 0.55 * k2 * cA) * dT;
    e.jac_x(1, 0) = 2.0 * k1 * cA;
    e.jac_x(1, 1) = -1.0;
    e.jac_x(1, 2) = k1 * cA * cA * dT;
    e.jac_x(2, 2) = -1.0;
    e.jac_u = Matrix::Zero(3, 1);
    e.jac_u(2, 0) = 1.0;
    return e;
  };
}

constexpr double kCstrInputLo = 0.049;
constexpr double kCstrInputHi = 0.449;

// Steady state for a fixed coolant setting: T = u, then c_A from the scalar
// quadratic balance and c_B from the production rate.
inline Vector cstr_equilibrium(double u) {
  const double T = u;
  const double k1 = 1e4 * std::exp(-1.0 / T);
  const double k2 = 400.0 * std::exp(-0.55 / T);
  const double cA = (-(1.0 + k2) + std::sqrt((1.0 + k2) * (1.0 + k2) + 4.0 * k1)) /
                    (2.0 * k1);
  Vector x(3);
  x << cA, k1 * cA * cA, T;
  return x;
}

struct CstrSteadyState {
  Vector x;       // (c_A, c_B, T) at the best steady operating point
  double u = 0;   // coolant setting there
  Vector lambda;  // stationary costate of the discretized stage problem
};

struct CstrOptions {
  long horizon = 180;
  double rho_reg = 0.5;  // weight of the input move penalty
  // One control move per integrator step. Holding the input across several
  // integration steps adds input curvature of its own to the step map (the
  // within-hold temperature excursion feeds the Arrhenius nonlinearity), and
  // at a 1 s hold that artifact is larger than the rho_reg = 0.5 penalty, so
  // the unregularized problem would no longer be singular.
  double control_dt = 0.25;
  int substeps = 1;
};

// Best steady operating point: the equilibrium family is closed-form in u, so
// maximizing c_B reduces to a line search over the input range.
inline CstrSteadyState cstr_steady_state(const CstrOptions& opts = {}) {
  const auto c_B = [](double u) { return cstr_equilibrium(u)[1]; };
  const int grid = 4096;
  double best_u = kCstrInputLo, best = -1.0;
  for (int i = 0; i <= grid; ++i) {
    const double u = kCstrInputLo + (kCstrInputHi - kCstrInputLo) * i / grid;
    const double v = c_B(u);
    if (v > best) {
      best = v;
      best_u = u;
    }
  }
  const double h = (kCstrInputHi - kCstrInputLo) / grid;
  double lo = std::max(kCstrInputLo, best_u - h);
  double hi = std::min(kCstrInputHi, best_u + h);
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (c_B(m1) < c_B(m2))
      lo = m1;
    else
      hi = m2;
  }
  CstrSteadyState s;
  s.u = 0.5 * (lo + hi);
  s.x = cstr_equilibrium(s.u);

  // stationary costate: lam = grad_x cost + jac_x^T lam with the discrete map
  const auto step = discretize_implicit_euler(cstr_rhs(), 3, 1, opts.control_dt,
                                              opts.substeps);
  Vector us(1);
  us << s.u;
  const DynamicsEval de = step(s.x, us, 0);
  Vector grad(3);
  grad << 0.0, -1.0, 0.0;
  s.lambda = (Matrix::Identity(3, 3) - de.jac_x.transpose())
                 .partialPivLu()
                 .solve(grad);
  return s;
}

// Discrete-time optimal production problem around the steady point: maximize
// the B concentration, keep the input inside its range and the states
// physical, start with 10 percent extra A, and close the horizon with the
// stationary costate so the tail behaves like steady operation.
inline OcpProblem build_cstr_problem(const CstrOptions& opts,
                                     const CstrSteadyState& s) {
  OcpProblem p;
  p.start = 0;
  p.end = opts.horizon;
  p.n_x = 3;
  p.n_u = 1;
  p.n_g = 5;
  const double rho = opts.rho_reg;
  const double u_s = s.u;
  p.cost = [rho, u_s](const Vector& x, const Vector& u, long) {
    CostEval e;
    const double du = u[0] - u_s;
    e.value = -x[1] + rho * du * du;
    e.grad_x = Vector::Zero(3);
    e.grad_x[1] = -1.0;
    e.grad_u = Vector::Constant(1, 2.0 * rho * du);
    return e;
  };
  p.cost_hessian = [rho](const Vector&, const Vector&, long) {
    CostHessian h;
    h.xx = Matrix::Zero(3, 3);
    h.ux = Matrix::Zero(1, 3);
    h.uu = Matrix::Constant(1, 1, 2.0 * rho);
    return h;
  };
  p.dynamics = discretize_implicit_euler(cstr_rhs(), 3, 1, opts.control_dt,
                                         opts.substeps);
  p.inequality = [](const Vector& x, const Vector& u, long) {
    IneqEval e;
    e.value.resize(5);
    e.value << -x[0], -x[1], -x[2], kCstrInputLo - u[0], u[0] - kCstrInputHi;
    e.jac_x = Matrix::Zero(5, 3);
    e.jac_x(0, 0) = -1.0;
    e.jac_x(1, 1) = -1.0;
    e.jac_x(2, 2) = -1.0;
    e.jac_u = Matrix::Zero(5, 1);
    e.jac_u(3, 0) = -1.0;
    e.jac_u(4, 0) = 1.0;
    return e;
  };
  return p;
}

inline BoundaryCondition cstr_boundary(const CstrSteadyState& s) {
  BoundaryCondition bc;
  bc.x_init = s.x;
  bc.x_init[0] *= 1.1;
  bc.lambda_terminal = s.lambda;
  return bc;
}

// Cold-start iterate for the decomposition runs: the reactor sitting at its
// no-production equilibrium (minimum coolant setting), with the only dual
// information available a priori, the terminal costate of the boundary data,
// extended constantly across the horizon. Uses nothing about the optimal
// trajectory itself.
inline PrimalDualTrajectory cstr_cold_iterate(const OcpProblem& p,
                                              const BoundaryCondition& bc) {
  PrimalDualTrajectory z = PrimalDualTrajectory::zero(p, bc);
  const Vector idle = cstr_equilibrium(kCstrInputLo);
  for (auto& x : z.xs) x = idle;
  for (auto& u : z.us) u = Vector::Constant(1, kCstrInputLo);
  for (auto& l : z.lams) l = bc.lambda_terminal;
  z.x(p.start) = bc.x_init;
  return z;
}

}  // namespace tempo
