#pragma once

#include <Eigen/QR>

#include "tempo/ocp.hpp"
#include "tempo/types.hpp"

namespace tempo {

// Time-invariant linear-quadratic problem on stages [start, end]:
//   min sum_i x_i^T Q x_i - f_lin^T x_i + u_i^T R u_i + lambda*_end^T x_end
//   s.t. x_{i+1} = A x_i + B u_i + c,  x_start fixed.
struct LqProblemData {
  Matrix A;
  Matrix B;
  Vector c;
  Matrix Q;
  Matrix R;
  Vector f_lin;
  long start = 0;
  long end = 0;

  int n_x() const { return static_cast<int>(A.rows()); }
  int n_u() const { return static_cast<int>(B.cols()); }

  void validate() const {
    const auto nx = A.rows();
    const auto nu = B.cols();
    if (nx == 0 || A.cols() != nx) throw ValidationError("A must be square and nonempty");
    if (B.rows() != nx || nu == 0) throw ValidationError("B must be n_x by n_u");
    if (c.size() != nx) throw ValidationError("c must have length n_x");
    if (f_lin.size() != nx) throw ValidationError("f_lin must have length n_x");
    if (end <= start) throw ValidationError("horizon must satisfy end > start");
    check_spd(Q, nx, "Q");
    check_spd(R, nu, "R");
  }

 private:
  static void check_spd(const Matrix& M, Eigen::Index n, const char* name) {
    if (M.rows() != n || M.cols() != n)
      throw ValidationError(std::string(name) + " has wrong dimensions");
    const double scale = M.cwiseAbs().maxCoeff();
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
      throw ValidationError(std::string(name) + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 1e-12 * std::max(1.0, hi))
      throw ValidationError(std::string(name) + " is not positive definite");
  }
};

struct ControllabilityResult {
  bool controllable = false;
  int rank = 0;
  Matrix ctrb;  // [B AB ... A^{n_x-1}B]
};

// Kalman rank test via rank-revealing QR; the pivot threshold is relative,
// so the verdict is invariant under B -> alpha B.
inline ControllabilityResult controllability_check(const Matrix& A, const Matrix& B) {
  const auto nx = A.rows();
  if (A.cols() != nx || B.rows() != nx)
    throw ValidationError("controllability_check: incompatible dimensions");
  ControllabilityResult res;
  res.ctrb.resize(nx, nx * B.cols());
  Matrix block = B;
  for (Eigen::Index k = 0; k < nx; ++k) {
    res.ctrb.middleCols(k * B.cols(), B.cols()) = block;
    block = A * block;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr;
  qr.setThreshold(1e-10);
  qr.compute(res.ctrb);
  res.rank = static_cast<int>(qr.rank());
  res.controllable = res.rank == nx;
  return res;
}

// Wraps the data as an OcpProblem with exact gradients and Hessians.
inline OcpProblem make_lq_problem(const LqProblemData& data) {
  data.validate();
  OcpProblem p;
  p.start = data.start;
  p.end = data.end;
  p.n_x = data.n_x();
  p.n_u = data.n_u();
  p.n_g = 0;
  p.cost = [data](const Vector& x, const Vector& u, long) {
    CostEval c;
    c.value = x.dot(data.Q * x) - data.f_lin.dot(x) + u.dot(data.R * u);
    c.grad_x = 2.0 * data.Q * x - data.f_lin;
    c.grad_u = 2.0 * data.R * u;
    return c;
  };
  p.dynamics = [data](const Vector& x, const Vector& u, long) {
    DynamicsEval d;
    d.next = data.A * x + data.B * u + data.c;
    d.jac_x = data.A;
    d.jac_u = data.B;
    return d;
  };
  p.cost_hessian = [data](const Vector&, const Vector&, long) {
    CostHessian h;
    h.xx = 2.0 * data.Q;
    h.ux = Matrix::Zero(data.n_u(), data.n_x());
    h.uu = 2.0 * data.R;
    return h;
  };
  return p;
}

}  // namespace tempo
