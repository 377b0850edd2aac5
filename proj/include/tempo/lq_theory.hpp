#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "tempo/lq.hpp"

namespace tempo {

// Spectral and decay certificates for single-input time-invariant LQ
// problems. Everything here works on the symmetric saddle form
//
//   [ H  G^T ] [ w ]   [ zeta ]
//   [ G   0  ] [ nu ] = [ xi  ],   nu = -lambda,
//
// with the stage variables interleaved as w = (x_a, u_a, x_{a+1}, ..., x_b)
// and the constraint rows stacked as (initial condition, dynamics rows).
// G has the banded null-space basis Z and right inverse Y built from a
// deadbeat control sequence, which is what makes every certificate
// horizon-independent.

namespace detail {

// deadbeat response data: an impulse entering through the input dies out in
// n_x steps, an impulse entering through the state likewise
struct Deadbeat {
  std::vector<Vector> xbar;  // x response to a unit input impulse, steps 1..n_x
  std::vector<double> ubar;  // the input sequence that kills it
  std::vector<Matrix> X;     // state response to a unit state impulse, X[0] = I
  std::vector<Matrix> U;     // 1 x n_x rows of the killing feedback
};

inline Deadbeat deadbeat_response(const Matrix& A, const Vector& b) {
  const int n = static_cast<int>(A.rows());
  Matrix ctrb_rev(n, n);
  Vector col = b;
  for (int m = n; m >= 1; --m) {
    ctrb_rev.col(m - 1) = col;
    col = A * col;
  }
  // col now holds A^n b; reuse the powers for the matrix right-hand side
  Matrix An = Matrix::Identity(n, n);
  for (int m = 0; m < n; ++m) An = A * An;
  Eigen::FullPivLU<Matrix> lu(ctrb_rev);
  if (!lu.isInvertible())
    throw ValidationError("pair (A, b) is not controllable");
  const Matrix Ustack = lu.solve(-An);  // row m-1 is U_m

  Deadbeat d;
  d.X.resize(static_cast<size_t>(n));
  d.U.resize(static_cast<size_t>(n));
  for (int m = 0; m < n; ++m) d.U[static_cast<size_t>(m)] = Ustack.row(m);
  Matrix Xm = Matrix::Identity(n, n);
  for (int m = 0; m < n; ++m) {
    d.X[static_cast<size_t>(m)] = Xm;
    Xm = A * Xm + b * Ustack.row(m);
  }
  d.xbar.resize(static_cast<size_t>(n));
  d.ubar.resize(static_cast<size_t>(n));
  for (int m = 0; m < n; ++m) {
    d.xbar[static_cast<size_t>(m)] = d.X[static_cast<size_t>(m)] * b;
    d.ubar[static_cast<size_t>(m)] = (d.U[static_cast<size_t>(m)] * b)(0);
  }
  return d;
}

}  // namespace detail

// Null-space basis Z, right inverse Y, and the saddle blocks for the window
// {a,...,b}. Z has one column per input stage, Y one column block per
// constraint block; both are banded with band n_x thanks to the deadbeat
// construction.
struct SaddleBasis {
  Matrix Z, Y, G, H;
  Vector zeta, xi;
  long a = 0, b = 0;
  int n_x = 0;

  long x_slot(long i) const { return (i - a) * (n_x + 1); }
  long u_slot(long i) const { return (i - a) * (n_x + 1) + n_x; }
  long row_block(long t) const { return t * n_x; }  // t = 0: init, t >= 1: dyn a+t-1
};

inline SaddleBasis build_saddle_basis(const LqProblemData& d,
                                      const BoundaryCondition& bc) {
  d.validate();
  if (d.n_u() != 1)
    throw ValidationError("certificates require a single input");
  const int n = d.n_x();
  const long T = d.end - d.start;
  if (T < n + 2)
    throw ValidationError("horizon too short for the banded basis");
  const auto db = detail::deadbeat_response(d.A, d.B.col(0));

  SaddleBasis s;
  s.a = d.start;
  s.b = d.end;
  s.n_x = n;
  const long n_w = (T + 1) * n + T;
  const long n_c = (T + 1) * n;

  s.Z = Matrix::Zero(n_w, T);
  for (long j = 0; j < T; ++j) {
    s.Z(s.u_slot(d.start + j), j) = 1.0;
    for (int m = 1; m <= n; ++m) {
      const long t = j + m;
      if (t <= T) s.Z.block(s.x_slot(d.start + t), j, n, 1) = db.xbar[m - 1];
      if (t <= T - 1) s.Z(s.u_slot(d.start + t), j) = db.ubar[m - 1];
    }
  }

  s.Y = Matrix::Zero(n_w, n_c);
  for (long blk = 0; blk <= T; ++blk) {
    const long col = blk * n;
    for (int m = 1; m <= n; ++m) {
      const long t = blk + m - 1;  // anchor stage of the impulse
      if (t <= T) s.Y.block(s.x_slot(d.start + t), col, n, n) = db.X[m - 1];
      if (t <= T - 1) s.Y.block(s.u_slot(d.start + t), col, 1, n) = db.U[m - 1];
    }
  }

  s.G = Matrix::Zero(n_c, n_w);
  s.G.block(0, 0, n, n) = Matrix::Identity(n, n);
  for (long t = 0; t < T; ++t) {
    const long row = (t + 1) * n;
    const long i = d.start + t;
    s.G.block(row, s.x_slot(i), n, n) = -d.A;
    s.G.block(row, s.u_slot(i), n, 1) = -d.B;
    s.G.block(row, s.x_slot(i + 1), n, n) = Matrix::Identity(n, n);
  }

  s.H = Matrix::Zero(n_w, n_w);
  s.zeta = Vector::Zero(n_w);
  s.xi = Vector::Zero(n_c);
  for (long t = 0; t < T; ++t) {
    const long i = d.start + t;
    s.H.block(s.x_slot(i), s.x_slot(i), n, n) = 2.0 * d.Q;
    s.H(s.u_slot(i), s.u_slot(i)) = 2.0 * d.R(0, 0);
    s.zeta.segment(s.x_slot(i), n) = d.f_lin;
    s.xi.segment(s.row_block(t), n) = t == 0 ? bc.x_init : d.c;
  }
  s.xi.segment(s.row_block(T), n) = d.c;
  s.zeta.segment(s.x_slot(d.end), n) = -bc.lambda_terminal;
  return s;
}

struct LConstants {
  double H = 0, Z = 0, Zt = 0, Y = 0, Yt = 0, W = 0, Wt = 0, L = 0;
};

struct TheoryBounds {
  double lambda1 = 0, lambda2 = 0, rho = 0;
  long N_s = 0;
  LConstants L;
  std::vector<double> epsilon_prefix;

  // decay envelope for the boundary-data sensitivity at seam distance d
  double epsilon(long d) const {
    const double c = L.L * L.L * (2.0 * static_cast<double>(N_s) + 1.0) / lambda1 + 1.0;
    return c * std::pow(rho, static_cast<double>(d - 2 * N_s - 1));
  }
};

namespace detail {

inline long stage_of_slot(long slot, int n_x, bool& is_u) {
  const long t = slot / (n_x + 1);
  is_u = slot % (n_x + 1) == n_x;
  return t;
}

}  // namespace detail

// Uniform-in-horizon spectral bounds and decay rate for the reduced Hessian
// Z^T H Z, plus the structural reach N_s of the basis. Everything is built
// from the deadbeat response, so no horizon is involved except for the scan
// that measures N_s, which is run at two horizons to confirm it saturated.
inline TheoryBounds compute_bounds(const LqProblemData& d) {
  d.validate();
  if (d.n_u() != 1)
    throw ValidationError("certificates require a single input");
  const int n = d.n_x();
  const auto db = detail::deadbeat_response(d.A, d.B.col(0));
  const double r = d.R(0, 0);

  // window matrix: the stage variables every null coefficient touches
  Matrix Zhat = Matrix::Zero(n + 1, n + 1);
  Zhat(n, n) = 1.0;
  for (int m = 1; m <= n; ++m) {
    Zhat.block(0, n - m, n, 1) = db.xbar[m - 1];
    Zhat(n, n - m) = db.ubar[m - 1];
  }
  Matrix Hhat = Matrix::Zero(n + 1, n + 1);
  Hhat.topLeftCorner(n, n) = 2.0 * d.Q;
  Hhat(n, n) = 2.0 * r;
  const Matrix Hwin = Zhat.transpose() * Hhat * Zhat;

  TheoryBounds tb;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Hwin + Hwin.transpose()));
  tb.lambda1 = es.eigenvalues().minCoeff();

  LConstants& Lc = tb.L;
  Lc.H = std::max((2.0 * d.Q).cwiseAbs().rowwise().sum().maxCoeff(), 2.0 * std::abs(r));
  Lc.Z = Zhat.cwiseAbs().rowwise().sum().maxCoeff();
  Lc.Zt = 1.0;
  for (int m = 0; m < n; ++m)
    Lc.Zt += db.xbar[static_cast<size_t>(m)].lpNorm<1>() +
             std::abs(db.ubar[static_cast<size_t>(m)]);
  Matrix xrows(n, n * n), stack((n + 1) * n, n);
  Vector urow = Vector::Zero(n * n);
  for (int m = 0; m < n; ++m) {
    xrows.block(0, m * n, n, n) = db.X[static_cast<size_t>(m)];
    urow.segment(m * n, n) = db.U[static_cast<size_t>(m)].transpose();
    stack.block(m * (n + 1), 0, n, n) = db.X[static_cast<size_t>(m)];
    stack.block(m * (n + 1) + n, 0, 1, n) = db.U[static_cast<size_t>(m)];
  }
  Lc.Y = std::max(xrows.cwiseAbs().rowwise().sum().maxCoeff(), urow.lpNorm<1>());
  Lc.Yt = stack.cwiseAbs().colwise().sum().maxCoeff();
  Lc.W = Lc.Yt * Lc.H * Lc.Z;
  Lc.Wt = Lc.Zt * Lc.H * std::max(Lc.Y, Lc.Yt);
  Lc.L = std::max(std::max(Lc.Z, Lc.Zt), std::max(Lc.W, Lc.Wt));

  tb.lambda2 = Lc.L * Lc.L * Lc.H;
  if (tb.lambda1 <= 1e-12 * tb.lambda2)
    throw ValidationError("reduced Hessian is numerically singular; no certificate");
  tb.rho = (tb.lambda2 - tb.lambda1) / (tb.lambda2 + tb.lambda1);

  // structural reach: how many stages a basis column or a constraint response
  // spans; measured from the assembled matrices and confirmed horizon-stable
  auto scan = [&](long T) {
    LqProblemData ref = d;
    ref.start = 0;
    ref.end = T;
    BoundaryCondition bc{Vector::Zero(n), Vector::Zero(n)};
    const SaddleBasis s = build_saddle_basis(ref, bc);
    const Matrix W = s.Y.transpose() * s.H * s.Z;
    long reach = 0;
    const double ztol = 1e-12 * s.Z.cwiseAbs().maxCoeff();
    for (long slot = 0; slot < s.Z.rows(); ++slot) {
      bool is_u = false;
      const long ts = detail::stage_of_slot(slot, n, is_u);
      if (is_u) continue;
      for (long j = 0; j < s.Z.cols(); ++j)
        if (std::abs(s.Z(slot, j)) > ztol) reach = std::max(reach, std::abs(ts - j));
    }
    const double wtol = 1e-12 * std::max(W.cwiseAbs().maxCoeff(), 1.0);
    for (long blk = 0; blk <= T; ++blk)
      for (long rr = blk * n; rr < (blk + 1) * n; ++rr)
        for (long j = 0; j < W.cols(); ++j)
          if (std::abs(W(rr, j)) > wtol) reach = std::max(reach, std::abs(blk - j));
    return reach + 1;
  };
  const long T_ref = 4L * n + 8;
  tb.N_s = scan(T_ref);
  if (scan(2 * T_ref) != tb.N_s)
    throw Error("structural reach did not stabilize across horizons");

  tb.epsilon_prefix.resize(50);
  for (long k = 0; k < 50; ++k) tb.epsilon_prefix[static_cast<size_t>(k)] = tb.epsilon(k);
  return tb;
}

// Largest violation of an entrywise geometric decay claim
// |X_ij| <= coeff * rho^(|i-j|/band). With floor_exponent the exponent is
// truncated to an integer, which only weakens the claim.
inline double max_decay_violation(const Matrix& X, double coeff, double rho,
                                  long band, bool floor_exponent = false) {
  double worst = -std::numeric_limits<double>::infinity();
  for (long i = 0; i < X.rows(); ++i)
    for (long j = 0; j < X.cols(); ++j) {
      double e = static_cast<double>(std::abs(i - j)) / static_cast<double>(band);
      if (floor_exponent) e = std::floor(e);
      worst = std::max(worst, std::abs(X(i, j)) - coeff * std::pow(rho, e));
    }
  return worst;
}

struct DecayCheck {
  double gz_rel = 0, gy_rel = 0;
  double eig_min = 0, eig_max = 0;
  double decay_violation = 0;          // against rho^(|i-j|/n_x)
  double decay_violation_floored = 0;  // against rho^(floor(|i-j|/n_x))
  long bandwidth = 0;                  // of Z^T H Z, in stage units
};

// Checks the assembled certificates on one concrete horizon: Z annihilates
// G, Y right-inverts it, the reduced Hessian spectrum sits inside
// [lambda1, lambda2], its bandwidth is n_x, and its inverse decays at the
// certified rate.
inline DecayCheck verify_decay(const LqProblemData& d, const TheoryBounds& tb) {
  const long T = d.end - d.start;
  if ((T + 1) * d.n_x() > 5000)
    throw ValidationError("horizon too large for a dense decay check");
  BoundaryCondition bc{Vector::Zero(d.n_x()), Vector::Zero(d.n_x())};
  const SaddleBasis s = build_saddle_basis(d, bc);

  DecayCheck out;
  const Matrix GZ = s.G * s.Z;
  const Matrix GY = s.G * s.Y;
  const double gscale = s.G.cwiseAbs().maxCoeff();
  out.gz_rel = GZ.cwiseAbs().maxCoeff() /
               std::max(1.0, gscale * s.Z.cwiseAbs().maxCoeff());
  out.gy_rel = (GY - Matrix::Identity(GY.rows(), GY.cols())).cwiseAbs().maxCoeff() /
               std::max(1.0, gscale * s.Y.cwiseAbs().maxCoeff());

  Matrix S = s.Z.transpose() * s.H * s.Z;
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  out.eig_min = es.eigenvalues().minCoeff();
  out.eig_max = es.eigenvalues().maxCoeff();

  const double stol = 1e-12 * S.cwiseAbs().maxCoeff();
  for (long i = 0; i < S.rows(); ++i)
    for (long j = 0; j < S.cols(); ++j)
      if (std::abs(S(i, j)) > stol)
        out.bandwidth = std::max(out.bandwidth, std::abs(i - j));

  const Matrix Hbar = S.llt().solve(Matrix::Identity(S.rows(), S.cols()));
  out.decay_violation =
      max_decay_violation(Hbar, 1.0 / tb.lambda1, tb.rho, d.n_x(), false);
  out.decay_violation_floored =
      max_decay_violation(Hbar, 1.0 / tb.lambda1, tb.rho, d.n_x(), true);
  return out;
}

struct SensitivityDelta {
  std::vector<Vector> dx, du, dlam;
};

// Exact response of the optimal trajectory to boundary-data changes, from the
// null-space factorization of the saddle system. Matches the difference of
// two solves to solver precision and is what the decay envelope bounds.
inline SensitivityDelta closed_form_sensitivity(const LqProblemData& d,
                                                const Vector& dx_init,
                                                const Vector& dlam_terminal) {
  const int n = d.n_x();
  const long T = d.end - d.start;
  if ((T + 1) * n > 5000)
    throw ValidationError("horizon too large for a dense sensitivity solve");
  if (dx_init.size() != n || dlam_terminal.size() != n)
    throw ValidationError("perturbation has wrong dimensions");
  BoundaryCondition bc{Vector::Zero(n), Vector::Zero(n)};
  const SaddleBasis s = build_saddle_basis(d, bc);

  Vector dzeta = Vector::Zero(s.H.rows());
  dzeta.segment(s.x_slot(d.end), n) = -dlam_terminal;
  Vector dxi = Vector::Zero(s.G.rows());
  dxi.segment(0, n) = dx_init;

  const Matrix W = s.Y.transpose() * s.H * s.Z;
  Matrix S = s.Z.transpose() * s.H * s.Z;
  S = 0.5 * (S + S.transpose()).eval();
  const Vector wz = S.llt().solve(s.Z.transpose() * dzeta - W.transpose() * dxi);
  const Vector dw = s.Z * wz + s.Y * dxi;
  const Vector dnu = s.Y.transpose() * (dzeta - s.H * dw);

  SensitivityDelta out;
  out.dx.resize(static_cast<size_t>(T + 1));
  out.du.resize(static_cast<size_t>(T));
  out.dlam.resize(static_cast<size_t>(T + 1));
  for (long t = 0; t <= T; ++t) {
    out.dx[static_cast<size_t>(t)] = dw.segment(s.x_slot(d.start + t), n);
    out.dlam[static_cast<size_t>(t)] = -dnu.segment(t * n, n);
    if (t < T) {
      out.du[static_cast<size_t>(t)] = dw.segment(s.u_slot(d.start + t), 1);
    }
  }
  return out;
}

}  // namespace tempo
