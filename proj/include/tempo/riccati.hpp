#pragma once

#include <Eigen/Cholesky>
#include <vector>

#include "tempo/types.hpp"

namespace tempo {

// One stage of the two-point boundary value KKT system
//   x_{i+1} = A x_i + B u_i + c_i
//   lambda_i = Qxx x_i + Sux^T u_i + q_i + A^T lambda_{i+1}
//   0       = Sux x_i + Ruu u_i + r_i + B^T lambda_{i+1}
// with x fixed at the left end and lambda fixed at the right end.
struct TpbvpStage {
  Matrix A;
  Matrix B;
  Matrix Qxx;
  Matrix Sux;
  Matrix Ruu;
};

struct TpbvpRhs {
  std::vector<Vector> q;  // per stage, size T
  std::vector<Vector> r;
  std::vector<Vector> c;
  Vector x_init;
  Vector lambda_terminal;
};

struct TpbvpSolution {
  std::vector<Vector> xs;    // size T+1
  std::vector<Vector> us;    // size T
  std::vector<Vector> lams;  // size T+1
};

// Riccati-form block elimination of the banded symmetric-indefinite KKT
// matrix. The matrix factorization (P, K, Cholesky of the input Schur
// complements) depends only on the stage blocks, so one factorization serves
// any number of right-hand sides; cost is linear in the number of stages.
class TpbvpFactorization {
 public:
  // `stage_offset` is only used to report the absolute stage of a breakdown.
  TpbvpFactorization(const std::vector<TpbvpStage>& stages, long stage_offset = 0)
      : stages_(stages) {
    const size_t T = stages.size();
    if (T == 0) throw ValidationError("tpbvp: empty horizon");
    const auto nx = stages[0].A.rows();
    P_.resize(T + 1);
    K_.resize(T);
    Shat_.resize(T);
    llts_.resize(T);
    P_[T] = Matrix::Zero(nx, nx);
    for (size_t i = T; i-- > 0;) {
      const TpbvpStage& s = stages[i];
      const Matrix& Pn = P_[i + 1];
      Matrix Rhat = s.Ruu + s.B.transpose() * Pn * s.B;
      llts_[i].compute(Rhat);
      if (llts_[i].info() != Eigen::Success || !Rhat.allFinite())
        throw FactorizationError("singular stage system in Riccati sweep",
                                 stage_offset + static_cast<long>(i));
      Shat_[i] = s.Sux + s.B.transpose() * Pn * s.A;
      K_[i] = llts_[i].solve(Shat_[i]);
      Matrix P = s.Qxx + s.A.transpose() * Pn * s.A - Shat_[i].transpose() * K_[i];
      P_[i] = 0.5 * (P + P.transpose());
      if (!P_[i].allFinite())
        throw FactorizationError("non-finite Riccati iterate",
                                 stage_offset + static_cast<long>(i));
    }
  }

  TpbvpSolution solve(const TpbvpRhs& rhs) const {
    const size_t T = stages_.size();
    std::vector<Vector> p(T + 1), k(T);
    p[T] = rhs.lambda_terminal;
    for (size_t i = T; i-- > 0;) {
      const TpbvpStage& s = stages_[i];
      Vector Pc_p = P_[i + 1] * rhs.c[i] + p[i + 1];
      k[i] = -llts_[i].solve(rhs.r[i] + s.B.transpose() * Pc_p);
      p[i] = rhs.q[i] + s.A.transpose() * Pc_p + Shat_[i].transpose() * k[i];
    }
    TpbvpSolution sol;
    sol.xs.resize(T + 1);
    sol.us.resize(T);
    sol.lams.resize(T + 1);
    sol.xs[0] = rhs.x_init;
    for (size_t i = 0; i < T; ++i) {
      const TpbvpStage& s = stages_[i];
      sol.us[i] = -K_[i] * sol.xs[i] + k[i];
      sol.xs[i + 1] = s.A * sol.xs[i] + s.B * sol.us[i] + rhs.c[i];
      sol.lams[i] = P_[i] * sol.xs[i] + p[i];
    }
    sol.lams[T] = rhs.lambda_terminal;
    return sol;
  }

  const Matrix& cost_to_go(size_t i) const { return P_[i]; }

 private:
  std::vector<TpbvpStage> stages_;
  std::vector<Matrix> P_;
  std::vector<Matrix> K_;
  std::vector<Matrix> Shat_;
  std::vector<Eigen::LLT<Matrix>> llts_;
};

}  // namespace tempo
