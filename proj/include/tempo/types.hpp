#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>

namespace tempo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problem data fails a structural check (dimension, symmetry, definiteness).
struct ValidationError : Error {
  using Error::Error;
};

// An evaluator returned non-finite values or threw; `stage` is the offending
// stage index when known, -1 otherwise.
struct EvaluationError : Error {
  explicit EvaluationError(const std::string& msg, long stage_ = -1)
      : Error(msg), stage(stage_) {}
  long stage = -1;
};

// A stage factorization broke down (singular KKT, Assumption 1 violated).
struct FactorizationError : Error {
  explicit FactorizationError(const std::string& msg, long stage_ = -1)
      : Error(msg), stage(stage_) {}
  long stage = -1;
};

// Newton on an implicit step failed; carries the last iterate and residual.
struct NewtonError : Error {
  NewtonError(const std::string& msg, Vector iterate, double residual_)
      : Error(msg), last_iterate(std::move(iterate)), residual(residual_) {}
  Vector last_iterate;
  double residual = 0.0;
};

inline double inf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace tempo
