#pragma once

#include <utility>

#include "tempo/lq_solver.hpp"
#include "tempo/nlp_solver.hpp"
#include "tempo/schwarz.hpp"

namespace tempo {

// Window solver backed by the direct Riccati method; warm starts are ignored.
inline Subsolver make_lq_subsolver(LqProblemData data, SolverOptions opts = {}) {
  return [data = std::move(data), opts](long a, long b, const BoundaryCondition& bc,
                                        const PrimalDualTrajectory*) {
    LqProblemData w = data;
    w.start = a;
    w.end = b;
    return solve_lq(w, bc, opts);
  };
}

// Window solver backed by the interior-point method. The problem's stage
// callbacks are shared across subdomains, so they must be safe to call
// concurrently.
inline Subsolver make_nlp_subsolver(OcpProblem p, SolverOptions opts = {}) {
  return [p = std::move(p), opts](long a, long b, const BoundaryCondition& bc,
                                  const PrimalDualTrajectory* warm) {
    return solve_nlp(p.window(a, b), bc, opts, warm);
  };
}

}  // namespace tempo
