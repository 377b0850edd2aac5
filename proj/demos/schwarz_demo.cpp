// Solves a random linear-quadratic horizon monolithically and with the
// overlapping sweep at a few overlaps, printing how the seam residuals fall.

#include <cstdio>

#include "tempo/tempo.hpp"

int main() {
  using namespace tempo;

  RandomLqOptions o;
  o.n_x = 3;
  o.horizon = 120;
  o.spectral_radius = 0.8;
  o.seed = 7;
  const LqProblemData d = random_controllable_lq(o);
  const BoundaryCondition bc = random_boundary(o.n_x, 1);

  auto [ref, rep] = solve_lq(d, bc);
  std::printf("monolithic: kkt=%.3e  %s\n", rep.final_kkt.max(),
              rep.converged ? "converged" : "not converged");

  SchwarzConfig cfg;
  cfg.blocks = 4;
  cfg.tol_primal = cfg.tol_dual = 1e-10;
  cfg.max_iterations = 60;
  cfg.reference = &ref;
  for (const long omega : {2L, 6L, 12L}) {
    cfg.overlap = omega;
    const SchwarzResult res =
        schwarz_solve(make_lq_problem(d), bc, cfg, make_lq_subsolver(d));
    std::printf("overlap %2ld: %2d iterations, final err=%.3e\n", omega,
                res.iterations, res.log.back().err_inf);
    for (const auto& rec : res.log)
      std::printf("   it %2d  r=%.3e  s=%.3e  err=%.3e\n", rec.iter, rec.r, rec.s,
                  rec.err_inf);
  }
  return 0;
}
