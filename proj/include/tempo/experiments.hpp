#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "tempo/lq.hpp"
#include "tempo/lq_solver.hpp"
#include "tempo/schwarz.hpp"
#include "tempo/subsolvers.hpp"

namespace tempo {

inline double spectral_radius(const Matrix& A) {
  return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

struct RandomLqOptions {
  int n_x = 3;
  long horizon = 60;
  double spectral_radius = 0.9;
  std::uint64_t seed = 0;
};

// Random single-input instance with A rescaled to the requested spectral
// radius, a well-conditioned random Q, and a controllable (A, B) pair.
inline LqProblemData random_controllable_lq(const RandomLqOptions& o) {
  std::seed_seq seq{static_cast<std::uint64_t>(0x6c71u), o.seed};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const int n = o.n_x;

  LqProblemData d;
  d.start = 0;
  d.end = o.horizon;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 200) throw Error("failed to draw a controllable pair");
    d.A.resize(n, n);
    d.B.resize(n, 1);
    for (int i = 0; i < n; ++i) {
      d.B(i, 0) = uni(rng);
      for (int j = 0; j < n; ++j) d.A(i, j) = uni(rng);
    }
    const double sr = spectral_radius(d.A);
    if (sr > 0) d.A *= o.spectral_radius / sr;
    if (controllability_check(d.A, d.B).controllable) break;
  }
  Matrix Mq(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Mq(i, j) = uni(rng);
  d.Q = Mq.transpose() * Mq / n + 0.2 * Matrix::Identity(n, n);
  d.R = Matrix::Constant(1, 1, 1.0 + 0.5 * uni(rng));
  d.c.resize(n);
  d.f_lin.resize(n);
  for (int i = 0; i < n; ++i) {
    d.c[i] = 0.3 * uni(rng);
    d.f_lin[i] = 0.5 * uni(rng);
  }
  return d;
}

inline BoundaryCondition random_boundary(int n_x, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint64_t>(0xb0a7u), seed};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  BoundaryCondition bc{Vector(n_x), Vector(n_x)};
  for (int i = 0; i < n_x; ++i) {
    bc.x_init[i] = uni(rng);
    bc.lambda_terminal[i] = uni(rng);
  }
  return bc;
}

struct OmegaSweep {
  long omega = 0;
  SchwarzResult result;
  double rate = std::numeric_limits<double>::quiet_NaN();
};

// Runs the sweep once per overlap against a common monolithic reference and
// measures the observed contraction of the error to it.
inline std::vector<OmegaSweep> lq_omega_sweep(const LqProblemData& d,
                                              const BoundaryCondition& bc,
                                              const std::vector<long>& omegas,
                                              SchwarzConfig cfg,
                                              const SolverOptions& sub_opts = {}) {
  auto [ref, ref_rep] = solve_lq(d, bc, sub_opts);
  if (!ref_rep.converged) throw Error("monolithic reference solve failed");
  const double ref_norm = z_norm(ref);

  OcpProblem p = make_lq_problem(d);
  const Subsolver sub = make_lq_subsolver(d, sub_opts);
  std::vector<OmegaSweep> out;
  for (long w : omegas) {
    OmegaSweep row;
    row.omega = w;
    cfg.overlap = w;
    cfg.reference = &ref;
    row.result = schwarz_solve(p, bc, cfg, sub);
    try {
      row.rate = observed_contraction(row.result.log, ref_norm);
    } catch (const Error&) {
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace tempo
