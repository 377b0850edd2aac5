#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "tempo/experiments.hpp"
#include "tempo/lq_solver.hpp"

using namespace tempo;

TEST_CASE("scalar one-step problem matches the hand solution") {
  LqProblemData d;
  d.A = d.B = d.Q = d.R = Matrix::Constant(1, 1, 1.0);
  d.c = d.f_lin = Vector::Zero(1);
  d.start = 1;
  d.end = 2;
  BoundaryCondition bc{Vector::Constant(1, 1.0), Vector::Constant(1, 1.0)};

  auto [traj, rep] = solve_lq(d, bc);
  REQUIRE(rep.converged);
  CHECK(traj.u(1)[0] == Catch::Approx(-0.5).margin(1e-12));
  CHECK(traj.x(2)[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(traj.lam(2)[0] == Catch::Approx(1.0).margin(1e-12));
  // costate recursion lam_1 = 2 Q x_1 + A^T lam_2
  CHECK(traj.lam(1)[0] == Catch::Approx(3.0).margin(1e-12));
  // optimal cost of the discrete stage sum: x1^2 + u1^2 = 1.25
  const double cost = traj.x(1)[0] * traj.x(1)[0] + traj.u(1)[0] * traj.u(1)[0];
  CHECK(cost == Catch::Approx(1.25).margin(1e-12));
}

TEST_CASE("random instances match the dense factorization") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    RandomLqOptions o;
    o.n_x = 1 + static_cast<int>(seed % 5);
    o.horizon = 20 + static_cast<long>(seed) * 5;
    o.seed = seed;
    const LqProblemData d = random_controllable_lq(o);
    const BoundaryCondition bc = random_boundary(o.n_x, seed);

    auto [traj, rep] = solve_lq(d, bc);
    REQUIRE(rep.converged);
    const PrimalDualTrajectory ref = oracle::dense_lq_solve(d, bc);
    CAPTURE(seed, o.n_x, o.horizon);
    CHECK(z_distance(traj, ref) < 1e-9);
    for (long i = d.start; i < d.end; ++i)
      CHECK(inf_norm(traj.u(i) - ref.u(i)) < 1e-9);
  }
}

TEST_CASE("solution satisfies the stage stationarity system") {
  RandomLqOptions o;
  o.n_x = 4;
  o.horizon = 40;
  o.seed = 17;
  const LqProblemData d = random_controllable_lq(o);
  const BoundaryCondition bc = random_boundary(o.n_x, 3);
  auto [traj, rep] = solve_lq(d, bc);
  REQUIRE(rep.converged);

  const OcpProblem p = make_lq_problem(d);
  const KktResidual r = evaluate_kkt_residual(p, traj, bc);
  CHECK(r.max() < 1e-9);
  CHECK(rep.final_kkt.max() == Catch::Approx(r.max()).margin(1e-12));
}

TEST_CASE("solution map is affine in the boundary data") {
  RandomLqOptions o;
  o.n_x = 3;
  o.horizon = 30;
  o.seed = 5;
  const LqProblemData d = random_controllable_lq(o);
  const BoundaryCondition b0{Vector::Zero(3), Vector::Zero(3)};
  const BoundaryCondition b1 = random_boundary(3, 11);
  const BoundaryCondition b2 = random_boundary(3, 12);
  BoundaryCondition b12{b1.x_init + b2.x_init,
                        b1.lambda_terminal + b2.lambda_terminal};

  const auto s0 = solve_lq(d, b0).first;
  const auto s1 = solve_lq(d, b1).first;
  const auto s2 = solve_lq(d, b2).first;
  const auto s12 = solve_lq(d, b12).first;
  for (long i = d.start; i <= d.end; ++i) {
    CHECK(inf_norm(s1.x(i) + s2.x(i) - s0.x(i) - s12.x(i)) < 1e-9);
    CHECK(inf_norm(s1.lam(i) + s2.lam(i) - s0.lam(i) - s12.lam(i)) < 1e-9);
  }
}

TEST_CASE("factorization cost grows linearly with the horizon") {
  RandomLqOptions o;
  o.n_x = 3;
  o.seed = 2;
  auto time_solve = [&](long T) {
    o.horizon = T;
    const LqProblemData d = random_controllable_lq(o);
    const BoundaryCondition bc = random_boundary(3, 1);
    double best = 1e99;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      (void)solve_lq(d, bc);
      best = std::min(best, std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count());
    }
    return best;
  };
  const double t1 = time_solve(4000);
  const double t2 = time_solve(8000);
  CHECK(t2 < 4.0 * std::max(t1, 1e-4));
}

TEST_CASE("rejects inconsistent problem data") {
  LqProblemData d;
  d.A = Matrix::Identity(2, 2);
  d.B = Matrix::Ones(2, 1);
  d.Q = Matrix::Identity(2, 2);
  d.R = Matrix::Constant(1, 1, 1.0);
  d.c = Vector::Zero(2);
  d.f_lin = Vector::Zero(2);
  d.start = 0;
  d.end = 10;
  const BoundaryCondition bc{Vector::Zero(2), Vector::Zero(2)};

  SECTION("wrong boundary dimension") {
    BoundaryCondition bad{Vector::Zero(3), Vector::Zero(2)};
    CHECK_THROWS_AS(solve_lq(d, bad), ValidationError);
  }
  SECTION("indefinite weight") {
    d.Q(0, 0) = -1.0;
    CHECK_THROWS_AS(solve_lq(d, bc), ValidationError);
  }
  SECTION("singular weight") {
    d.Q(1, 1) = 0.0;
    d.Q(0, 1) = d.Q(1, 0) = 0.0;
    CHECK_THROWS_AS(solve_lq(d, bc), ValidationError);
  }
  SECTION("empty horizon") {
    d.end = d.start;
    CHECK_THROWS_AS(solve_lq(d, bc), ValidationError);
  }
}
