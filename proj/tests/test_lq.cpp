#include <catch2/catch_amalgamated.hpp>

#include "tempo/experiments.hpp"
#include "tempo/json_io.hpp"
#include "tempo/lq.hpp"

using namespace tempo;

TEST_CASE("weight validation") {
  LqProblemData d;
  d.A = Matrix::Identity(2, 2);
  d.B = Matrix::Ones(2, 1);
  d.Q = Matrix::Identity(2, 2);
  d.R = Matrix::Constant(1, 1, 2.0);
  d.c = Vector::Zero(2);
  d.f_lin = Vector::Zero(2);
  d.start = 0;
  d.end = 5;
  CHECK_NOTHROW(d.validate());

  SECTION("asymmetric Q") {
    d.Q(0, 1) = 0.5;
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
  SECTION("zero eigenvalue is rejected even though a Cholesky may pass") {
    d.Q << 1.0, 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
  SECTION("negative R") {
    d.R(0, 0) = -2.0;
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
  SECTION("mismatched shapes") {
    d.B = Matrix::Ones(3, 1);
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
}

TEST_CASE("controllability matches a rank oracle") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    Matrix A(n, n), B(n, 1);
    for (int i = 0; i < n; ++i) {
      B(i, 0) = uni(rng);
      for (int j = 0; j < n; ++j) A(i, j) = uni(rng);
    }
    Matrix ctrb(n, n);
    Vector col = B.col(0);
    for (int k = 0; k < n; ++k) {
      ctrb.col(k) = col;
      col = A * col;
    }
    const auto svd = ctrb.jacobiSvd();
    const int rank_ref =
        (svd.singularValues().array() > 1e-10 * svd.singularValues().maxCoeff())
            .count();
    const ControllabilityResult res = controllability_check(A, B);
    CAPTURE(trial, n);
    CHECK(res.rank == rank_ref);
    CHECK(res.controllable == (rank_ref == n));
  }
}

TEST_CASE("controllability is decided on relative scale") {
  Matrix A(2, 2), B(2, 1);
  A << 0.0, 1.0, 0.0, 0.0;
  B << 0.0, 1.0;
  CHECK(controllability_check(A, B).controllable);
  CHECK(controllability_check(1e6 * A, 1e6 * B).controllable);
  CHECK(controllability_check(1e-6 * A, 1e-6 * B).controllable);

  Matrix A2 = Matrix::Identity(2, 2);
  CHECK_FALSE(controllability_check(A2, B).controllable);
  CHECK(controllability_check(A2, B).rank == 1);
}

TEST_CASE("problem data round-trips through json") {
  RandomLqOptions o;
  o.n_x = 4;
  o.horizon = 33;
  o.seed = 9;
  const LqProblemData d = random_controllable_lq(o);
  const LqProblemData back = lq_from_json(lq_to_json(d));
  CHECK((back.A - d.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.B - d.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.Q - d.Q).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.R - d.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK(inf_norm(back.c - d.c) == 0.0);
  CHECK(inf_norm(back.f_lin - d.f_lin) == 0.0);
  CHECK(back.start == d.start);
  CHECK(back.end == d.end);

  json j = lq_to_json(d);
  j.erase("Q");
  CHECK_THROWS_AS(lq_from_json(j), ValidationError);
}

TEST_CASE("random instances are reproducible and controllable") {
  RandomLqOptions o;
  o.n_x = 5;
  o.horizon = 50;
  o.seed = 123;
  const LqProblemData a = random_controllable_lq(o);
  const LqProblemData b = random_controllable_lq(o);
  CHECK((a.A - b.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK(controllability_check(a.A, a.B).controllable);
  CHECK(std::abs(spectral_radius(a.A) - o.spectral_radius) < 1e-10);
  CHECK_NOTHROW(a.validate());
}
