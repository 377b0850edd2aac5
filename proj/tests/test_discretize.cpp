#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "tempo/cstr.hpp"
#include "tempo/discretize.hpp"

using namespace tempo;

TEST_CASE("implicit Euler reproduces the linear closed form") {
  // x' = a x + b u has the exact one-substep map (x + h b u) / (1 - h a)
  const double a = -0.7, b = 2.0;
  OdeRhs rhs = [=](const Vector& x, const Vector& u) {
    OdeEval e;
    e.value = a * x + Vector::Constant(1, b * u[0]);
    e.jac_x = Matrix::Constant(1, 1, a);
    e.jac_u = Matrix::Constant(1, 1, b);
    return e;
  };
  const double dt = 0.5;
  const int substeps = 4;
  auto step = discretize_implicit_euler(rhs, 1, 1, dt, substeps);

  const double h = dt / substeps;
  double ref = 1.3;
  const double u = 0.4;
  for (int s = 0; s < substeps; ++s) ref = (ref + h * b * u) / (1.0 - h * a);

  const DynamicsEval e = step(Vector::Constant(1, 1.3), Vector::Constant(1, u), 0);
  CHECK(e.next[0] == Catch::Approx(ref).margin(1e-12));
  const double dmap = std::pow(1.0 / (1.0 - h * a), substeps);
  CHECK(e.jac_x(0, 0) == Catch::Approx(dmap).margin(1e-12));
}

TEST_CASE("step map converges to the flow as substeps grow") {
  // x' = -x has flow exp(-t); first-order error should shrink linearly
  OdeRhs rhs = [](const Vector& x, const Vector&) {
    OdeEval e;
    e.value = -x;
    e.jac_x = -Matrix::Identity(1, 1);
    e.jac_u = Matrix::Zero(1, 1);
    return e;
  };
  const double dt = 1.0;
  const Vector x0 = Vector::Constant(1, 1.0);
  const Vector u = Vector::Zero(1);
  const double exact = std::exp(-dt);
  const double e1 =
      std::abs(discretize_implicit_euler(rhs, 1, 1, dt, 8)(x0, u, 0).next[0] - exact);
  const double e2 =
      std::abs(discretize_implicit_euler(rhs, 1, 1, dt, 16)(x0, u, 0).next[0] - exact);
  CHECK(e2 < 0.6 * e1);
  const double e3 =
      std::abs(discretize_implicit_euler(rhs, 1, 1, dt, 512)(x0, u, 0).next[0] - exact);
  CHECK(e3 < 2e-3);
}

TEST_CASE("reactor vector field exposes exact derivatives") {
  const OdeRhs rhs = cstr_rhs();
  Vector x(3);
  x << 0.11, 0.08, 0.15;
  Vector u(1);
  u << 0.13;
  const OdeEval e = rhs(x, u);
  const Matrix jx = oracle::fd_jacobian(
      [&](const Vector& xx) { return rhs(xx, u).value; }, x, 1e-6);
  const Matrix ju = oracle::fd_jacobian(
      [&](const Vector& uu) { return rhs(x, uu).value; }, u, 1e-6);
  CHECK((e.jac_x - jx).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((e.jac_u - ju).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("step map derivatives agree with finite differences") {
  auto step = discretize_implicit_euler(cstr_rhs(), 3, 1, 1.0, 4);
  Vector x(3);
  x << 0.11, 0.08, 0.15;
  Vector u(1);
  u << 0.13;
  const DynamicsEval e = step(x, u, 0);
  const Matrix jx =
      oracle::fd_jacobian([&](const Vector& xx) { return step(xx, u, 0).next; }, x, 1e-6);
  const Matrix ju =
      oracle::fd_jacobian([&](const Vector& uu) { return step(x, uu, 0).next; }, u, 1e-6);
  CHECK((e.jac_x - jx).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((e.jac_u - ju).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("an exhausted corrector reports its last iterate") {
  OdeRhs rhs = [](const Vector& x, const Vector&) {
    OdeEval e;
    e.value = x.array().square().matrix() + Vector::Constant(1, 1.0);
    e.jac_x = Matrix::Constant(1, 1, 2.0 * x[0]);
    e.jac_u = Matrix::Zero(1, 1);
    return e;
  };
  auto step = discretize_implicit_euler(rhs, 1, 1, 1.0, 1, 1e-14, 1);
  CHECK_THROWS_AS(step(Vector::Constant(1, 5.0), Vector::Zero(1), 0), NewtonError);
}
