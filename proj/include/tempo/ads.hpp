#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "tempo/ocp.hpp"

namespace tempo {

// Re-solves the problem under perturbed boundary data; throws on failure.
using ResolveFn = std::function<PrimalDualTrajectory(const BoundaryCondition&)>;

struct AdsConfig {
  int samples = 30;
  double sigma = 0.1;  // relative: component j is perturbed with sd sigma*|bc_j|
  std::uint64_t seed = 0;
  // Absolute response size below which the re-solves are only reproducing
  // their own termination error. The fit window stops where the curve sinks
  // under this; with an iterative subsolver set it a couple of orders above
  // the solver tolerance or the tail of the curve is flat noise.
  double noise_floor = 0.0;
};

struct AdsCurvePoint {
  long d = 0;
  double eps_hat = 0.0;
};

struct AdsReport {
  double rho_fit = 0.0;
  double r_squared = 0.0;
  bool decays = false;
  long d_lo = 0, d_hi = 0;
  int failures = 0;
  std::vector<AdsCurvePoint> curve;               // max-folded over samples
  std::vector<std::vector<double>> sample_curves; // one folded curve per sample
};

struct GeometricFit {
  double rho = 0.0;
  double r_squared = 0.0;
};

// Least-squares line through (d, log y); rho is the per-step factor.
inline GeometricFit fit_geometric(const std::vector<AdsCurvePoint>& pts) {
  long n = 0;
  double sx = 0, sy = 0;
  for (const auto& p : pts)
    if (p.eps_hat > 0) {
      sx += static_cast<double>(p.d);
      sy += std::log(p.eps_hat);
      ++n;
    }
  if (n < 2) throw Error("geometric fit needs at least two positive points");
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : pts)
    if (p.eps_hat > 0) {
      const double dx = static_cast<double>(p.d) - mx;
      const double dy = std::log(p.eps_hat) - my;
      sxx += dx * dx;
      sxy += dx * dy;
      syy += dy * dy;
    }
  if (sxx == 0) throw Error("geometric fit needs at least two distinct distances");
  const double slope = sxy / sxx;
  GeometricFit f;
  f.rho = std::exp(slope);
  const double ss_res = syy - slope * sxy;
  f.r_squared = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
  return f;
}

// Empirical decay probe: hit both horizon ends with Gaussian boundary
// perturbations, re-solve, and fold the stage-wise solution change by its
// distance to the nearer end. The folded curve is fit with a geometric line
// over distances far enough from the ends to be informative and large enough
// to sit above the accuracy floor of the solver.
inline AdsReport probe_sensitivity(const PrimalDualTrajectory& base,
                                   const BoundaryCondition& bc,
                                   const ResolveFn& resolve,
                                   const AdsConfig& cfg) {
  const long M = base.start, N = base.end;
  const long T = N - M;
  if (T < 8) throw ValidationError("horizon too short for a decay probe");
  if (cfg.samples < 2) throw ValidationError("need at least two samples");
  if (cfg.sigma < 0) throw ValidationError("sigma must be nonnegative");
  const int n_x = static_cast<int>(bc.x_init.size());

  const long d_max = T / 2;
  AdsReport rep;
  rep.curve.resize(static_cast<size_t>(d_max + 1));
  for (long d = 0; d <= d_max; ++d) rep.curve[static_cast<size_t>(d)].d = d;
  std::vector<double> abs_err(static_cast<size_t>(d_max + 1), 0.0);

  // sigma is relative to the boundary data so that states whose physical
  // scale is small (reactor concentrations) are not thrown out of their
  // admissible region; zero components borrow the vector's largest scale
  const auto comp_scale = [](const Vector& v, int j) {
    const double s = std::abs(v[j]);
    if (s > 0) return s;
    const double m = v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0;
    return m > 0 ? m : 1.0;
  };

  for (int s = 0; s < cfg.samples; ++s) {
    // one private stream per sample: the draw depends only on (seed, s), so
    // scaling sigma rescales every perturbation exactly
    std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed),
                      static_cast<std::uint64_t>(s)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector dx(n_x), dl(n_x);
    for (int j = 0; j < n_x; ++j)
      dx[j] = cfg.sigma * comp_scale(bc.x_init, j) * gauss(rng);
    for (int j = 0; j < n_x; ++j)
      dl[j] = cfg.sigma * comp_scale(bc.lambda_terminal, j) * gauss(rng);
    const double dnorm = std::max(inf_norm(dx), inf_norm(dl));

    PrimalDualTrajectory sol;
    try {
      sol = resolve(BoundaryCondition{bc.x_init + dx, bc.lambda_terminal + dl});
    } catch (const std::exception&) {
      ++rep.failures;
      rep.sample_curves.emplace_back();
      continue;
    }
    std::vector<double> fold(static_cast<size_t>(d_max + 1), 0.0);
    for (long i = M; i <= N; ++i) {
      const long d = std::min(i - M, N - i);
      const double e =
          std::max(inf_norm(sol.x(i) - base.x(i)), inf_norm(sol.lam(i) - base.lam(i)));
      fold[static_cast<size_t>(d)] = std::max(fold[static_cast<size_t>(d)], e);
    }
    for (long d = 0; d <= d_max; ++d) {
      const double e = fold[static_cast<size_t>(d)];
      abs_err[static_cast<size_t>(d)] = std::max(abs_err[static_cast<size_t>(d)], e);
      if (dnorm > 0)
        rep.curve[static_cast<size_t>(d)].eps_hat =
            std::max(rep.curve[static_cast<size_t>(d)].eps_hat, e / dnorm);
    }
    if (dnorm > 0)
      for (auto& v : fold) v /= dnorm;
    rep.sample_curves.push_back(std::move(fold));
  }
  if (2 * rep.failures > cfg.samples)
    throw Error("more than half of the perturbed solves failed");

  rep.d_lo = std::max<long>(2, static_cast<long>(std::ceil(0.05 * T)));
  const double floor_abs = std::max(
      cfg.noise_floor,
      1e3 * std::numeric_limits<double>::epsilon() * std::max(z_norm(base), 1.0));
  rep.d_hi = -1;
  for (long d = d_max; d >= rep.d_lo; --d)
    if (abs_err[static_cast<size_t>(d)] >= floor_abs) {
      rep.d_hi = d;
      break;
    }
  if (rep.d_hi < rep.d_lo)
    throw Error("perturbation too small: the response is below the accuracy floor");

  std::vector<AdsCurvePoint> window(rep.curve.begin() + rep.d_lo,
                                    rep.curve.begin() + rep.d_hi + 1);
  const GeometricFit fit = fit_geometric(window);
  rep.rho_fit = fit.rho;
  rep.r_squared = fit.r_squared;
  rep.decays = rep.rho_fit < 1.0 && rep.r_squared >= 0.8;
  return rep;
}

}  // namespace tempo
