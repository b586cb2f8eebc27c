#include "doctest.h"

#include "nocp/verify.hpp"

#include <cmath>

using namespace nocp;

TEST_CASE("rate fitting on synthetic data") {
  std::vector<double> h{0.5, 0.25, 0.125, 0.0625};
  std::vector<double> err;
  for (double x : h) err.push_back(3.0 * x * x);
  RateFit fit = fit_rates(h, err);
  CHECK(fit.used == 4);
  CHECK(fit.rate == doctest::Approx(2.0).epsilon(1e-12));
  for (double r : fit.pairwise) CHECK(r == doctest::Approx(2.0).epsilon(1e-12));

  // nonpositive samples are excluded, not fatal
  err[2] = 0.0;
  RateFit fit2 = fit_rates(h, err);
  CHECK(fit2.used == 3);
  CHECK(fit2.rate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::isnan(fit2.pairwise[1]));

  CHECK_THROWS_AS(fit_rates({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("benchmark case catalogue") {
  BenchmarkCase ce = benchmark_case("const-exact");
  CHECK(ce.has_exact);
  CHECK(ce.exact_y == 1.0);
  CHECK(ce.data.gamma == 1.0);
  CHECK(ce.data.f(Eigen::Vector2d(0.3, 0.7)) == 1.0);

  BenchmarkCase sa = benchmark_case("smooth-active");
  CHECK(!sa.has_exact);
  CHECK(sa.data.gamma == doctest::Approx(0.1));
  CHECK(sa.data.phi1(Eigen::Vector2d(0.0, 0.0)) == 0.0);
  CHECK(sa.data.phi2(Eigen::Vector2d(0.0, 0.0)) == doctest::Approx(0.05));

  BenchmarkCase rr = benchmark_case("rough-random", 99u);
  CHECK(rr.data.coeff.alpha == doctest::Approx(0.01));
  // seeded and reproducible
  BenchmarkCase rr2 = benchmark_case("rough-random", 99u);
  const Eigen::Vector2d x(0.37, 0.81);
  CHECK(rr.data.coeff.A(x)(0, 0) == rr2.data.coeff.A(x)(0, 0));
  BenchmarkCase rr3 = benchmark_case("rough-random", 100u);
  CHECK(rr.data.coeff.A(x)(0, 0) != rr3.data.coeff.A(x)(0, 0));

  CHECK_THROWS_AS(benchmark_case("nope"), std::invalid_argument);
}

TEST_CASE("projected-gradient oracle is guarded and exact on the constant case") {
  BenchmarkCase ce = benchmark_case("const-exact");
  Mesh mesh = build_unit_square_mesh(4);
  P1Space space(mesh);
  SpMat A = assemble_a(space, ce.data.coeff);
  DiscreteSpace ds = make_standard_space(A);
  BoundaryMesh bm = induced_boundary_mesh(mesh, 2);
  ControlSpace cs = make_pc_control_space(space, bm, ce.data.phi1, ce.data.phi2);
  ReducedProblem pr(space, &ds, &cs, ce.data);
  OCPSolution sol = oracle_solve_pg(pr, 1e-13);
  CHECK(sol.converged);
  CHECK((sol.y.array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(sol.u.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sol.kkt_residual < 1e-10);
  // descent history
  for (std::size_t k = 0; k + 1 < sol.cost_history.size(); ++k)
    CHECK(sol.cost_history[k + 1] <= sol.cost_history[k] + 1e-15);

  Mesh big = build_unit_square_mesh(16);  // 289 dofs
  P1Space bspace(big);
  SpMat Ab = assemble_a(bspace, ce.data.coeff);
  DiscreteSpace dsb = make_standard_space(Ab);
  BoundaryMesh bmb = induced_boundary_mesh(big, 1);
  ControlSpace csb = make_pc_control_space(bspace, bmb, ce.data.phi1, ce.data.phi2);
  ReducedProblem prb(bspace, &dsb, &csb, ce.data);
  CHECK_THROWS_AS(oracle_solve_pg(prb), std::invalid_argument);
}

TEST_CASE("a-priori bounds hold on a solved case and detect violations") {
  BenchmarkCase sa = benchmark_case("smooth-active");
  Mesh mesh = build_unit_square_mesh(8);
  P1Space space(mesh);
  SpMat A = assemble_a(space, sa.data.coeff);
  DiscreteSpace ds = make_standard_space(A);
  BoundaryMesh bm = induced_boundary_mesh(mesh, 2);
  ControlSpace cs = make_pc_control_space(space, bm, sa.data.phi1, sa.data.phi2);
  ReducedProblem pr(space, &ds, &cs, sa.data);
  OCPSolution sol = solve_ocp_pdas(pr, 1e-10, 50);
  REQUIRE(sol.converged);

  ConstantEstimates est = estimate_constants(space, sa.data.coeff);
  SpMat H1 = assemble_h1(space);
  auto l2dom = [&](const ScalarField& g) {
    return std::sqrt(integrate_domain(
        mesh, [&g](const Eigen::Vector2d& x) { return g(x) * g(x); }));
  };
  auto l2bdy = [&](const ScalarField& g) {
    return std::sqrt(integrate_boundary(
        mesh, [&g](const Eigen::Vector2d& x) { return g(x) * g(x); }));
  };
  AppendixReport rep = appendix_bounds_check(
      sa.data.gamma, sa.data.coeff.alpha, est, l2dom(sa.data.f),
      l2dom(sa.data.y_d), l2bdy(sa.data.phi1), l2bdy(sa.data.phi2),
      pr.tracking_error_l2(sol.y), cs.norm(sol.u), norm_bilinear(H1, sol.y),
      norm_bilinear(H1, sol.p));
  CHECK(rep.C_sharp > 0.0);
  CHECK(rep.bounds.size() == 4);
  CHECK(rep.all_ok);

  // an inflated norm must be flagged
  AppendixReport bad = appendix_bounds_check(
      sa.data.gamma, sa.data.coeff.alpha, est, l2dom(sa.data.f),
      l2dom(sa.data.y_d), l2bdy(sa.data.phi1), l2bdy(sa.data.phi2),
      10.0 * std::sqrt(rep.C_sharp), cs.norm(sol.u),
      norm_bilinear(H1, sol.y), norm_bilinear(H1, sol.p));
  CHECK(!bad.all_ok);
}
