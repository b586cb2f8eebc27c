#include "doctest.h"

#include "nocp/control_space.hpp"

#include <cmath>

using namespace nocp;

namespace {
double lin_bound(const Eigen::Vector2d& x) { return x.x() + 2.0 * x.y(); }
}

TEST_CASE("piecewise-constant control space geometry") {
  Mesh m = build_unit_square_mesh(2);
  P1Space sp(m);
  BoundaryMesh bm = induced_boundary_mesh(m, 2);
  ControlSpace cs = make_pc_control_space(
      sp, bm, [](const Eigen::Vector2d&) { return -1.0; }, lin_bound);

  CHECK(cs.dim() == 16);
  CHECK(cs.piecewise_constant);
  CHECK(cs.weights.sum() == doctest::Approx(4.0));
  // weighted norm of the constant 1 is sqrt(|Gamma|) = 2
  CHECK(cs.norm(Vec::Ones(cs.dim())) == doctest::Approx(2.0));
  // projected bounds: Q_rho of an affine function is its midpoint value
  for (int e = 0; e < cs.dim(); ++e) {
    CHECK(cs.lower[e] == doctest::Approx(-1.0));
    CHECK(cs.upper[e] == doctest::Approx(lin_bound(cs.points[e])).epsilon(1e-12));
  }
}

TEST_CASE("trace means recover constants and affine traces") {
  Mesh m = build_unit_square_mesh(4);
  P1Space sp(m);
  BoundaryMesh bm = induced_boundary_mesh(m, 2);
  ControlSpace cs = make_pc_control_space(
      sp, bm, [](const Eigen::Vector2d&) { return 0.0; },
      [](const Eigen::Vector2d&) { return 1.0; });

  Vec ones = Vec::Ones(sp.dim);
  Vec t = cs.trace_means(ones);
  for (int e = 0; e < cs.dim(); ++e) CHECK(t[e] == doctest::Approx(1.0));

  Vec lin(sp.dim);
  for (int v = 0; v < sp.dim; ++v) lin[v] = lin_bound(m.vertices[v]);
  Vec tl = cs.trace_means(lin);
  for (int e = 0; e < cs.dim(); ++e)
    CHECK(tl[e] == doctest::Approx(lin_bound(cs.points[e])).epsilon(1e-12));
}

TEST_CASE("clamp and invalid bounds") {
  Mesh m = build_unit_square_mesh(1);
  P1Space sp(m);
  BoundaryMesh bm = induced_boundary_mesh(m, 1);
  ControlSpace cs = make_pc_control_space(
      sp, bm, [](const Eigen::Vector2d&) { return -0.5; },
      [](const Eigen::Vector2d&) { return 0.25; });
  Vec u(4);
  u << -2.0, 0.0, 0.1, 3.0;
  Vec c = cs.clamp(u);
  CHECK(c[0] == -0.5);
  CHECK(c[1] == 0.0);
  CHECK(c[2] == 0.1);
  CHECK(c[3] == 0.25);

  CHECK_THROWS_AS(make_pc_control_space(
                      sp, bm, [](const Eigen::Vector2d&) { return 1.0; },
                      [](const Eigen::Vector2d&) { return 0.0; }),
                  std::invalid_argument);
}

TEST_CASE("variational control space quadrature identities") {
  Mesh m = build_unit_square_mesh(2);
  P1Space sp(m);
  ControlSpace cs = make_vd_control_space(
      sp, [](const Eigen::Vector2d&) { return -1.0; }, lin_bound);

  CHECK(!cs.piecewise_constant);
  CHECK(cs.dim() == 2 * static_cast<int>(m.boundary_edges.size()));
  CHECK(cs.weights.sum() == doctest::Approx(4.0));
  // 2-point Gauss integrates cubics of the arclength exactly: compare
  // sum w s^3 along the bottom edge against 1/4
  double s3 = 0.0;
  for (int q = 0; q < cs.dim(); ++q)
    if (cs.points[q].y() == 0.0)
      s3 += cs.weights[q] * std::pow(cs.points[q].x(), 3);
  CHECK(s3 == doctest::Approx(0.25).epsilon(1e-13));
  // pointwise bounds
  for (int q = 0; q < cs.dim(); ++q)
    CHECK(cs.upper[q] == doctest::Approx(lin_bound(cs.points[q])));
  // trace means = pointwise evaluation for P1 traces
  Vec lin(sp.dim);
  for (int v = 0; v < sp.dim; ++v) lin[v] = lin_bound(m.vertices[v]);
  Vec t = cs.trace_means(lin);
  for (int q = 0; q < cs.dim(); ++q)
    CHECK(t[q] == doctest::Approx(lin_bound(cs.points[q])).epsilon(1e-12));
}

TEST_CASE("coupling columns integrate hats against segments") {
  Mesh m = build_unit_square_mesh(2);
  P1Space sp(m);
  BoundaryMesh bm = induced_boundary_mesh(m, 1);
  ControlSpace cs = make_pc_control_space(
      sp, bm, [](const Eigen::Vector2d&) { return 0.0; },
      [](const Eigen::Vector2d&) { return 1.0; });
  // column sums are segment lengths, total = |Gamma|
  Vec colsum = cs.coupling.transpose() * Vec::Ones(sp.dim);
  for (int e = 0; e < cs.dim(); ++e)
    CHECK(colsum[e] == doctest::Approx(cs.weights[e]).epsilon(1e-13));
}
