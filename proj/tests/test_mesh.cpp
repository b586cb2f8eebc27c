#include "doctest.h"

#include "nocp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

using namespace nocp;

TEST_CASE("unit square mesh counts and sizes") {
  Mesh m1 = build_unit_square_mesh(1);
  CHECK(m1.num_triangles() == 2);
  CHECK(m1.num_vertices() == 4);
  CHECK(m1.boundary_edges.size() == 4);
  validate_mesh(m1);

  Mesh m2 = build_unit_square_mesh(2);
  CHECK(m2.num_triangles() == 8);
  CHECK(m2.num_vertices() == 9);
  CHECK(m2.h == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-14));
  validate_mesh(m2);

  CHECK(boundary_length(build_unit_square_mesh(4)) == doctest::Approx(4.0));
  CHECK_THROWS_AS(build_unit_square_mesh(0), std::invalid_argument);
}

TEST_CASE("triangle areas partition the domain") {
  for (int n : {1, 3, 7}) {
    Mesh m = build_unit_square_mesh(n);
    double area = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) area += m.area(t);
    CHECK(area == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("red refinement quadruples and halves") {
  Mesh m = build_unit_square_mesh(1);
  Mesh r = refine_uniform(m);
  CHECK(r.num_triangles() == 8);
  CHECK(r.h == doctest::Approx(m.h / 2));
  validate_mesh(r);

  Mesh m3 = build_unit_square_mesh(3);
  Mesh r3 = refine_uniform(m3);
  CHECK(r3.num_triangles() == 4 * m3.num_triangles());
  CHECK(r3.h == doctest::Approx(m3.h / 2));
  validate_mesh(r3);

  // nesting: every fine vertex is a parent vertex or an edge midpoint
  for (int v = 0; v < r3.num_vertices(); ++v) {
    const auto& p = r3.vertex_parents[v];
    if (p[0] == p[1]) {
      CHECK((r3.vertices[v] - m3.vertices[p[0]]).norm() < 1e-15);
    } else {
      const Eigen::Vector2d mid = 0.5 * (m3.vertices[p[0]] + m3.vertices[p[1]]);
      CHECK((r3.vertices[v] - mid).norm() < 1e-15);
    }
  }
}

TEST_CASE("hierarchy parent containment") {
  Mesh coarse = build_unit_square_mesh(2);
  MeshHierarchy hier = build_hierarchy(coarse, 2);
  CHECK(hier.fine.num_triangles() == 16 * coarse.num_triangles());
  for (int t = 0; t < hier.fine.num_triangles(); ++t) {
    const int p = hier.parent_map[t];
    // centroid of the fine triangle lies in the coarse parent
    const Eigen::Vector2d x = hier.fine.centroid(t);
    const auto& tri = coarse.triangles[p];
    const Eigen::Vector2d a = coarse.vertices[tri[0]];
    const Eigen::Vector2d b = coarse.vertices[tri[1]];
    const Eigen::Vector2d c = coarse.vertices[tri[2]];
    auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
      return u.x() * v.y() - u.y() * v.x();
    };
    CHECK(cross(b - a, x - a) > -1e-12);
    CHECK(cross(c - b, x - b) > -1e-12);
    CHECK(cross(a - c, x - c) > -1e-12);
  }
  // prolongation reproduces linear functions
  Eigen::VectorXd lin_c(coarse.num_vertices()), lin_f(hier.fine.num_vertices());
  for (int v = 0; v < coarse.num_vertices(); ++v)
    lin_c[v] = 2.0 * coarse.vertices[v].x() - coarse.vertices[v].y() + 0.25;
  for (int v = 0; v < hier.fine.num_vertices(); ++v)
    lin_f[v] = 2.0 * hier.fine.vertices[v].x() - hier.fine.vertices[v].y() + 0.25;
  CHECK((hier.prolongation * lin_c - lin_f).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("boundary mesh partitions the boundary") {
  Mesh m1 = build_unit_square_mesh(1);
  BoundaryMesh b1 = induced_boundary_mesh(m1, 1);
  CHECK(b1.num_elements() == 4);
  for (const auto& e : b1.elements) CHECK(e.length == doctest::Approx(1.0));

  BoundaryMesh b2 = induced_boundary_mesh(m1, 2);
  CHECK(b2.num_elements() == 8);
  for (const auto& e : b2.elements) CHECK(e.length == doctest::Approx(0.5));

  Mesh m2 = build_unit_square_mesh(2);
  BoundaryMesh b3 = induced_boundary_mesh(m2, 3);
  CHECK(b3.num_elements() == 24);
  CHECK(b3.rho == doctest::Approx(1.0 / 6));
  CHECK(boundary_length(b3) == doctest::Approx(4.0).epsilon(1e-12));

  CHECK_THROWS_AS(induced_boundary_mesh(m1, 0), std::invalid_argument);
}

TEST_CASE("coarse patch growth") {
  Mesh m = build_unit_square_mesh(2);
  // oracle: explicit vertex-adjacency enumeration
  auto patch_oracle = [](const Mesh& m, int tri, int layers) {
    std::set<int> patch{tri};
    for (int l = 0; l < layers; ++l) {
      std::set<int> next = patch;
      for (int t : patch)
        for (int s = 0; s < m.num_triangles(); ++s)
          for (int v : m.triangles[t])
            for (int w : m.triangles[s])
              if (v == w) next.insert(s);
      patch = next;
    }
    return std::vector<int>(patch.begin(), patch.end());
  };

  for (int t = 0; t < m.num_triangles(); ++t) {
    CHECK(coarse_patch(m, t, 0) == std::vector<int>{t});
    CHECK(coarse_patch(m, t, 1) == patch_oracle(m, t, 1));
    // interior-corner sharing makes one layer reach everything on 2x2
    CHECK(coarse_patch(m, t, 1).size() == 8);
    CHECK(coarse_patch(m, t, 5).size() == 8);  // saturation
  }

  // monotone in layers on a larger mesh
  Mesh m4 = build_unit_square_mesh(4);
  for (int t : {0, 7, 13}) {
    auto p1 = coarse_patch(m4, t, 1);
    auto p2 = coarse_patch(m4, t, 2);
    CHECK(std::includes(p2.begin(), p2.end(), p1.begin(), p1.end()));
    CHECK(coarse_patch(m4, t, 2) == patch_oracle(m4, t, 2));
  }
  CHECK_THROWS_AS(coarse_patch(m, 99, 1), std::invalid_argument);
}

TEST_CASE("mesh file round trip") {
  Mesh m = build_unit_square_mesh(3);
  const std::string path = "roundtrip.mesh";
  save_mesh(m, path);
  Mesh r = load_mesh(path);
  CHECK(r.num_vertices() == m.num_vertices());
  CHECK(r.num_triangles() == m.num_triangles());
  CHECK(r.h == doctest::Approx(m.h).epsilon(1e-15));
  for (int v = 0; v < m.num_vertices(); ++v)
    CHECK((r.vertices[v] - m.vertices[v]).norm() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("arclength parameterization") {
  CHECK(unit_square_arclength({0.25, 0.0}) == doctest::Approx(0.25));
  CHECK(unit_square_arclength({1.0, 0.5}) == doctest::Approx(1.5));
  CHECK(unit_square_arclength({0.5, 1.0}) == doctest::Approx(2.5));
  CHECK(unit_square_arclength({0.0, 0.25}) == doctest::Approx(3.75));
  CHECK_THROWS_AS(unit_square_arclength({0.5, 0.5}), std::invalid_argument);
}
