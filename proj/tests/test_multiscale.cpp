#include "doctest.h"

#include "nocp/multiscale.hpp"
#include "nocp/verify.hpp"

#include <cmath>
#include <random>

using namespace nocp;

namespace {

Vec random_fine(const Mesh& m, std::mt19937& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vec v(m.num_vertices());
  for (int i = 0; i < v.size(); ++i) v[i] = unif(rng);
  return v;
}

// spanning vector of W_h: L2-type projection complement of a fine vector
Vec to_kernel(const CoarseInterpolation& IH, const Vec& v) {
  return v - IH.apply_fine(v);
}

}  // namespace

TEST_CASE("quasi-interpolation reproduces constants and coarse functions") {
  MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(4), 2);
  CoarseInterpolation IH = build_IH(hier);

  Vec ones = Vec::Ones(hier.fine.num_vertices());
  CHECK((IH.apply(ones).array() - 1.0).abs().maxCoeff() < 1e-12);

  std::mt19937 rng(3u);
  for (int trial = 0; trial < 5; ++trial) {
    Vec vc = random_fine(hier.coarse, rng);
    Vec vf = IH.P * vc;
    CHECK((IH.apply(vf) - vc).cwiseAbs().maxCoeff() < 1e-11);
  }

  // kernel characterization: I_H(v - P I_H v) = 0
  for (int trial = 0; trial < 5; ++trial) {
    Vec w = to_kernel(IH, random_fine(hier.fine, rng));
    CHECK(IH.apply(w).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("quasi-interpolation stability constant is level independent") {
  // ratio (H_T^{-1} ||v - I_H v||_{L2(T)}) / ||grad v||_{L2(omega_T)} for
  // random fine functions, across three refinement levels
  std::mt19937 rng(17u);
  double measured[3] = {0.0, 0.0, 0.0};
  for (int lev = 0; lev < 3; ++lev) {
    MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(4), lev + 1);
    CoarseInterpolation IH = build_IH(hier);
    const P1Space fine_space(hier.fine);
    CoefficientField lap = identity_coefficient();
    lap.kappa = [](const Eigen::Vector2d&) { return 0.0; };
    const SpMat K = assemble_a(fine_space, lap);  // Dirichlet energy
    const SpMat M = assemble_mass(fine_space);

    for (int trial = 0; trial < 20; ++trial) {
      const Vec v = random_fine(hier.fine, rng);
      const Vec d = v - IH.apply_fine(v);
      for (int T = 0; T < hier.coarse.num_triangles(); ++T) {
        // element-restricted quantities via the parent map
        double l2t = 0.0, grad = 0.0;
        const auto patch = coarse_patch(hier.coarse, T, 1);
        std::vector<char> in_patch(hier.coarse.num_triangles(), 0);
        for (int p : patch) in_patch[p] = 1;
        for (int t = 0; t < hier.fine.num_triangles(); ++t) {
          const int K_par = hier.parent_map[t];
          const auto& tri = hier.fine.triangles[t];
          if (K_par == T) {
            // exact P1 element mass
            const double a = hier.fine.area(t);
            const double s = d[tri[0]] + d[tri[1]] + d[tri[2]];
            const double q = d[tri[0]] * d[tri[0]] + d[tri[1]] * d[tri[1]] +
                             d[tri[2]] * d[tri[2]];
            l2t += a / 12.0 * (q + s * s);
          }
          if (in_patch[K_par]) {
            // element Dirichlet energy of v
            Eigen::Vector3d vl(v[tri[0]], v[tri[1]], v[tri[2]]);
            const Eigen::Vector2d p0 = hier.fine.vertices[tri[0]];
            const Eigen::Vector2d p1 = hier.fine.vertices[tri[1]];
            const Eigen::Vector2d p2 = hier.fine.vertices[tri[2]];
            const double det = 2.0 * hier.fine.signed_area(t);
            Eigen::Matrix<double, 2, 3> g;
            g.col(0) = Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / det;
            g.col(1) = Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / det;
            g.col(2) = Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / det;
            grad += hier.fine.area(t) * (g * vl).squaredNorm();
          }
        }
        const double HT = hier.coarse.diameter(T);
        if (grad > 1e-14)
          measured[lev] =
              std::max(measured[lev], std::sqrt(l2t) / (HT * std::sqrt(grad)));
      }
    }
  }
  for (int lev = 0; lev < 3; ++lev) {
    CHECK(measured[lev] > 0.0);
    CHECK(measured[lev] < 1.0);  // level-independent bound with margin
  }
}

TEST_CASE("degenerate hierarchy: trivial kernel, zero correctors, V_ms = V_H") {
  MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(4), 0);
  CoarseInterpolation IH = build_IH(hier);
  const P1Space sp(hier.fine);
  const SpMat A = assemble_a(sp, identity_coefficient());
  for (int j : {0, 7, 12}) {
    Vec c = solve_corrector(hier, A, IH, j, kGlobalLayers);
    CHECK(c.cwiseAbs().maxCoeff() < 1e-10);
  }
  MultiscaleSpace ms = build_ms_space(hier, A, IH, kGlobalLayers);
  CHECK(ms.space.dim() == hier.coarse.num_vertices());
  CHECK(SpMat(ms.embedding - IH.P).norm() < 1e-10);

  BoundaryMesh bm = induced_boundary_mesh(hier.fine, 1);
  BoundaryCorrector B = build_B_star(hier, A, IH, bm, kGlobalLayers);
  CHECK(B.columns.norm() < 1e-10);
}

TEST_CASE("ideal correctors satisfy the defining orthogonality") {
  MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(4), 2);
  CoarseInterpolation IH = build_IH(hier);
  const P1Space sp(hier.fine);
  CoefficientField coeff = rough_checkerboard(16, 0.1, 1.0, 7u);
  const SpMat A = assemble_a(sp, coeff);

  std::mt19937 rng(23u);
  for (int j : {0, 6, 14, 20}) {
    const Vec c = solve_corrector(hier, A, IH, j, kGlobalLayers);
    CHECK(IH.apply(c).cwiseAbs().maxCoeff() < 1e-10);
    const Vec lambda = IH.P.col(j);
    const Vec res = A * (lambda - c);
    for (int trial = 0; trial < 10; ++trial) {
      const Vec w = to_kernel(IH, random_fine(hier.fine, rng));
      const double rel = std::abs(res.dot(w)) /
                         (norm_bilinear(A, lambda) * norm_bilinear(A, w));
      CHECK(rel < 1e-9);
    }
  }
}

TEST_CASE("localized correctors decay toward the global one") {
  MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(4), 2);
  CoarseInterpolation IH = build_IH(hier);
  const P1Space sp(hier.fine);
  CoefficientField coeff = rough_checkerboard(16, 0.01, 1.0, 5u);
  const SpMat A = assemble_a(sp, coeff);

  const int j = 12;  // interior coarse vertex
  const Vec c_inf = solve_corrector(hier, A, IH, j, kGlobalLayers);
  double prev = std::numeric_limits<double>::infinity();
  for (int l : {1, 2, 3}) {
    const Vec c_l = solve_corrector(hier, A, IH, j, l);
    const double err = norm_bilinear(A, c_l - c_inf);
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
  // saturated patch equals the global solve
  const Vec c_big = solve_corrector(hier, A, IH, j, 10);
  CHECK(norm_bilinear(A, c_big - c_inf) < 1e-9);
}

TEST_CASE("multiscale space: dimension and ideal a-orthogonality") {
  MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(4), 2);
  CoarseInterpolation IH = build_IH(hier);
  const P1Space sp(hier.fine);
  CoefficientField coeff = rough_checkerboard(16, 0.05, 1.0, 9u);
  const SpMat A = assemble_a(sp, coeff);
  MultiscaleSpace ms = build_ms_space(hier, A, IH, kGlobalLayers);
  CHECK(ms.space.dim() == hier.coarse.num_vertices());

  std::mt19937 rng(31u);
  for (int j = 0; j < ms.space.dim(); ++j) {
    const Vec basis = ms.embedding.col(j);
    const Vec res = A * basis;
    for (int trial = 0; trial < 3; ++trial) {
      const Vec w = to_kernel(IH, random_fine(hier.fine, rng));
      const double rel = std::abs(res.dot(w)) /
                         (norm_bilinear(A, basis) * norm_bilinear(A, w));
      CHECK(rel < 1e-9);
    }
  }
}

TEST_CASE("boundary corrector: kernel range, orthogonality and norm bound") {
  MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(4), 2);
  CoarseInterpolation IH = build_IH(hier);
  const P1Space sp(hier.fine);
  CoefficientField coeff = rough_checkerboard(16, 0.1, 1.0, 13u);
  const SpMat A = assemble_a(sp, coeff);
  BoundaryMesh bm = induced_boundary_mesh(hier.fine, 1);
  BoundaryCorrector B = build_B_star(hier, A, IH, bm, kGlobalLayers);
  MultiscaleSpace ms = build_ms_space(hier, A, IH, kGlobalLayers);

  CHECK(B.apply(Vec::Zero(bm.num_elements())).cwiseAbs().maxCoeff() == 0.0);
  for (int e = 0; e < bm.num_elements(); e += 7)
    CHECK(IH.apply(Vec(B.columns.col(e))).cwiseAbs().maxCoeff() < 1e-10);

  std::mt19937 rng(41u);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  ConstantEstimates est = estimate_constants(sp, coeff);
  const double cb =
      est.C_Tr * std::sqrt(est.C_PF * std::max(1.0 / coeff.alpha, 1.0));
  for (int trial = 0; trial < 20; ++trial) {
    Vec q(bm.num_elements());
    for (int e = 0; e < q.size(); ++e) q[e] = unif(rng);
    const Vec bq = B.apply(q);
    double qn2 = 0.0;
    for (int e = 0; e < q.size(); ++e) qn2 += bm.elements[e].length * q[e] * q[e];
    CHECK(norm_bilinear(A, bq) <= cb * std::sqrt(qn2) * (1.0 + 1e-9));
    // a(B q, v_ms) = 0 against the ideal multiscale basis
    const Vec res = A * bq;
    for (int j = 0; j < ms.space.dim(); j += 5) {
      const Vec basis = ms.embedding.col(j);
      const double rel = std::abs(res.dot(basis)) /
                         std::max(1e-30, norm_bilinear(A, bq) *
                                             norm_bilinear(A, basis));
      CHECK(rel < 1e-9);
    }
  }
}

TEST_CASE("localized builds converge to the global ones") {
  MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(2), 2);
  CoarseInterpolation IH = build_IH(hier);
  const P1Space sp(hier.fine);
  CoefficientField coeff = rough_checkerboard(8, 0.1, 1.0, 19u);
  const SpMat A = assemble_a(sp, coeff);
  MultiscaleSpace global = build_ms_space(hier, A, IH, kGlobalLayers);
  MultiscaleSpace local = build_ms_space(hier, A, IH, 8);  // saturating patches
  CHECK(SpMat(global.embedding - local.embedding).norm() /
            global.embedding.norm() <
        1e-9);

  BoundaryMesh bm = induced_boundary_mesh(hier.fine, 1);
  BoundaryCorrector Bg = build_B_star(hier, A, IH, bm, kGlobalLayers);
  BoundaryCorrector Bl = build_B_star(hier, A, IH, bm, 8);
  CHECK(SpMat(Bg.columns - Bl.columns).norm() /
            std::max(1e-30, Bg.columns.norm()) <
        1e-9);

  // localized corrector supported in its patch (needs a coarse mesh whose
  // 1-layer patches do not cover the whole domain)
  MeshHierarchy big = build_hierarchy(build_unit_square_mesh(8), 1);
  CoarseInterpolation IHb = build_IH(big);
  const P1Space spb(big.fine);
  const SpMat Ab = assemble_a(spb, identity_coefficient());
  const Vec c1 = solve_corrector(big, Ab, IHb, 0, 1);  // corner vertex
  const Vec cg = solve_corrector(big, Ab, IHb, 0, kGlobalLayers);
  int outside = 0;
  for (int i = 0; i < c1.size(); ++i)
    if (c1[i] == 0.0 && cg[i] != 0.0) ++outside;
  CHECK(outside > 0);
}

TEST_CASE("two-scale error check of the corrected Galerkin solution") {
  CoefficientField coeff = rough_checkerboard(16, 0.05, 1.0, 29u);
  ScalarField F = [](const Eigen::Vector2d& x) { return 1.0 + x.x(); };
  ScalarField G = [](const Eigen::Vector2d& x) { return x.y() - 0.5; };

  // zero data -> zero errors
  MeshHierarchy h0 = build_hierarchy(build_unit_square_mesh(2), 3);
  auto zero = lemma_hm2014_check(
      h0, coeff, [](const Eigen::Vector2d&) { return 0.0; },
      [](const Eigen::Vector2d&) { return 0.0; }, kGlobalLayers);
  CHECK(zero.first < 1e-12);
  CHECK(zero.second < 1e-12);

  // errors decrease as H halves at fixed fine mesh (n = 16)
  double prev_e = std::numeric_limits<double>::infinity();
  double prev_l = std::numeric_limits<double>::infinity();
  for (int nc : {2, 4, 8}) {
    int refinements = 0;
    for (int m = nc; m < 16; m *= 2) ++refinements;
    MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(nc), refinements);
    auto errs = lemma_hm2014_check(hier, coeff, F, G, kGlobalLayers);
    CHECK(errs.first < prev_e);
    CHECK(errs.second < prev_l);
    prev_e = errs.first;
    prev_l = errs.second;
  }
}

TEST_CASE("default localization radius") {
  CHECK(default_layers(0.5) == 2);
  CHECK(default_layers(0.25) == 4);
  CHECK(default_layers(0.125) == 6);
  CHECK_THROWS_AS(default_layers(0.0), std::invalid_argument);
}
