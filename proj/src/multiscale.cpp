#include "nocp/multiscale.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace nocp {

namespace {

// fine vertex -> incident fine triangles
std::vector<std::vector<int>> vertex_stars(const Mesh& m) {
  std::vector<std::vector<int>> stars(m.num_vertices());
  for (int t = 0; t < m.num_triangles(); ++t)
    for (int v : m.triangles[t]) stars[v].push_back(t);
  return stars;
}

SpMat saddle_matrix(const SpMat& A, const SpMat& J) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(J.rows());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(A.nonZeros() + 2 * J.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value());
  for (int k = 0; k < J.outerSize(); ++k)
    for (SpMat::InnerIterator it(J, k); it; ++it) {
      trips.emplace_back(n + static_cast<int>(it.row()),
                         static_cast<int>(it.col()), it.value());
      trips.emplace_back(static_cast<int>(it.col()),
                         n + static_cast<int>(it.row()), it.value());
    }
  SpMat S(n + m, n + m);
  S.setFromTriplets(trips.begin(), trips.end());
  return S;
}

// Patch-restricted kernel solve: free fine dofs, constraint rows of J
// restricted to them (linearly dependent rows dropped by a pivoted QR).
Vec solve_patch(const SpMat& A, const SpMat& J, const std::vector<int>& free_dofs,
                const Vec& rhs, const std::string& patch_id) {
  const int n = static_cast<int>(A.rows());
  const int nf = static_cast<int>(free_dofs.size());
  Vec w = Vec::Zero(n);
  if (nf == 0) return w;
  std::vector<int> fine_to_local(n, -1);
  for (int i = 0; i < nf; ++i) fine_to_local[free_dofs[i]] = i;

  std::vector<Eigen::Triplet<double>> a_trips;
  for (int j : free_dofs)
    for (SpMat::InnerIterator it(A, j); it; ++it) {
      const int li = fine_to_local[it.row()];
      if (li >= 0) a_trips.emplace_back(li, fine_to_local[j], it.value());
    }
  SpMat A_ff(nf, nf);
  A_ff.setFromTriplets(a_trips.begin(), a_trips.end());

  // constraint rows with support on the patch
  std::set<int> rows;
  for (int j : free_dofs)
    for (SpMat::InnerIterator it(J, j); it; ++it) rows.insert(static_cast<int>(it.row()));
  std::vector<int> row_ids(rows.begin(), rows.end());
  Eigen::MatrixXd Jd = Eigen::MatrixXd::Zero(static_cast<int>(row_ids.size()), nf);
  for (int r = 0; r < static_cast<int>(row_ids.size()); ++r) {
    // iterate the r-th row via the column-major structure of restricted cols
    for (int i = 0; i < nf; ++i) Jd(r, i) = J.coeff(row_ids[r], free_dofs[i]);
  }
  // keep a maximal independent subset of rows
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Jd.transpose());
  const int rank = static_cast<int>(qr.rank());
  std::vector<Eigen::Triplet<double>> j_trips;
  const auto& perm = qr.colsPermutation().indices();
  for (int r = 0; r < rank; ++r) {
    const int row = perm[r];
    for (int i = 0; i < nf; ++i)
      if (Jd(row, i) != 0.0) j_trips.emplace_back(r, i, Jd(row, i));
  }
  SpMat J_f(rank, nf);
  J_f.setFromTriplets(j_trips.begin(), j_trips.end());

  SpMat S = saddle_matrix(A_ff, J_f);
  Eigen::SparseLU<SpMat> lu(S);
  if (lu.info() != Eigen::Success)
    throw SolveFailure("corrector patch system singular at " + patch_id);
  Vec big = Vec::Zero(nf + rank);
  for (int i = 0; i < nf; ++i) big[i] = rhs[free_dofs[i]];
  const Vec sol = lu.solve(big);
  for (int i = 0; i < nf; ++i) w[free_dofs[i]] = sol[i];
  return w;
}

// coarse triangles within `layers` of the given seed set
std::vector<char> grow_patch(const Mesh& coarse, const std::vector<int>& seed,
                             int layers) {
  std::vector<char> in(coarse.num_triangles(), 0);
  for (int t : seed) in[t] = 1;
  for (int l = 0; l < layers; ++l) {
    std::vector<char> touched(coarse.num_vertices(), 0);
    for (int t = 0; t < coarse.num_triangles(); ++t)
      if (in[t])
        for (int v : coarse.triangles[t]) touched[v] = 1;
    bool grew = false;
    for (int t = 0; t < coarse.num_triangles(); ++t)
      if (!in[t])
        for (int v : coarse.triangles[t])
          if (touched[v]) {
            in[t] = 1;
            grew = true;
            break;
          }
    if (!grew) break;
  }
  return in;
}

// fine dofs whose entire star of fine triangles has its coarse parent inside
// the patch (hats supported in the patch)
std::vector<int> patch_free_dofs(const MeshHierarchy& hier,
                                 const std::vector<std::vector<int>>& stars,
                                 const std::vector<char>& patch) {
  std::vector<int> free_dofs;
  for (int v = 0; v < hier.fine.num_vertices(); ++v) {
    bool inside = !stars[v].empty();
    for (int t : stars[v])
      if (!patch[hier.parent_map[t]]) {
        inside = false;
        break;
      }
    if (inside) free_dofs.push_back(v);
  }
  return free_dofs;
}

}  // namespace

Vec CoarseInterpolation::apply(const Vec& v_fine) const {
  return C_lu->solve(J * v_fine);
}

CoarseInterpolation build_IH(const MeshHierarchy& hier) {
  const Mesh& coarse = hier.coarse;
  const Mesh& fine = hier.fine;
  const int nH = coarse.num_vertices();
  const int nh = fine.num_vertices();
  if (static_cast<int>(hier.parent_map.size()) != fine.num_triangles() ||
      hier.prolongation.rows() != nh || hier.prolongation.cols() != nH)
    throw std::invalid_argument("build_IH: incompatible hierarchy");

  // Clement averaging: L2(K)-projection of the fine function onto P1(K) per
  // coarse element, evaluated at the element's vertices, then averaged over
  // the elements meeting each coarse vertex.
  std::vector<int> count(nH, 0);
  for (int K = 0; K < coarse.num_triangles(); ++K)
    for (int v : coarse.triangles[K]) ++count[v];

  // local rhs operators: R_K (3 x nh) with (R_K v)_i = int_K v phi_i^H
  std::vector<Eigen::Triplet<double>> j_trips;
  std::vector<std::vector<std::pair<int, Eigen::Vector3d>>> rhs_cols(
      coarse.num_triangles());
  for (int t = 0; t < fine.num_triangles(); ++t) {
    const int K = hier.parent_map[t];
    const auto& ctri = coarse.triangles[K];
    const Eigen::Vector2d a = coarse.vertices[ctri[0]];
    const Eigen::Vector2d b = coarse.vertices[ctri[1]];
    const Eigen::Vector2d c = coarse.vertices[ctri[2]];
    Eigen::Matrix2d T;
    T.col(0) = b - a;
    T.col(1) = c - a;
    const Eigen::Matrix2d Tinv = T.inverse();
    const auto& ftri = fine.triangles[t];
    const double w = fine.area(t) / 3.0;
    for (int q = 0; q < 3; ++q) {
      const Eigen::Vector2d mq = 0.5 * (fine.vertices[ftri[q]] +
                                        fine.vertices[ftri[(q + 1) % 3]]);
      const Eigen::Vector2d lam = Tinv * (mq - a);
      const Eigen::Vector3d coarse_hats(1.0 - lam[0] - lam[1], lam[0], lam[1]);
      // fine hats at the edge midpoint: 1/2 on the edge's endpoints
      for (int j : {q, (q + 1) % 3})
        rhs_cols[K].push_back({ftri[j], 0.5 * w * coarse_hats});
    }
  }
  for (int K = 0; K < coarse.num_triangles(); ++K) {
    Eigen::Matrix3d MK;
    const double aK = coarse.area(K);
    MK << aK / 6, aK / 12, aK / 12, aK / 12, aK / 6, aK / 12, aK / 12, aK / 12,
        aK / 6;
    const Eigen::Matrix3d MKinv = MK.inverse();
    const auto& ctri = coarse.triangles[K];
    for (const auto& [col, rhs] : rhs_cols[K]) {
      const Eigen::Vector3d coeff = MKinv * rhs;  // projection at K's vertices
      for (int i = 0; i < 3; ++i)
        j_trips.emplace_back(ctri[i], col, coeff[i] / count[ctri[i]]);
    }
  }

  CoarseInterpolation IH;
  IH.J.resize(nH, nh);
  IH.J.setFromTriplets(j_trips.begin(), j_trips.end());
  IH.P = hier.prolongation;
  SpMat C = (IH.J * IH.P).pruned();
  IH.C_lu = std::make_shared<Eigen::SparseLU<SpMat>>();
  IH.C_lu->compute(C);
  if (IH.C_lu->info() != Eigen::Success)
    throw SolveFailure("build_IH: projectivity correction matrix is singular");
  return IH;
}

KernelSolver::KernelSolver(const SpMat& A_fine, const SpMat& J)
    : n_(static_cast<int>(A_fine.rows())), m_(static_cast<int>(J.rows())) {
  lu_ = std::make_shared<Eigen::SparseLU<SpMat>>();
  lu_->compute(saddle_matrix(A_fine, J));
  if (lu_->info() != Eigen::Success)
    throw SolveFailure("KernelSolver: saddle-point factorization failed");
}

Vec KernelSolver::solve(const Vec& rhs_fine) const {
  Vec big = Vec::Zero(n_ + m_);
  big.head(n_) = rhs_fine;
  const Vec sol = lu_->solve(big);
  return sol.head(n_);
}

Vec solve_corrector(const MeshHierarchy& hier, const SpMat& A_fine,
                    const CoarseInterpolation& IH, int coarse_vertex,
                    int layers) {
  if (coarse_vertex < 0 || coarse_vertex >= hier.coarse.num_vertices())
    throw std::invalid_argument("solve_corrector: coarse vertex out of range");
  const Vec lambda = IH.P.col(coarse_vertex);
  const Vec rhs = A_fine * lambda;
  if (layers == kGlobalLayers) {
    KernelSolver ks(A_fine, IH.J);
    return ks.solve(rhs);
  }
  if (layers < 1)
    throw std::invalid_argument("solve_corrector: layers must be >= 1 or global");
  std::vector<int> seed;
  for (int t = 0; t < hier.coarse.num_triangles(); ++t)
    for (int v : hier.coarse.triangles[t])
      if (v == coarse_vertex) seed.push_back(t);
  const std::vector<char> patch = grow_patch(hier.coarse, seed, layers);
  const auto stars = vertex_stars(hier.fine);
  const std::vector<int> free_dofs = patch_free_dofs(hier, stars, patch);
  return solve_patch(A_fine, IH.J, free_dofs, rhs,
                     "coarse vertex " + std::to_string(coarse_vertex));
}

MultiscaleSpace build_ms_space(const MeshHierarchy& hier, const SpMat& A_fine,
                               const CoarseInterpolation& IH, int layers) {
  const int nH = hier.coarse.num_vertices();
  const int nh = hier.fine.num_vertices();
  std::vector<Eigen::Triplet<double>> trips;

  if (layers == kGlobalLayers) {
    KernelSolver ks(A_fine, IH.J);
    for (int j = 0; j < nH; ++j) {
      const Vec lambda = IH.P.col(j);
      const Vec basis = lambda - ks.solve(A_fine * lambda);
      for (int i = 0; i < nh; ++i)
        if (basis[i] != 0.0) trips.emplace_back(i, j, basis[i]);
    }
  } else {
    const auto stars = vertex_stars(hier.fine);
    std::vector<std::vector<int>> coarse_stars(nH);
    for (int t = 0; t < hier.coarse.num_triangles(); ++t)
      for (int v : hier.coarse.triangles[t]) coarse_stars[v].push_back(t);
    std::unique_ptr<KernelSolver> saturated;  // shared once patches fill Omega
    for (int j = 0; j < nH; ++j) {
      const std::vector<char> patch =
          grow_patch(hier.coarse, coarse_stars[j], layers);
      const Vec lambda = IH.P.col(j);
      Vec c;
      if (std::find(patch.begin(), patch.end(), 0) == patch.end()) {
        if (!saturated) saturated = std::make_unique<KernelSolver>(A_fine, IH.J);
        c = saturated->solve(A_fine * lambda);
      } else {
        const std::vector<int> free_dofs = patch_free_dofs(hier, stars, patch);
        c = solve_patch(A_fine, IH.J, free_dofs, A_fine * lambda,
                        "coarse vertex " + std::to_string(j));
      }
      const Vec basis = lambda - c;
      for (int i = 0; i < nh; ++i)
        if (basis[i] != 0.0) trips.emplace_back(i, j, basis[i]);
    }
  }

  MultiscaleSpace ms;
  ms.layers = layers;
  ms.embedding.resize(nh, nH);
  ms.embedding.setFromTriplets(trips.begin(), trips.end());
  ms.space = make_subspace(A_fine, ms.embedding);
  return ms;
}

BoundaryCorrector build_B_star(const MeshHierarchy& hier, const SpMat& A_fine,
                               const CoarseInterpolation& IH,
                               const BoundaryMesh& bmesh, int layers) {
  const P1Space fine_space(hier.fine);
  const SpMat coupling = assemble_boundary_coupling(fine_space, bmesh);
  const int nh = hier.fine.num_vertices();
  const int m = bmesh.num_elements();
  std::vector<Eigen::Triplet<double>> trips;

  if (layers == kGlobalLayers) {
    KernelSolver ks(A_fine, IH.J);
    for (int e = 0; e < m; ++e) {
      const Vec col = ks.solve(Vec(-coupling.col(e)));
      for (int i = 0; i < nh; ++i)
        if (col[i] != 0.0) trips.emplace_back(i, e, col[i]);
    }
  } else {
    const auto stars = vertex_stars(hier.fine);
    std::unique_ptr<KernelSolver> saturated;  // shared once patches fill Omega
    for (int e = 0; e < m; ++e) {
      // seed: coarse parents of fine triangles touching the parent edge
      const auto& edge = hier.fine.boundary_edges[bmesh.elements[e].parent_edge];
      std::vector<int> seed;
      for (int t : stars[edge.a]) seed.push_back(hier.parent_map[t]);
      for (int t : stars[edge.b]) seed.push_back(hier.parent_map[t]);
      std::sort(seed.begin(), seed.end());
      seed.erase(std::unique(seed.begin(), seed.end()), seed.end());
      const std::vector<char> patch = grow_patch(hier.coarse, seed, layers);
      Vec col;
      if (std::find(patch.begin(), patch.end(), 0) == patch.end()) {
        if (!saturated) saturated = std::make_unique<KernelSolver>(A_fine, IH.J);
        col = saturated->solve(Vec(-coupling.col(e)));
      } else {
        const std::vector<int> free_dofs = patch_free_dofs(hier, stars, patch);
        col = solve_patch(A_fine, IH.J, free_dofs, Vec(-coupling.col(e)),
                          "boundary element " + std::to_string(e));
      }
      for (int i = 0; i < nh; ++i)
        if (col[i] != 0.0) trips.emplace_back(i, e, col[i]);
    }
  }

  BoundaryCorrector B;
  B.layers = layers;
  B.columns.resize(nh, m);
  B.columns.setFromTriplets(trips.begin(), trips.end());
  return B;
}

Vec apply_B_star_field(const MeshHierarchy& hier, const SpMat& A_fine,
                       const CoarseInterpolation& IH, const ScalarField& G) {
  const P1Space fine_space(hier.fine);
  KernelSolver ks(A_fine, IH.J);
  return ks.solve(Vec(-assemble_boundary_load(fine_space, G)));
}

std::pair<double, double> lemma_hm2014_check(const MeshHierarchy& hier,
                                             const CoefficientField& coeff,
                                             const ScalarField& F,
                                             const ScalarField& G, int layers) {
  const P1Space fine_space(hier.fine);
  const SpMat A = assemble_a(fine_space, coeff);
  const SpMat M = assemble_mass(fine_space);
  const Vec rhs = assemble_domain_load(fine_space, F) +
                  assemble_boundary_load(fine_space, G);

  const DiscreteSpace fine = make_standard_space(A);
  const Vec v_h = fine.solve_fine(rhs);

  const CoarseInterpolation IH = build_IH(hier);
  const MultiscaleSpace ms = build_ms_space(hier, A, IH, layers);
  const Vec v_ms = ms.space.solve_fine(rhs);
  const Vec bg = apply_B_star_field(hier, A, IH, G);

  const Vec err = v_h - (v_ms - bg);
  return {norm_bilinear(A, err), norm_bilinear(M, err)};
}

int default_layers(double H) {
  if (!(H > 0.0)) throw std::invalid_argument("default_layers: H must be positive");
  return std::max(1, static_cast<int>(std::ceil(2.0 * std::log2(1.0 / H))));
}

}  // namespace nocp
