#pragma once

#include <Eigen/SparseLU>

#include <memory>
#include <utility>
#include <vector>

#include "nocp/control_space.hpp"
#include "nocp/fem.hpp"

namespace nocp {

/// layers value meaning "no localization" (global / ideal variant).
inline constexpr int kGlobalLayers = -1;

/// Clement-type quasi-interpolation onto the coarse space: coarse-element
/// means followed by vertex averaging (operator J), then a projective
/// correction C^{-1} with C = J P so that I_H is the identity on V_H.
/// ker(I_H) = ker(J) defines W_h.
struct CoarseInterpolation {
  SpMat J;  // coarse x fine averaging operator; W_h = ker(J)
  SpMat P;  // prolongation V_H -> V_h
  std::shared_ptr<Eigen::SparseLU<SpMat>> C_lu;

  int coarse_dim() const { return static_cast<int>(J.rows()); }
  int fine_dim() const { return static_cast<int>(J.cols()); }

  /// I_H v as coarse coefficients.
  Vec apply(const Vec& v_fine) const;
  /// I_H v prolonged back to fine coefficients.
  Vec apply_fine(const Vec& v_fine) const { return P * apply(v_fine); }
};

CoarseInterpolation build_IH(const MeshHierarchy& hier);

/// Solver for a(w, z) = rhs . z over W_h = ker(J), via the saddle-point
/// system [[A, J^T], [J, 0]].
class KernelSolver {
 public:
  KernelSolver(const SpMat& A_fine, const SpMat& J);
  Vec solve(const Vec& rhs_fine) const;

 private:
  std::shared_ptr<Eigen::SparseLU<SpMat>> lu_;
  int n_ = 0, m_ = 0;
};

/// Corrector of the coarse nodal basis function at coarse vertex j:
/// c in W_h (restricted to the vertex patch for finite layers) with
/// a(c, w) = a(lambda_j, w) for all admissible w.
Vec solve_corrector(const MeshHierarchy& hier, const SpMat& A_fine,
                    const CoarseInterpolation& IH, int coarse_vertex,
                    int layers);

struct MultiscaleSpace {
  SpMat embedding;  // n_fine x dim V_H, columns = prolonged hats - correctors
  int layers = kGlobalLayers;
  DiscreteSpace space;
};

MultiscaleSpace build_ms_space(const MeshHierarchy& hier, const SpMat& A_fine,
                               const CoarseInterpolation& IH, int layers);

/// Neumann boundary-data corrector: one column per boundary element e,
/// b_e in W_h with a(b_e, w) = -int_e w ds for all admissible w.
struct BoundaryCorrector {
  SpMat columns;  // n_fine x num boundary elements
  int layers = kGlobalLayers;

  Vec apply(const Vec& q) const { return columns * q; }
};

BoundaryCorrector build_B_star(const MeshHierarchy& hier, const SpMat& A_fine,
                               const CoarseInterpolation& IH,
                               const BoundaryMesh& bmesh, int layers);

/// B_* G for boundary data G via one global kernel solve.
Vec apply_B_star_field(const MeshHierarchy& hier, const SpMat& A_fine,
                       const CoarseInterpolation& IH, const ScalarField& G);

/// Errors ||v_h - (v_ms - B_* G)|| of the two Galerkin solutions with data
/// a(v, z) = (F, z) + (G, z)_Gamma; returns {energy norm, L2 norm}.
std::pair<double, double> lemma_hm2014_check(const MeshHierarchy& hier,
                                             const CoefficientField& coeff,
                                             const ScalarField& F,
                                             const ScalarField& G, int layers);

/// Default localization radius ceil(2 log2(1/H)).
int default_layers(double H);

}  // namespace nocp
