#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <stdexcept>

#include "nocp/coefficient.hpp"
#include "nocp/mesh.hpp"

namespace nocp {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

struct SolveFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Vertex-based P1 space; dof i lives at vertex i.
struct P1Space {
  const Mesh* mesh = nullptr;
  int dim = 0;

  explicit P1Space(const Mesh& m) : mesh(&m), dim(m.num_vertices()) {}
};

/// Matrix of a(.,.) = int A grad.grad + int kappa u v, assembled with the
/// 3-point edge-midpoint rule (exact for P1 x P1 with element-wise constant
/// coefficients). Deterministic element order.
SpMat assemble_a(const P1Space& space, const CoefficientField& coeff);

/// Plain L2 mass matrix (kappa = 1 term only).
SpMat assemble_mass(const P1Space& space);

/// H1 matrix = mass + stiffness with A = I.
SpMat assemble_h1(const P1Space& space);

/// Boundary trace mass matrix, int_Gamma phi_i phi_j ds (edge-exact).
SpMat assemble_boundary_mass(const P1Space& space);

/// Entry i = int_Omega f phi_i dx by the edge-midpoint rule.
Vec assemble_domain_load(const P1Space& space, const ScalarField& f);

/// Entry i = int_Gamma g phi_i ds by 2-point Gauss per fine boundary edge.
Vec assemble_boundary_load(const P1Space& space, const ScalarField& g);

/// Rectangular map W_rho -> loads: entry (i,e) = int_e phi_i ds, exact for the
/// linear traces. Column sums equal segment lengths.
SpMat assemble_boundary_coupling(const P1Space& space, const BoundaryMesh& bmesh);

/// Elementwise L2(Gamma) projection onto piecewise constants: 2-point Gauss
/// segment means.
Vec q_rho_project(const BoundaryMesh& bmesh, const ScalarField& g);

double integrate_domain(const Mesh& mesh, const ScalarField& f);
double integrate_boundary(const Mesh& mesh, const ScalarField& g);

/// Sparse Cholesky with conjugate-gradient fallback; checks the relative
/// residual (<= 1e-12) and throws SolveFailure with the residual otherwise.
class LinearSolver {
 public:
  explicit LinearSolver(const SpMat& A);

  Vec solve(const Vec& rhs) const;

 private:
  SpMat A_;
  Eigen::SimplicialLDLT<SpMat> chol_;
  bool chol_ok_ = false;
  double a_norm_ = 0.0;
};

/// Subspace of the fine P1 space given by an embedding matrix (columns are the
/// basis written in fine dofs). Standard space: identity embedding.
struct DiscreteSpace {
  SpMat embedding;            // n_fine x dim
  SpMat reduced_a;            // E^T A E
  std::shared_ptr<LinearSolver> solver;
  bool is_fine = false;

  int fine_dim() const { return static_cast<int>(embedding.rows()); }
  int dim() const { return static_cast<int>(embedding.cols()); }

  /// Galerkin solve in the subspace, result prolonged to fine coefficients.
  Vec solve_fine(const Vec& rhs_fine) const {
    Vec c = solver->solve(embedding.transpose() * rhs_fine);
    return embedding * c;
  }
};

DiscreteSpace make_standard_space(const SpMat& A_fine);
DiscreteSpace make_subspace(const SpMat& A_fine, const SpMat& embedding);

/// Ritz projection onto the subspace: a(R z, v) = a(z, v) for all v in the
/// target space. Input and output in fine coefficients.
Vec ritz_project(const SpMat& A_fine, const DiscreteSpace& target, const Vec& zeta);

inline double norm_bilinear(const SpMat& M, const Vec& v) {
  return std::sqrt(std::max(0.0, v.dot(M * v)));
}

struct ConstantEstimates {
  double C_Tr = 0.0;  // sup ||v||_{L2(Gamma)} / ||v||_{H1}
  double C_PF = 0.0;  // normalized so ||v||_{H1}^2 <= C_PF max(1/alpha,1) a(v,v)
};

/// Discrete-space suprema via generalized eigenproblems: dense solve up to
/// ~2000 dofs, power iteration beyond.
ConstantEstimates estimate_constants(const P1Space& space,
                                     const CoefficientField& coeff);

}  // namespace nocp
