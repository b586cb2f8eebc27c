#pragma once

#include "nocp/fem.hpp"
#include "nocp/mesh.hpp"

namespace nocp {

/// Discrete carrier of controls and multipliers on Gamma. Two realizations:
/// piecewise constants on a boundary mesh (weights = segment lengths) and
/// boundary quadrature nodes for the variational-discretization mode
/// (weights = quadrature weights). Everything downstream only needs the
/// weighted inner product, the coupling into P1 loads, and the bounds.
struct ControlSpace {
  Vec weights;      // positive; L2(Gamma) inner product is sum w u v
  SpMat coupling;   // n_fine x m, column e = load of the e-th characteristic
  Vec lower, upper; // bound vectors in this representation
  std::vector<Eigen::Vector2d> points;  // representative point per entry
  bool piecewise_constant = true;

  int dim() const { return static_cast<int>(weights.size()); }

  double inner(const Vec& u, const Vec& v) const {
    return (weights.array() * u.array() * v.array()).sum();
  }
  double norm(const Vec& u) const { return std::sqrt(std::max(0.0, inner(u, u))); }

  /// Elementwise means of the trace of a fine P1 function (the piecewise
  /// constant case realizes Q_rho of the trace; the node case evaluates
  /// pointwise).
  Vec trace_means(const Vec& p_fine) const {
    return (coupling.transpose() * p_fine).cwiseQuotient(weights);
  }

  Vec clamp(const Vec& u) const {
    return u.cwiseMax(lower).cwiseMin(upper);
  }
};

/// W_rho control space with Q_rho-projected bounds.
ControlSpace make_pc_control_space(const P1Space& space, const BoundaryMesh& bmesh,
                                   const ScalarField& phi1, const ScalarField& phi2);

/// Quadrature-node control space (2-point Gauss per fine boundary edge) with
/// pointwise-evaluated bounds; used by the variational discretization mode.
ControlSpace make_vd_control_space(const P1Space& space,
                                   const ScalarField& phi1, const ScalarField& phi2);

}  // namespace nocp
