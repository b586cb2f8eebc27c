#include "nocp/control_space.hpp"

#include <cmath>
#include <stdexcept>

namespace nocp {

ControlSpace make_pc_control_space(const P1Space& space, const BoundaryMesh& bmesh,
                                   const ScalarField& phi1, const ScalarField& phi2) {
  ControlSpace cs;
  cs.piecewise_constant = true;
  cs.coupling = assemble_boundary_coupling(space, bmesh);
  cs.weights.resize(bmesh.num_elements());
  cs.points.reserve(bmesh.num_elements());
  for (int e = 0; e < bmesh.num_elements(); ++e) {
    cs.weights[e] = bmesh.elements[e].length;
    cs.points.push_back(bmesh.elements[e].midpoint());
  }
  cs.lower = q_rho_project(bmesh, phi1);
  cs.upper = q_rho_project(bmesh, phi2);
  if ((cs.upper - cs.lower).minCoeff() < -1e-12)
    throw std::invalid_argument("make_pc_control_space: phi1 > phi2 on some element");
  return cs;
}

ControlSpace make_vd_control_space(const P1Space& space,
                                   const ScalarField& phi1, const ScalarField& phi2) {
  const Mesh& m = *space.mesh;
  const int ne = static_cast<int>(m.boundary_edges.size());
  ControlSpace cs;
  cs.piecewise_constant = false;
  cs.weights.resize(2 * ne);
  cs.lower.resize(2 * ne);
  cs.upper.resize(2 * ne);
  cs.points.reserve(2 * ne);
  std::vector<Eigen::Triplet<double>> trips;
  const double gp = 0.5 / std::sqrt(3.0);
  int q = 0;
  for (const auto& e : m.boundary_edges) {
    const Eigen::Vector2d a = m.vertices[e.a];
    const Eigen::Vector2d b = m.vertices[e.b];
    const double L = (b - a).norm();
    for (double t : {0.5 - gp, 0.5 + gp}) {
      const Eigen::Vector2d x = a + t * (b - a);
      cs.weights[q] = 0.5 * L;
      cs.lower[q] = phi1(x);
      cs.upper[q] = phi2(x);
      if (cs.lower[q] > cs.upper[q] + 1e-12)
        throw std::invalid_argument("make_vd_control_space: phi1 > phi2 at a node");
      cs.points.push_back(x);
      trips.emplace_back(e.a, q, 0.5 * L * (1.0 - t));
      trips.emplace_back(e.b, q, 0.5 * L * t);
      ++q;
    }
  }
  cs.coupling.resize(space.dim, 2 * ne);
  cs.coupling.setFromTriplets(trips.begin(), trips.end());
  return cs;
}

}  // namespace nocp
