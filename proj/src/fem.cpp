#include "nocp/fem.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <sstream>
#include <vector>

namespace nocp {

namespace {

// P1 gradients and the 3x3 reference blocks on a triangle.
struct TriGeom {
  double area;
  Eigen::Matrix<double, 2, 3> grads;
  Eigen::Vector2d mids[3];  // edge midpoints (quadrature nodes)
  // barycentric values of the three hats at the edge midpoints
  static constexpr double phi[3][3] = {
      {0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
};

TriGeom tri_geom(const Mesh& m, int t) {
  const auto& tri = m.triangles[t];
  const Eigen::Vector2d a = m.vertices[tri[0]];
  const Eigen::Vector2d b = m.vertices[tri[1]];
  const Eigen::Vector2d c = m.vertices[tri[2]];
  TriGeom g;
  g.area = m.area(t);
  // gradients of barycentric coordinates
  const double det = 2.0 * m.signed_area(t);
  g.grads.col(0) = Eigen::Vector2d(b.y() - c.y(), c.x() - b.x()) / det;
  g.grads.col(1) = Eigen::Vector2d(c.y() - a.y(), a.x() - c.x()) / det;
  g.grads.col(2) = Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) / det;
  g.mids[0] = 0.5 * (a + b);
  g.mids[1] = 0.5 * (b + c);
  g.mids[2] = 0.5 * (c + a);
  return g;
}

constexpr double TriGeom::phi[3][3];

}  // namespace

SpMat assemble_a(const P1Space& space, const CoefficientField& coeff) {
  const Mesh& m = *space.mesh;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * m.num_triangles());
  for (int t = 0; t < m.num_triangles(); ++t) {
    const TriGeom g = tri_geom(m, t);
    Eigen::Matrix2d Abar = Eigen::Matrix2d::Zero();
    Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
    const double w = g.area / 3.0;
    for (int q = 0; q < 3; ++q) {
      const Eigen::Matrix2d A = coeff.A(g.mids[q]);
      if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + A.norm()) ||
          A(0, 0) <= 0.0 || A.determinant() <= 0.0)
        throw std::invalid_argument("assemble_a: non-SPD coefficient sample");
      Abar += A / 3.0;
      const double k = coeff.kappa(g.mids[q]);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          local(i, j) += w * k * TriGeom::phi[q][i] * TriGeom::phi[q][j];
    }
    local += g.area * g.grads.transpose() * Abar * g.grads;
    const auto& tri = m.triangles[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(tri[i], tri[j], local(i, j));
  }
  SpMat A(space.dim, space.dim);
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

SpMat assemble_mass(const P1Space& space) {
  CoefficientField unit;
  unit.A = [](const Eigen::Vector2d&) { return Eigen::Matrix2d::Zero(); };
  unit.kappa = [](const Eigen::Vector2d&) { return 1.0; };
  const Mesh& m = *space.mesh;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * m.num_triangles());
  for (int t = 0; t < m.num_triangles(); ++t) {
    const double a = m.area(t);
    const auto& tri = m.triangles[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(tri[i], tri[j], i == j ? a / 6.0 : a / 12.0);
  }
  SpMat M(space.dim, space.dim);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

SpMat assemble_h1(const P1Space& space) {
  return assemble_mass(space) + assemble_a(space, [] {
           CoefficientField c = identity_coefficient();
           c.kappa = [](const Eigen::Vector2d&) { return 0.0; };
           return c;
         }());
}

SpMat assemble_boundary_mass(const P1Space& space) {
  const Mesh& m = *space.mesh;
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& e : m.boundary_edges) {
    const double L = (m.vertices[e.b] - m.vertices[e.a]).norm();
    trips.emplace_back(e.a, e.a, L / 3.0);
    trips.emplace_back(e.b, e.b, L / 3.0);
    trips.emplace_back(e.a, e.b, L / 6.0);
    trips.emplace_back(e.b, e.a, L / 6.0);
  }
  SpMat T(space.dim, space.dim);
  T.setFromTriplets(trips.begin(), trips.end());
  return T;
}

Vec assemble_domain_load(const P1Space& space, const ScalarField& f) {
  const Mesh& m = *space.mesh;
  Vec rhs = Vec::Zero(space.dim);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const TriGeom g = tri_geom(m, t);
    const double w = g.area / 3.0;
    const auto& tri = m.triangles[t];
    for (int q = 0; q < 3; ++q) {
      const double fq = f(g.mids[q]);
      for (int i = 0; i < 3; ++i) rhs[tri[i]] += w * fq * TriGeom::phi[q][i];
    }
  }
  return rhs;
}

Vec assemble_boundary_load(const P1Space& space, const ScalarField& g) {
  const Mesh& m = *space.mesh;
  Vec rhs = Vec::Zero(space.dim);
  const double gp = 0.5 / std::sqrt(3.0);
  for (const auto& e : m.boundary_edges) {
    const Eigen::Vector2d a = m.vertices[e.a];
    const Eigen::Vector2d b = m.vertices[e.b];
    const double L = (b - a).norm();
    for (double t : {0.5 - gp, 0.5 + gp}) {
      const double gv = g(a + t * (b - a));
      rhs[e.a] += 0.5 * L * gv * (1.0 - t);
      rhs[e.b] += 0.5 * L * gv * t;
    }
  }
  return rhs;
}

SpMat assemble_boundary_coupling(const P1Space& space, const BoundaryMesh& bmesh) {
  const Mesh& m = *space.mesh;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * bmesh.elements.size());
  for (int e = 0; e < bmesh.num_elements(); ++e) {
    const auto& el = bmesh.elements[e];
    if (el.parent_edge < 0 ||
        el.parent_edge >= static_cast<int>(m.boundary_edges.size()))
      throw std::invalid_argument("assemble_boundary_coupling: incompatible boundary mesh");
    const auto& edge = m.boundary_edges[el.parent_edge];
    const Eigen::Vector2d a = m.vertices[edge.a];
    const Eigen::Vector2d b = m.vertices[edge.b];
    // segment endpoints must lie on the parent edge
    const Eigen::Vector2d q0 = a + el.t0 * (b - a);
    const Eigen::Vector2d q1 = a + el.t1 * (b - a);
    if ((q0 - el.p0).norm() + (q1 - el.p1).norm() > 1e-9 * (1.0 + (b - a).norm()))
      throw std::invalid_argument("assemble_boundary_coupling: segment not inside its edge");
    // exact integral of the linear hats over [t0, t1]
    const double tm = 0.5 * (el.t0 + el.t1);
    trips.emplace_back(edge.a, e, el.length * (1.0 - tm));
    trips.emplace_back(edge.b, e, el.length * tm);
  }
  SpMat B(space.dim, bmesh.num_elements());
  B.setFromTriplets(trips.begin(), trips.end());
  return B;
}

Vec q_rho_project(const BoundaryMesh& bmesh, const ScalarField& g) {
  Vec u(bmesh.num_elements());
  const double gp = 0.5 / std::sqrt(3.0);
  for (int e = 0; e < bmesh.num_elements(); ++e) {
    const auto& el = bmesh.elements[e];
    const Eigen::Vector2d d = el.p1 - el.p0;
    u[e] = 0.5 * (g(el.p0 + (0.5 - gp) * d) + g(el.p0 + (0.5 + gp) * d));
  }
  return u;
}

double integrate_domain(const Mesh& mesh, const ScalarField& f) {
  double s = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double w = mesh.area(t) / 3.0;
    for (int i = 0; i < 3; ++i)
      s += w * f(0.5 * (mesh.vertices[tri[i]] + mesh.vertices[tri[(i + 1) % 3]]));
  }
  return s;
}

double integrate_boundary(const Mesh& mesh, const ScalarField& g) {
  double s = 0.0;
  const double gp = 0.5 / std::sqrt(3.0);
  for (const auto& e : mesh.boundary_edges) {
    const Eigen::Vector2d a = mesh.vertices[e.a];
    const Eigen::Vector2d b = mesh.vertices[e.b];
    const double L = (b - a).norm();
    s += 0.5 * L * (g(a + (0.5 - gp) * (b - a)) + g(a + (0.5 + gp) * (b - a)));
  }
  return s;
}

LinearSolver::LinearSolver(const SpMat& A) : A_(A) {
  chol_.compute(A_);
  chol_ok_ = (chol_.info() == Eigen::Success);
  // infinity norm, for the normwise backward error of solves
  Vec rowsum = Vec::Zero(A_.rows());
  for (int k = 0; k < A_.outerSize(); ++k)
    for (SpMat::InnerIterator it(A_, k); it; ++it)
      rowsum[it.row()] += std::abs(it.value());
  a_norm_ = rowsum.size() ? rowsum.maxCoeff() : 0.0;
}

Vec LinearSolver::solve(const Vec& rhs) const {
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Vec::Zero(rhs.size());
  auto backward_error = [this, &rhs, rhs_norm](const Vec& x, const Vec& r) {
    return r.norm() / (a_norm_ * x.norm() + rhs_norm);
  };
  if (chol_ok_) {
    Vec x = chol_.solve(rhs);
    Vec r = rhs - A_ * x;
    // iterative refinement keeps the backward error near machine level
    for (int k = 0; k < 2 && backward_error(x, r) > 1e-14; ++k) {
      x += chol_.solve(r);
      r = rhs - A_ * x;
    }
    if (backward_error(x, r) <= 1e-12) return x;
  }
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg(A_);
  cg.setTolerance(1e-13);
  cg.setMaxIterations(20 * A_.rows());
  Vec x = cg.solve(rhs);
  const Vec r = rhs - A_ * x;
  const double err = backward_error(x, r);
  if (err > 1e-12) {
    std::ostringstream os;
    os << "linear solve failed, backward error " << err;
    throw SolveFailure(os.str());
  }
  return x;
}

DiscreteSpace make_standard_space(const SpMat& A_fine) {
  DiscreteSpace s;
  SpMat I(A_fine.rows(), A_fine.cols());
  I.setIdentity();
  s.embedding = I;
  s.reduced_a = A_fine;
  s.solver = std::make_shared<LinearSolver>(s.reduced_a);
  s.is_fine = true;
  return s;
}

DiscreteSpace make_subspace(const SpMat& A_fine, const SpMat& embedding) {
  if (embedding.rows() != A_fine.rows())
    throw std::invalid_argument("make_subspace: incompatible embedding");
  DiscreteSpace s;
  s.embedding = embedding;
  s.reduced_a = embedding.transpose() * A_fine * embedding;
  s.solver = std::make_shared<LinearSolver>(s.reduced_a);
  return s;
}

Vec ritz_project(const SpMat& A_fine, const DiscreteSpace& target, const Vec& zeta) {
  if (zeta.size() != A_fine.rows())
    throw std::invalid_argument("ritz_project: vector not in the fine space");
  Vec c = target.solver->solve(target.embedding.transpose() * (A_fine * zeta));
  return target.embedding * c;
}

ConstantEstimates estimate_constants(const P1Space& space,
                                     const CoefficientField& coeff) {
  const SpMat H = assemble_h1(space);
  const SpMat A = assemble_a(space, coeff);
  const SpMat T = assemble_boundary_mass(space);
  ConstantEstimates est;
  const double min_alpha1 = std::min(coeff.alpha, 1.0);

  if (space.dim <= 2000) {
    Eigen::MatrixXd Hd(H), Ad(A), Td(T);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> tr(Td, Hd);
    if (tr.info() != Eigen::Success)
      throw std::runtime_error("estimate_constants: eigensolve failed");
    est.C_Tr = std::sqrt(std::max(0.0, tr.eigenvalues().maxCoeff()));
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> pf(Hd, Ad);
    if (pf.info() != Eigen::Success)
      throw std::runtime_error("estimate_constants: eigensolve failed");
    est.C_PF = pf.eigenvalues().maxCoeff() * min_alpha1;
    return est;
  }

  // power iteration on H^{-1}T and A^{-1}H
  LinearSolver hs(H), as(A);
  auto power = [&](const SpMat& num, const SpMat& den, const LinearSolver& solver) {
    Vec v = Vec::Ones(space.dim) +
            Vec::LinSpaced(space.dim, 0.0, 1.0).cwiseProduct(Vec::Ones(space.dim));
    double mu = 0.0;
    for (int it = 0; it < 500; ++it) {
      Vec w = solver.solve(num * v);
      const double nw = w.norm();
      if (nw == 0.0) break;
      w /= nw;
      const double mu_new = w.dot(num * w) / w.dot(den * w);
      const bool done = std::abs(mu_new - mu) <= 1e-12 * std::abs(mu_new) && it > 10;
      mu = mu_new;
      v = w;
      if (done) break;
    }
    return mu;
  };
  est.C_Tr = std::sqrt(std::max(0.0, power(T, H, hs)));
  est.C_PF = power(H, A, as) * min_alpha1;
  return est;
}

}  // namespace nocp
