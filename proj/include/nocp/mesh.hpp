#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <string>
#include <vector>

namespace nocp {

struct BoundaryEdge {
  int a = 0, b = 0;
  int side = 0;
};

/// Conforming triangulation of a polygonal domain. Immutable after
/// construction; all triangles are counterclockwise.
struct Mesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  double h = 0.0;  // max element diameter

  // Provenance filled in by refine_uniform: child triangle -> parent triangle,
  // and for each vertex the endpoints of the edge it bisects (i,i for inherited
  // vertices).
  std::vector<int> parent_triangle;
  std::vector<std::array<int, 2>> vertex_parents;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double signed_area(int t) const;
  double area(int t) const { return std::abs(signed_area(t)); }
  double diameter(int t) const;
  Eigen::Vector2d centroid(int t) const;
};

/// Structured mesh of [0,1]^2 with n cells per side, two triangles per cell.
/// Cell diagonals alternate direction so that interior cell corners are shared
/// by all surrounding triangles. h = sqrt(2)/n.
Mesh build_unit_square_mesh(int n);

/// Red (1:4) refinement. Parent vertices keep their indices; edge midpoints are
/// appended. Fills parent_triangle and vertex_parents on the result.
Mesh refine_uniform(const Mesh& m);

/// Checks orientation, boundary-edge cover and the h invariant. Throws
/// std::invalid_argument on violation.
void validate_mesh(const Mesh& m);

/// P1 prolongation from the parent of a refine_uniform result.
Eigen::SparseMatrix<double> prolongation_matrix(const Mesh& fine,
                                                int coarse_vertex_count);

struct MeshHierarchy {
  Mesh coarse;
  Mesh fine;
  std::vector<int> parent_map;  // fine triangle -> coarse triangle
  Eigen::SparseMatrix<double> prolongation;  // fine dofs x coarse dofs
  int refinements = 0;
};

MeshHierarchy build_hierarchy(const Mesh& coarse, int refinements);

/// Element patch grown by vertex adjacency: layers=0 is {tri}, each further
/// layer adds every triangle sharing a vertex with the current patch.
/// Result is sorted.
std::vector<int> coarse_patch(const Mesh& coarse, int tri, int layers);
std::vector<int> coarse_patch(const MeshHierarchy& hier, int tri, int layers);

/// Straight segment inside one fine boundary edge; t0,t1 parameterize the
/// segment within that edge (0 at vertex a, 1 at vertex b).
struct BoundaryElement {
  Eigen::Vector2d p0, p1;
  double length = 0.0;
  int parent_edge = -1;
  double t0 = 0.0, t1 = 1.0;

  Eigen::Vector2d midpoint() const { return 0.5 * (p0 + p1); }
};

struct BoundaryMesh {
  std::vector<BoundaryElement> elements;
  double rho = 0.0;  // max segment length

  int num_elements() const { return static_cast<int>(elements.size()); }
};

/// Splits every fine boundary edge into k equal segments; k=1 yields the
/// boundary mesh induced by the triangulation.
BoundaryMesh induced_boundary_mesh(const Mesh& m, int k);

double boundary_length(const Mesh& m);
double boundary_length(const BoundaryMesh& bm);

/// Line-oriented text format: `NV NT NE`, then vertices, triangles, boundary
/// edges.
void save_mesh(const Mesh& m, const std::string& path);
Mesh load_mesh(const std::string& path);

/// Arc-length coordinate in [0,4) of a point on the boundary of the unit
/// square, counterclockwise from the origin.
double unit_square_arclength(const Eigen::Vector2d& p);

}  // namespace nocp
