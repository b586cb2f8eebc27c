#include "nocp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nocp {

double Mesh::signed_area(int t) const {
  const auto& tri = triangles[t];
  const Eigen::Vector2d& a = vertices[tri[0]];
  const Eigen::Vector2d& b = vertices[tri[1]];
  const Eigen::Vector2d& c = vertices[tri[2]];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) -
                (c.x() - a.x()) * (b.y() - a.y()));
}

double Mesh::diameter(int t) const {
  const auto& tri = triangles[t];
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    d = std::max(d, (vertices[tri[i]] - vertices[tri[(i + 1) % 3]]).norm());
  }
  return d;
}

Eigen::Vector2d Mesh::centroid(int t) const {
  const auto& tri = triangles[t];
  return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
}

namespace {

double max_diameter(const Mesh& m) {
  double h = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) h = std::max(h, m.diameter(t));
  return h;
}

}  // namespace

Mesh build_unit_square_mesh(int n) {
  if (n < 1) throw std::invalid_argument("build_unit_square_mesh: n must be >= 1");
  Mesh m;
  const int nv = n + 1;
  m.vertices.reserve(nv * nv);
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nv; ++i) {
      m.vertices.emplace_back(double(i) / n, double(j) / n);
    }
  }
  auto vid = [nv](int i, int j) { return j * nv + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        m.triangles.push_back({v00, v10, v11});
        m.triangles.push_back({v00, v11, v01});
      } else {
        m.triangles.push_back({v00, v10, v01});
        m.triangles.push_back({v10, v11, v01});
      }
    }
  }
  // sides: 0 bottom, 1 right, 2 top, 3 left (counterclockwise)
  for (int i = 0; i < n; ++i) m.boundary_edges.push_back({vid(i, 0), vid(i + 1, 0), 0});
  for (int j = 0; j < n; ++j) m.boundary_edges.push_back({vid(n, j), vid(n, j + 1), 1});
  for (int i = n; i > 0; --i) m.boundary_edges.push_back({vid(i, n), vid(i - 1, n), 2});
  for (int j = n; j > 0; --j) m.boundary_edges.push_back({vid(0, j), vid(0, j - 1), 3});
  m.h = std::sqrt(2.0) / n;
  return m;
}

Mesh refine_uniform(const Mesh& m) {
  Mesh r;
  r.vertices = m.vertices;
  r.vertex_parents.resize(m.vertices.size());
  for (int v = 0; v < m.num_vertices(); ++v) r.vertex_parents[v] = {v, v};

  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int idx = r.num_vertices();
    r.vertices.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
    r.vertex_parents.push_back({key.first, key.second});
    midpoint.emplace(key, idx);
    return idx;
  };

  r.triangles.reserve(4 * m.triangles.size());
  r.parent_triangle.reserve(4 * m.triangles.size());
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangles[t];
    const int a = tri[0], b = tri[1], c = tri[2];
    const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    r.triangles.push_back({a, ab, ca});
    r.triangles.push_back({ab, b, bc});
    r.triangles.push_back({ca, bc, c});
    r.triangles.push_back({ab, bc, ca});
    for (int i = 0; i < 4; ++i) r.parent_triangle.push_back(t);
  }
  for (const auto& e : m.boundary_edges) {
    const int me = mid(e.a, e.b);
    r.boundary_edges.push_back({e.a, me, e.side});
    r.boundary_edges.push_back({me, e.b, e.side});
  }
  r.h = 0.5 * m.h;
  return r;
}

void validate_mesh(const Mesh& m) {
  if (m.num_vertices() < 3 || m.num_triangles() < 1)
    throw std::invalid_argument("validate_mesh: degenerate mesh");
  for (int t = 0; t < m.num_triangles(); ++t) {
    for (int v : m.triangles[t]) {
      if (v < 0 || v >= m.num_vertices())
        throw std::invalid_argument("validate_mesh: vertex index out of range");
    }
    if (m.signed_area(t) <= 0.0)
      throw std::invalid_argument("validate_mesh: non-positive triangle area");
  }
  // boundary edges must be exactly the triangle edges with a single incidence
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& tri : m.triangles) {
    for (int i = 0; i < 3; ++i) {
      auto key = std::minmax(tri[i], tri[(i + 1) % 3]);
      edge_count[key]++;
    }
  }
  std::set<std::pair<int, int>> listed;
  for (const auto& e : m.boundary_edges) {
    auto key = std::minmax(e.a, e.b);
    if (!listed.insert(key).second)
      throw std::invalid_argument("validate_mesh: duplicate boundary edge");
    auto it = edge_count.find(key);
    if (it == edge_count.end() || it->second != 1)
      throw std::invalid_argument("validate_mesh: listed edge is not a boundary edge");
  }
  for (const auto& [key, count] : edge_count) {
    if (count == 1 && listed.count(key) == 0)
      throw std::invalid_argument("validate_mesh: boundary edge not listed");
    if (count > 2)
      throw std::invalid_argument("validate_mesh: non-manifold edge");
  }
  const double h = max_diameter(m);
  if (std::abs(m.h - h) > 1e-12 * h)
    throw std::invalid_argument("validate_mesh: stored h does not match mesh");
}

Eigen::SparseMatrix<double> prolongation_matrix(const Mesh& fine,
                                                int coarse_vertex_count) {
  if (fine.vertex_parents.empty())
    throw std::invalid_argument("prolongation_matrix: mesh has no refinement provenance");
  std::vector<Eigen::Triplet<double>> trips;
  for (int v = 0; v < fine.num_vertices(); ++v) {
    const auto& p = fine.vertex_parents[v];
    if (p[0] == p[1]) {
      if (p[0] >= coarse_vertex_count)
        throw std::invalid_argument("prolongation_matrix: inconsistent provenance");
      trips.emplace_back(v, p[0], 1.0);
    } else {
      trips.emplace_back(v, p[0], 0.5);
      trips.emplace_back(v, p[1], 0.5);
    }
  }
  Eigen::SparseMatrix<double> P(fine.num_vertices(), coarse_vertex_count);
  P.setFromTriplets(trips.begin(), trips.end());
  return P;
}

MeshHierarchy build_hierarchy(const Mesh& coarse, int refinements) {
  MeshHierarchy hier;
  hier.coarse = coarse;
  hier.refinements = refinements;
  hier.fine = coarse;
  hier.parent_map.resize(coarse.num_triangles());
  for (int t = 0; t < coarse.num_triangles(); ++t) hier.parent_map[t] = t;
  Eigen::SparseMatrix<double> P(coarse.num_vertices(), coarse.num_vertices());
  P.setIdentity();
  for (int r = 0; r < refinements; ++r) {
    const int nv = hier.fine.num_vertices();
    Mesh next = refine_uniform(hier.fine);
    Eigen::SparseMatrix<double> Pr = prolongation_matrix(next, nv);
    P = (Pr * P).eval();
    std::vector<int> pm(next.num_triangles());
    for (int t = 0; t < next.num_triangles(); ++t)
      pm[t] = hier.parent_map[next.parent_triangle[t]];
    hier.parent_map = std::move(pm);
    hier.fine = std::move(next);
  }
  hier.prolongation = std::move(P);
  return hier;
}

std::vector<int> coarse_patch(const Mesh& coarse, int tri, int layers) {
  if (tri < 0 || tri >= coarse.num_triangles())
    throw std::invalid_argument("coarse_patch: unknown triangle");
  if (layers < 0) throw std::invalid_argument("coarse_patch: layers must be >= 0");

  std::vector<std::vector<int>> vertex_star(coarse.num_vertices());
  for (int t = 0; t < coarse.num_triangles(); ++t)
    for (int v : coarse.triangles[t]) vertex_star[v].push_back(t);

  std::set<int> patch{tri};
  for (int l = 0; l < layers; ++l) {
    std::set<int> next = patch;
    for (int t : patch)
      for (int v : coarse.triangles[t])
        for (int s : vertex_star[v]) next.insert(s);
    if (next.size() == patch.size()) break;
    patch = std::move(next);
  }
  return {patch.begin(), patch.end()};
}

std::vector<int> coarse_patch(const MeshHierarchy& hier, int tri, int layers) {
  return coarse_patch(hier.coarse, tri, layers);
}

BoundaryMesh induced_boundary_mesh(const Mesh& m, int k) {
  if (k < 1) throw std::invalid_argument("induced_boundary_mesh: k must be >= 1");
  BoundaryMesh bm;
  bm.elements.reserve(m.boundary_edges.size() * k);
  for (int e = 0; e < static_cast<int>(m.boundary_edges.size()); ++e) {
    const auto& edge = m.boundary_edges[e];
    const Eigen::Vector2d a = m.vertices[edge.a];
    const Eigen::Vector2d b = m.vertices[edge.b];
    for (int s = 0; s < k; ++s) {
      BoundaryElement el;
      el.t0 = double(s) / k;
      el.t1 = double(s + 1) / k;
      el.p0 = a + el.t0 * (b - a);
      el.p1 = a + el.t1 * (b - a);
      el.length = (el.p1 - el.p0).norm();
      el.parent_edge = e;
      bm.elements.push_back(el);
      bm.rho = std::max(bm.rho, el.length);
    }
  }
  return bm;
}

double boundary_length(const Mesh& m) {
  double len = 0.0;
  for (const auto& e : m.boundary_edges)
    len += (m.vertices[e.b] - m.vertices[e.a]).norm();
  return len;
}

double boundary_length(const BoundaryMesh& bm) {
  double len = 0.0;
  for (const auto& e : bm.elements) len += e.length;
  return len;
}

void save_mesh(const Mesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot open " + path);
  out.precision(17);
  out << m.num_vertices() << ' ' << m.num_triangles() << ' '
      << m.boundary_edges.size() << '\n';
  for (const auto& v : m.vertices) out << v.x() << ' ' << v.y() << '\n';
  for (const auto& t : m.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : m.boundary_edges) out << e.a << ' ' << e.b << ' ' << e.side << '\n';
}

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mesh: cannot open " + path);
  int nv = 0, nt = 0, ne = 0;
  if (!(in >> nv >> nt >> ne))
    throw std::runtime_error("load_mesh: malformed header in " + path);
  Mesh m;
  m.vertices.resize(nv);
  for (auto& v : m.vertices) {
    if (!(in >> v.x() >> v.y()))
      throw std::runtime_error("load_mesh: malformed vertex in " + path);
  }
  m.triangles.resize(nt);
  for (auto& t : m.triangles) {
    if (!(in >> t[0] >> t[1] >> t[2]))
      throw std::runtime_error("load_mesh: malformed triangle in " + path);
  }
  m.boundary_edges.resize(ne);
  for (auto& e : m.boundary_edges) {
    if (!(in >> e.a >> e.b >> e.side))
      throw std::runtime_error("load_mesh: malformed boundary edge in " + path);
  }
  m.h = max_diameter(m);
  validate_mesh(m);
  return m;
}

double unit_square_arclength(const Eigen::Vector2d& p) {
  const double x = p.x(), y = p.y();
  const double tol = 1e-9;
  if (std::abs(y) < tol && x < 1.0 - tol) return x;
  if (std::abs(x - 1.0) < tol && y < 1.0 - tol) return 1.0 + y;
  if (std::abs(y - 1.0) < tol && x > tol) return 3.0 - x;
  if (std::abs(x) < tol) return y > tol ? 4.0 - y : 0.0;
  throw std::invalid_argument("unit_square_arclength: point not on boundary");
}

}  // namespace nocp
