#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "fmdd/geometry.hpp"

namespace fmdd {

enum class ElementKind { quad, tri };

/// Oriented mesh facet. For interior facets `left` is the lower-indexed
/// adjacent cell and the unit normal points left -> right. For boundary
/// facets `right` is -1 and the normal points outward.
struct Facet {
  int a = -1;  // vertex ids
  int b = -1;
  int left = -1;
  int right = -1;
  double length = 0.0;
  Vec2 midpoint;
  Vec2 normal;

  bool boundary() const { return right < 0; }
};

struct Cell {
  std::array<int, 4> v{{-1, -1, -1, -1}};
  int n = 0;  // 3 or 4, vertices counter-clockwise
  double area = 0.0;
  Vec2 centroid;
};

/// Polygonal (triangle/quad) tessellation with facet and vertex adjacency.
/// Immutable after construction; safe for concurrent reads.
class Mesh2D {
public:
  Mesh2D() = default;
  Mesh2D(std::vector<Vec2> vertices, std::vector<std::vector<int>> cells);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int num_facets() const { return static_cast<int>(facets_.size()); }

  const Vec2& vertex(int v) const { return vertices_[v]; }
  const Cell& cell(int c) const { return cells_[c]; }
  const Facet& facet(int f) const { return facets_[f]; }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<Facet>& facets() const { return facets_; }

  const std::vector<int>& facets_of_cell(int c) const { return cell_facets_[c]; }
  const std::vector<int>& facets_at_vertex(int v) const { return vertex_facets_[v]; }
  const std::vector<int>& cells_at_vertex(int v) const { return vertex_cells_[v]; }

  /// The two facets of cell c incident to vertex v (the n=2 property).
  std::array<int, 2> cell_facets_at_vertex(int c, int v) const;

  /// Endpoint of facet f that is not vertex v.
  int facet_other_vertex(int f, int v) const;

  double total_area() const;
  double min_edge_length() const;
  double min_diameter() const;

  /// Checks mesh invariants (positive areas, adjacency, vertex incidence);
  /// throws AssemblyError on violation.
  void validate() const;

  void write_ascii(std::ostream& os) const;
  static Mesh2D read_ascii(std::istream& is);
  void write_ascii_file(const std::string& path) const;
  static Mesh2D read_ascii_file(const std::string& path);

private:
  void build_topology();

  std::vector<Vec2> vertices_;
  std::vector<Cell> cells_;
  std::vector<Facet> facets_;
  std::vector<std::vector<int>> cell_facets_;
  std::vector<std::vector<int>> vertex_facets_;
  std::vector<std::vector<int>> vertex_cells_;
};

/// Conforming structured mesh of an axis-aligned box. Triangle meshes split
/// each quad into two triangles with alternating diagonals.
Mesh2D generate_structured(const Box& extent, int nx, int ny, ElementKind kind);

struct RefinedMesh {
  Mesh2D mesh;
  std::vector<int> parent;  // child cell -> parent cell
};

/// Uniform refinement: quads split into 4 via edge midpoints and the vertex
/// centroid, triangles into 4 similar triangles. h halves.
RefinedMesh refine_uniform(const Mesh2D& mesh);

/// Straight axis-aligned interface between two subdomains. The unit normal
/// is the outward normal of the lower-indexed side (nu = nu_i = -nu_j, i<j).
struct Interface {
  int side_lo = -1;  // subdomain i (i < j)
  int side_hi = -1;  // subdomain j
  int normal_axis = 0;  // 0: normal +x (vertical segment), 1: normal +y
  double coord = 0.0;   // position along the normal axis
  double t0 = 0.0;      // span in the tangential coordinate
  double t1 = 0.0;
  Vec2 normal;

  double length() const { return t1 - t0; }
};

enum class OuterSide { left, right, bottom, top, none };

struct Decomposition {
  Box domain;
  int snx = 0;
  int sny = 0;
  std::vector<Box> boxes;
  std::vector<Mesh2D> meshes;
  std::vector<Interface> interfaces;
  std::vector<int> interior_subdomains;  // all of whose boundary lies on Gamma
  // per subdomain: (interface id, true if subdomain is the lower side)
  std::vector<std::vector<std::pair<int, bool>>> subdomain_interfaces;

  int num_subdomains() const { return static_cast<int>(meshes.size()); }
  int subdomain_id(int si, int sj) const { return sj * snx + si; }

  /// Boundary facets of subdomain s lying on interface g, sorted by the
  /// tangential coordinate. Errors if the facets do not tile the interface.
  std::vector<int> interface_facets(int s, int g) const;

  /// Which outer boundary side a boundary facet of subdomain s lies on
  /// (OuterSide::none if it is an interface facet).
  OuterSide outer_side(int s, int facet) const;
};

struct SubdomainResolution {
  int nx = 1;
  int ny = 1;
  int refinements = 0;
};

/// Tessellate a box domain into snx-by-sny subdomains with per-subdomain
/// (possibly non-matching) structured grids.
Decomposition decompose(const Box& domain, int snx, int sny,
                        const std::vector<SubdomainResolution>& resolutions,
                        ElementKind kind);

struct InterfaceGrid {
  double t0 = 0.0;
  double t1 = 0.0;
  int n = 0;

  double cell_size() const { return (t1 - t0) / n; }
  double breakpoint(int k) const { return t0 + k * cell_size(); }
};

InterfaceGrid build_interface_grid(const Interface& interface, int n_cells);

}  // namespace fmdd
