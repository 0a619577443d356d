#include "fmdd/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "fmdd/errors.hpp"

namespace fmdd {

namespace {

double polygon_area(const std::vector<Vec2>& pts, const Cell& c) {
  double a = 0.0;
  for (int k = 0; k < c.n; ++k) {
    const Vec2& p = pts[c.v[k]];
    const Vec2& q = pts[c.v[(k + 1) % c.n]];
    a += p.cross(q);
  }
  return 0.5 * a;
}

Vec2 polygon_centroid(const std::vector<Vec2>& pts, const Cell& c, double area) {
  Vec2 r{0.0, 0.0};
  for (int k = 0; k < c.n; ++k) {
    const Vec2& p = pts[c.v[k]];
    const Vec2& q = pts[c.v[(k + 1) % c.n]];
    const double w = p.cross(q);
    r += (p + q) * w;
  }
  return r / (6.0 * area);
}

}  // namespace

Mesh2D::Mesh2D(std::vector<Vec2> vertices, std::vector<std::vector<int>> cells)
    : vertices_(std::move(vertices)) {
  cells_.reserve(cells.size());
  for (const auto& cv : cells) {
    if (cv.size() != 3 && cv.size() != 4)
      throw AssemblyError("Mesh2D: only triangles and quadrilaterals are supported");
    Cell c;
    c.n = static_cast<int>(cv.size());
    for (int k = 0; k < c.n; ++k) c.v[k] = cv[k];
    c.area = polygon_area(vertices_, c);
    if (!(c.area > 0.0))
      throw AssemblyError("Mesh2D: cell with non-positive area (vertices must be CCW)");
    c.centroid = polygon_centroid(vertices_, c, c.area);
    cells_.push_back(c);
  }
  build_topology();
}

void Mesh2D::build_topology() {
  cell_facets_.assign(cells_.size(), {});
  // canonical edge key -> facet id
  std::map<std::pair<int, int>, int> edge_map;
  for (int ci = 0; ci < num_cells(); ++ci) {
    const Cell& c = cells_[ci];
    for (int k = 0; k < c.n; ++k) {
      int va = c.v[k], vb = c.v[(k + 1) % c.n];
      auto key = std::minmax(va, vb);
      auto it = edge_map.find(key);
      if (it == edge_map.end()) {
        Facet f;
        f.a = key.first;
        f.b = key.second;
        f.left = ci;
        const Vec2 t = vertices_[f.b] - vertices_[f.a];
        f.length = t.norm();
        f.midpoint = (vertices_[f.a] + vertices_[f.b]) * 0.5;
        f.normal = t.perp() / f.length;
        edge_map.emplace(key, num_facets());
        cell_facets_[ci].push_back(num_facets());
        facets_.push_back(f);
      } else {
        Facet& f = facets_[it->second];
        if (f.right >= 0)
          throw AssemblyError("Mesh2D: facet shared by more than two cells");
        f.right = ci;
        if (f.right < f.left) std::swap(f.left, f.right);
        cell_facets_[ci].push_back(it->second);
      }
    }
  }
  // orient normals: left -> right for interior, outward for boundary
  for (Facet& f : facets_) {
    const Vec2 ref = f.boundary() ? (f.midpoint - cells_[f.left].centroid)
                                  : (cells_[f.right].centroid - cells_[f.left].centroid);
    if (f.normal.dot(ref) < 0.0) f.normal = f.normal * (-1.0);
  }
  vertex_facets_.assign(vertices_.size(), {});
  vertex_cells_.assign(vertices_.size(), {});
  for (int fi = 0; fi < num_facets(); ++fi) {
    vertex_facets_[facets_[fi].a].push_back(fi);
    vertex_facets_[facets_[fi].b].push_back(fi);
  }
  for (int ci = 0; ci < num_cells(); ++ci)
    for (int k = 0; k < cells_[ci].n; ++k) vertex_cells_[cells_[ci].v[k]].push_back(ci);
}

std::array<int, 2> Mesh2D::cell_facets_at_vertex(int c, int v) const {
  std::array<int, 2> out{{-1, -1}};
  int found = 0;
  for (int f : cell_facets_[c]) {
    if (facets_[f].a == v || facets_[f].b == v) {
      if (found >= 2)
        throw AssemblyError("Mesh2D: cell-vertex pair with more than two incident facets");
      out[found++] = f;
    }
  }
  if (found != 2)
    throw AssemblyError("Mesh2D: cell-vertex pair without exactly two incident facets");
  return out;
}

int Mesh2D::facet_other_vertex(int f, int v) const {
  const Facet& ff = facets_[f];
  return ff.a == v ? ff.b : ff.a;
}

double Mesh2D::total_area() const {
  double a = 0.0;
  for (const Cell& c : cells_) a += c.area;
  return a;
}

double Mesh2D::min_edge_length() const {
  double m = std::numeric_limits<double>::max();
  for (const Facet& f : facets_) m = std::min(m, f.length);
  return m;
}

double Mesh2D::min_diameter() const {
  double m = std::numeric_limits<double>::max();
  for (const Cell& c : cells_) {
    double d = 0.0;
    for (int i = 0; i < c.n; ++i)
      for (int j = i + 1; j < c.n; ++j)
        d = std::max(d, (vertices_[c.v[i]] - vertices_[c.v[j]]).norm());
    m = std::min(m, d);
  }
  return m;
}

void Mesh2D::validate() const {
  double diam = 0.0;
  Vec2 lo = vertices_.empty() ? Vec2{} : vertices_[0], hi = lo;
  for (const Vec2& p : vertices_) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  diam = (hi - lo).norm();
  const double tol = 1e-12 * std::max(diam, 1.0);
  // duplicate vertex scan via quantized hashing
  std::unordered_map<long long, std::vector<int>> buckets;
  auto key_of = [&](const Vec2& p) {
    const long long ix = static_cast<long long>(std::floor(p.x / (16 * tol)));
    const long long iy = static_cast<long long>(std::floor(p.y / (16 * tol)));
    return (ix << 28) ^ iy;
  };
  for (int v = 0; v < num_vertices(); ++v) {
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy) {
        const Vec2 shifted{vertices_[v].x + 16 * tol * dx, vertices_[v].y + 16 * tol * dy};
        auto it = buckets.find(key_of(shifted));
        if (it == buckets.end()) continue;
        for (int w : it->second)
          if ((vertices_[v] - vertices_[w]).norm() < tol)
            throw AssemblyError("Mesh2D: duplicate vertices " + std::to_string(w) + "," +
                                std::to_string(v));
      }
    buckets[key_of(vertices_[v])].push_back(v);
  }
  for (const Cell& c : cells_)
    if (!(c.area > 0.0)) throw AssemblyError("Mesh2D: non-positive cell area");
  for (const Facet& f : facets_) {
    if (!f.boundary() && f.left >= f.right)
      throw AssemblyError("Mesh2D: facet orientation violates left<right convention");
  }
  for (int ci = 0; ci < num_cells(); ++ci)
    for (int k = 0; k < cells_[ci].n; ++k) (void)cell_facets_at_vertex(ci, cells_[ci].v[k]);
}

void Mesh2D::write_ascii(std::ostream& os) const {
  char buf[64];
  os << "vertices " << num_vertices() << "\n";
  for (const Vec2& p : vertices_) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g", p.x, p.y);
    os << buf << "\n";
  }
  os << "cells " << num_cells() << "\n";
  for (const Cell& c : cells_) {
    os << c.n;
    for (int k = 0; k < c.n; ++k) os << " " << c.v[k];
    os << "\n";
  }
}

Mesh2D Mesh2D::read_ascii(std::istream& is) {
  std::string kw;
  int nv = 0;
  if (!(is >> kw >> nv) || kw != "vertices") throw IoError("mesh: expected 'vertices N'");
  std::vector<Vec2> verts(nv);
  for (int i = 0; i < nv; ++i)
    if (!(is >> verts[i].x >> verts[i].y)) throw IoError("mesh: bad vertex line");
  int nc = 0;
  if (!(is >> kw >> nc) || kw != "cells") throw IoError("mesh: expected 'cells M'");
  std::vector<std::vector<int>> cells(nc);
  for (int i = 0; i < nc; ++i) {
    int k = 0;
    if (!(is >> k) || (k != 3 && k != 4)) throw IoError("mesh: bad cell arity");
    cells[i].resize(k);
    for (int j = 0; j < k; ++j)
      if (!(is >> cells[i][j])) throw IoError("mesh: bad cell line");
  }
  return Mesh2D(std::move(verts), std::move(cells));
}

void Mesh2D::write_ascii_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_ascii(os);
}

Mesh2D Mesh2D::read_ascii_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_ascii(is);
}

Mesh2D generate_structured(const Box& extent, int nx, int ny, ElementKind kind) {
  if (!(extent.width() > 0.0) || !(extent.height() > 0.0))
    throw AssemblyError("generate_structured: zero or negative extent");
  if (nx < 1 || ny < 1) throw AssemblyError("generate_structured: nx, ny must be >= 1");

  std::vector<Vec2> verts((nx + 1) * (ny + 1));
  auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      verts[vid(i, j)] = {extent.lo.x + extent.width() * i / nx,
                          extent.lo.y + extent.height() * j / ny};

  std::vector<std::vector<int>> cells;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      if (kind == ElementKind::quad) {
        cells.push_back({a, b, c, d});
      } else if ((i + j) % 2 == 0) {  // "/" diagonal a-c
        cells.push_back({a, b, c});
        cells.push_back({a, c, d});
      } else {  // "\" diagonal b-d
        cells.push_back({a, b, d});
        cells.push_back({b, c, d});
      }
    }
  return Mesh2D(std::move(verts), std::move(cells));
}

RefinedMesh refine_uniform(const Mesh2D& mesh) {
  std::vector<Vec2> verts = mesh.vertices();
  std::map<std::pair<int, int>, int> edge_mid;
  auto midpoint_of = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = edge_mid.find(key);
    if (it != edge_mid.end()) return it->second;
    const int id = static_cast<int>(verts.size());
    verts.push_back((mesh.vertex(a) + mesh.vertex(b)) * 0.5);
    edge_mid.emplace(key, id);
    return id;
  };

  std::vector<std::vector<int>> cells;
  std::vector<int> parent;
  for (int ci = 0; ci < mesh.num_cells(); ++ci) {
    const Cell& c = mesh.cell(ci);
    if (c.n == 3) {
      const int v0 = c.v[0], v1 = c.v[1], v2 = c.v[2];
      const int m01 = midpoint_of(v0, v1), m12 = midpoint_of(v1, v2), m20 = midpoint_of(v2, v0);
      cells.push_back({v0, m01, m20});
      cells.push_back({m01, v1, m12});
      cells.push_back({m20, m12, v2});
      cells.push_back({m01, m12, m20});
      parent.insert(parent.end(), 4, ci);
    } else {
      const int v0 = c.v[0], v1 = c.v[1], v2 = c.v[2], v3 = c.v[3];
      const int m01 = midpoint_of(v0, v1), m12 = midpoint_of(v1, v2);
      const int m23 = midpoint_of(v2, v3), m30 = midpoint_of(v3, v0);
      const int cc = static_cast<int>(verts.size());
      verts.push_back((mesh.vertex(v0) + mesh.vertex(v1) + mesh.vertex(v2) + mesh.vertex(v3)) /
                      4.0);
      cells.push_back({v0, m01, cc, m30});
      cells.push_back({m01, v1, m12, cc});
      cells.push_back({cc, m12, v2, m23});
      cells.push_back({m30, cc, m23, v3});
      parent.insert(parent.end(), 4, ci);
    }
  }
  return {Mesh2D(std::move(verts), std::move(cells)), std::move(parent)};
}

std::vector<int> Decomposition::interface_facets(int s, int g) const {
  const Interface& itf = interfaces[g];
  const Mesh2D& mesh = meshes[s];
  const double tol = 1e-9 * std::max(domain.width(), domain.height());
  std::vector<std::pair<double, int>> found;
  for (int fi = 0; fi < mesh.num_facets(); ++fi) {
    const Facet& f = mesh.facet(fi);
    if (!f.boundary()) continue;
    const double c = itf.normal_axis == 0 ? f.midpoint.x : f.midpoint.y;
    const double t = itf.normal_axis == 0 ? f.midpoint.y : f.midpoint.x;
    if (std::abs(c - itf.coord) <= tol && t > itf.t0 - tol && t < itf.t1 + tol)
      found.emplace_back(t, fi);
  }
  std::sort(found.begin(), found.end());
  double covered = 0.0;
  std::vector<int> out;
  out.reserve(found.size());
  for (auto& [t, fi] : found) {
    covered += mesh.facet(fi).length;
    out.push_back(fi);
  }
  if (std::abs(covered - itf.length()) > 1e-9 * std::max(itf.length(), 1.0))
    throw AssemblyError("decomposition: subdomain facets do not tile interface");
  return out;
}

OuterSide Decomposition::outer_side(int s, int facet) const {
  const Facet& f = meshes[s].facet(facet);
  if (!f.boundary()) return OuterSide::none;
  const double tol = 1e-9 * std::max(domain.width(), domain.height());
  if (std::abs(f.midpoint.x - domain.lo.x) <= tol) return OuterSide::left;
  if (std::abs(f.midpoint.x - domain.hi.x) <= tol) return OuterSide::right;
  if (std::abs(f.midpoint.y - domain.lo.y) <= tol) return OuterSide::bottom;
  if (std::abs(f.midpoint.y - domain.hi.y) <= tol) return OuterSide::top;
  return OuterSide::none;
}

Decomposition decompose(const Box& domain, int snx, int sny,
                        const std::vector<SubdomainResolution>& resolutions,
                        ElementKind kind) {
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0))
    throw AssemblyError("decompose: degenerate domain box");
  if (snx < 1 || sny < 1) throw AssemblyError("decompose: subdomain counts must be >= 1");
  if (static_cast<int>(resolutions.size()) != snx * sny)
    throw AssemblyError("decompose: one resolution entry per subdomain required");

  Decomposition dec;
  dec.domain = domain;
  dec.snx = snx;
  dec.sny = sny;
  const double hx = domain.width() / snx;
  const double hy = domain.height() / sny;
  for (int sj = 0; sj < sny; ++sj)
    for (int si = 0; si < snx; ++si) {
      Box b{{domain.lo.x + si * hx, domain.lo.y + sj * hy},
            {domain.lo.x + (si + 1) * hx, domain.lo.y + (sj + 1) * hy}};
      dec.boxes.push_back(b);
      const SubdomainResolution& r = resolutions[dec.subdomain_id(si, sj)];
      Mesh2D m = generate_structured(b, r.nx, r.ny, kind);
      for (int k = 0; k < r.refinements; ++k) m = refine_uniform(m).mesh;
      dec.meshes.push_back(std::move(m));
    }

  dec.subdomain_interfaces.assign(dec.num_subdomains(), {});
  auto add_interface = [&](int lo, int hi, Interface itf) {
    itf.side_lo = lo;
    itf.side_hi = hi;
    const int id = static_cast<int>(dec.interfaces.size());
    dec.interfaces.push_back(itf);
    dec.subdomain_interfaces[lo].emplace_back(id, true);
    dec.subdomain_interfaces[hi].emplace_back(id, false);
  };
  // vertical interfaces (normal +x), then horizontal (normal +y)
  for (int sj = 0; sj < sny; ++sj)
    for (int si = 0; si + 1 < snx; ++si) {
      Interface itf;
      itf.normal_axis = 0;
      itf.coord = domain.lo.x + (si + 1) * hx;
      itf.t0 = domain.lo.y + sj * hy;
      itf.t1 = itf.t0 + hy;
      itf.normal = {1.0, 0.0};
      add_interface(dec.subdomain_id(si, sj), dec.subdomain_id(si + 1, sj), itf);
    }
  for (int sj = 0; sj + 1 < sny; ++sj)
    for (int si = 0; si < snx; ++si) {
      Interface itf;
      itf.normal_axis = 1;
      itf.coord = domain.lo.y + (sj + 1) * hy;
      itf.t0 = domain.lo.x + si * hx;
      itf.t1 = itf.t0 + hx;
      itf.normal = {0.0, 1.0};
      add_interface(dec.subdomain_id(si, sj), dec.subdomain_id(si, sj + 1), itf);
    }
  for (int sj = 1; sj + 1 < sny; ++sj)
    for (int si = 1; si + 1 < snx; ++si)
      dec.interior_subdomains.push_back(dec.subdomain_id(si, sj));
  return dec;
}

InterfaceGrid build_interface_grid(const Interface& interface, int n_cells) {
  if (n_cells < 1) throw AssemblyError("build_interface_grid: n_cells must be >= 1");
  return {interface.t0, interface.t1, n_cells};
}

}  // namespace fmdd
