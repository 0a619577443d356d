#include "fmdd/io.hpp"

#include <cstdio>
#include <fstream>

#include "fmdd/errors.hpp"

namespace fmdd::io {

std::vector<Vec2> cell_velocities(const Mesh2D& mesh, const Vector& facet_fluxes) {
  std::vector<Vec2> u(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    Vec2 acc{0.0, 0.0};
    for (int fi : mesh.facets_of_cell(c)) {
      const Facet& f = mesh.facet(fi);
      const double out = (f.left == c ? 1.0 : -1.0) * facet_fluxes(fi);
      acc += out * (f.midpoint - mesh.cell(c).centroid);
    }
    u[c] = acc / mesh.cell(c).area;
  }
  return u;
}

void write_vtk(const std::string& path, const std::vector<const Mesh2D*>& meshes,
               const std::vector<const Vector*>& pressures,
               const std::vector<std::vector<Vec2>>& velocities) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  int total_points = 0, total_cells = 0, total_ints = 0;
  for (const Mesh2D* m : meshes) {
    total_points += m->num_vertices();
    total_cells += m->num_cells();
    for (int c = 0; c < m->num_cells(); ++c) total_ints += m->cell(c).n + 1;
  }
  os << "# vtk DataFile Version 3.0\nfmdd fields\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << total_points << " double\n";
  char buf[96];
  for (const Mesh2D* m : meshes)
    for (const Vec2& p : m->vertices()) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g 0\n", p.x, p.y);
      os << buf;
    }
  os << "CELLS " << total_cells << " " << total_ints << "\n";
  int offset = 0;
  for (const Mesh2D* m : meshes) {
    for (int c = 0; c < m->num_cells(); ++c) {
      os << m->cell(c).n;
      for (int k = 0; k < m->cell(c).n; ++k) os << " " << offset + m->cell(c).v[k];
      os << "\n";
    }
    offset += m->num_vertices();
  }
  os << "CELL_TYPES " << total_cells << "\n";
  for (const Mesh2D* m : meshes)
    for (int c = 0; c < m->num_cells(); ++c) os << (m->cell(c).n == 3 ? 5 : 9) << "\n";
  os << "CELL_DATA " << total_cells << "\n";
  os << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (size_t k = 0; k < meshes.size(); ++k)
    for (int c = 0; c < meshes[k]->num_cells(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g\n", (*pressures[k])(c));
      os << buf;
    }
  os << "VECTORS velocity double\n";
  for (size_t k = 0; k < meshes.size(); ++k)
    for (int c = 0; c < meshes[k]->num_cells(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g 0\n", velocities[k][c].x, velocities[k][c].y);
      os << buf;
    }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << content;
}

}  // namespace fmdd::io
