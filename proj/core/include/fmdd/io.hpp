#pragma once

#include <string>
#include <vector>

#include "fmdd/linalg.hpp"
#include "fmdd/mesh.hpp"

namespace fmdd::io {

using linalg::Vector;

/// Cell-averaged velocity vectors from facet fluxes (exact for constants).
std::vector<Vec2> cell_velocities(const Mesh2D& mesh, const Vector& facet_fluxes);

/// Legacy ASCII VTK unstructured grid with CELL_DATA pressure and velocity.
/// Multiple meshes are concatenated into one grid.
void write_vtk(const std::string& path, const std::vector<const Mesh2D*>& meshes,
               const std::vector<const Vector*>& pressures,
               const std::vector<std::vector<Vec2>>& velocities);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace fmdd::io
