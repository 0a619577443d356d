#include "fmdd/perm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fmdd/errors.hpp"

namespace fmdd {

PermField::PermField(std::vector<Tensor2> cell_tensors) : K_(std::move(cell_tensors)) {
  for (size_t c = 0; c < K_.size(); ++c) {
    const Tensor2& K = K_[c];
    if (!K.positive_definite())
      throw AssemblyError("PermField: tensor of cell " + std::to_string(c) +
                          " is not positive definite");
  }
}

PermField PermField::constant(const Mesh2D& mesh, const Tensor2& K) {
  return PermField(std::vector<Tensor2>(mesh.num_cells(), K));
}

Raster parse_raster(std::istream& is, int nx, int ny, const std::string& origin) {
  Raster r;
  r.nx = nx;
  r.ny = ny;
  r.values.reserve(static_cast<size_t>(nx) * ny);
  double v;
  while (is >> v) r.values.push_back(v);
  if (static_cast<int>(r.values.size()) != nx * ny) {
    std::ostringstream msg;
    msg << origin << ": raster cell count mismatch, expected " << nx * ny << " values, found "
        << r.values.size();
    throw ConfigError(msg.str());
  }
  for (double k : r.values)
    if (!(k > 0.0) || !std::isfinite(k))
      throw ConfigError(origin + ": raster values must be positive and finite");
  return r;
}

Raster load_raster(const std::string& path, int nx, int ny) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open raster file " + path);
  return parse_raster(is, nx, ny, path);
}

PermField perm_from_raster(const Mesh2D& mesh, const Box& raster_box, const Raster& raster,
                           double alpha, double theta_deg) {
  const double theta = theta_deg * M_PI / 180.0;
  std::vector<Tensor2> K(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Vec2 x = mesh.cell(c).centroid;
    int i = static_cast<int>(std::floor((x.x - raster_box.lo.x) / raster_box.width() * raster.nx));
    int j = static_cast<int>(std::floor((x.y - raster_box.lo.y) / raster_box.height() * raster.ny));
    i = std::clamp(i, 0, raster.nx - 1);
    j = std::clamp(j, 0, raster.ny - 1);
    K[c] = Tensor2::rotated_diagonal(raster.at(i, j), alpha, theta);
  }
  return PermField(std::move(K));
}

}  // namespace fmdd
