#pragma once

#include <string>
#include <vector>

#include "fmdd/geometry.hpp"
#include "fmdd/mesh.hpp"

namespace fmdd {

/// Cellwise-constant symmetric positive-definite permeability tensor field.
class PermField {
public:
  PermField() = default;
  explicit PermField(std::vector<Tensor2> cell_tensors);

  static PermField constant(const Mesh2D& mesh, const Tensor2& K);

  const Tensor2& at(int cell) const { return K_[cell]; }
  int size() const { return static_cast<int>(K_.size()); }

private:
  std::vector<Tensor2> K_;
};

/// Scalar raster over an nx-by-ny cell grid, row-major with the first row at
/// the bottom of the box (y increasing with row index).
struct Raster {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;  // size nx*ny

  double at(int i, int j) const { return values[j * nx + i]; }
};

/// Whitespace-separated scalar values; count must equal nx*ny.
Raster load_raster(const std::string& path, int nx, int ny);
Raster parse_raster(std::istream& is, int nx, int ny, const std::string& origin);

/// Maps each mesh cell to the raster cell containing its centroid and builds
/// K = R^-1 diag(k, alpha k) R with R the clockwise rotation by theta_deg.
PermField perm_from_raster(const Mesh2D& mesh, const Box& raster_box, const Raster& raster,
                           double alpha = 1.0, double theta_deg = 0.0);

}  // namespace fmdd
