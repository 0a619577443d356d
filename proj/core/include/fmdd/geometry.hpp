#pragma once

#include <cmath>

namespace fmdd {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }

  /// Counter-clockwise 90-degree rotation.
  Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

/// Symmetric 2x2 tensor, used for permeability fields.
struct Tensor2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  Tensor2() = default;
  Tensor2(double xx_, double xy_, double yy_) : xx(xx_), xy(xy_), yy(yy_) {}

  static Tensor2 identity() { return {1.0, 0.0, 1.0}; }
  static Tensor2 diagonal(double kx, double ky) { return {kx, 0.0, ky}; }

  /// diag(k, alpha*k) conjugated with a clockwise rotation by theta (radians).
  static Tensor2 rotated_diagonal(double k, double alpha, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    // R clockwise = [[c, s], [-s, c]]; K = R^T diag(k, alpha k) R
    const double k2 = alpha * k;
    return {c * c * k + s * s * k2, c * s * k - s * c * k2,
            s * s * k + c * c * k2};
  }

  Vec2 apply(const Vec2& v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }

  double det() const { return xx * yy - xy * xy; }
  double trace() const { return xx + yy; }

  double min_eigenvalue() const {
    const double m = 0.5 * trace();
    const double d = std::sqrt(std::max(0.0, m * m - det()));
    return m - d;
  }
  double max_eigenvalue() const {
    const double m = 0.5 * trace();
    const double d = std::sqrt(std::max(0.0, m * m - det()));
    return m + d;
  }

  bool positive_definite() const { return min_eigenvalue() > 0.0; }

  Tensor2 inverse() const {
    const double d = det();
    return {yy / d, -xy / d, xx / d};
  }
};

struct Box {
  Vec2 lo;
  Vec2 hi;

  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  double area() const { return width() * height(); }
};

}  // namespace fmdd
