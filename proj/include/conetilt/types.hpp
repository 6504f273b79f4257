#ifndef CONETILT_TYPES_HPP
#define CONETILT_TYPES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace conetilt {

/// Row-major dense grid; element (row, col) with row 0 at the top of the image.
template <typename Scalar = double>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Grid<bool>;
using Vec2 = Eigen::Vector2d;

/// Input or configuration rejected before any computation (CLI exit code 1).
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A numerical stage failed to produce a result (CLI exit code 2).
class NumericalError : public std::runtime_error {
public:
  NumericalError(const std::string &what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_;
};

/// Pixel-center coordinates of a centered grid with uniform pitch.
///
/// Pixel (r, c) covers columns [c, c+1] and rows [r, r+1] in continuous
/// pixel units; its center sits at ((c + 0.5 - cols/2) * pitch,
/// (rows/2 - r - 0.5) * pitch) in plane meters, y pointing up.
struct PlaneGeometry {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  double pitch = 1.0;

  Vec2 center_of(Eigen::Index r, Eigen::Index c) const {
    return {(double(c) + 0.5 - 0.5 * double(cols)) * pitch,
            (0.5 * double(rows) - double(r) - 0.5) * pitch};
  }
  /// Meters to continuous (u = column, v = row) pixel coordinates.
  Vec2 to_pixel(const Vec2 &p) const {
    return {p.x() / pitch + 0.5 * double(cols), 0.5 * double(rows) - p.y() / pitch};
  }
  Vec2 to_meters(const Vec2 &uv) const {
    return {(uv.x() - 0.5 * double(cols)) * pitch, (0.5 * double(rows) - uv.y()) * pitch};
  }
  bool contains(Eigen::Index r, Eigen::Index c) const {
    return r >= 0 && c >= 0 && r < rows && c < cols;
  }
};

} // namespace conetilt

#endif // CONETILT_TYPES_HPP
