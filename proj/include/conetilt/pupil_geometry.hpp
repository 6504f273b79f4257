#ifndef CONETILT_PUPIL_GEOMETRY_HPP
#define CONETILT_PUPIL_GEOMETRY_HPP

#include <optional>
#include <span>

#include "conetilt/config.hpp"

namespace conetilt {

/// Finite-pupil camera looking into the display's aperture.
struct CameraView {
  Vec2 pupil_center{0.0, 0.0}; ///< on the aperture plane, meters
  double pupil_radius = 0.15e-3;
  double focus_depth = 1.0; ///< meters, may be +inf
  Eigen::Index sensor_cols = 0; ///< 0: display resolution
  Eigen::Index sensor_rows = 0;
  int samples_per_pixel = 256;

  Eigen::Index cols(const DisplayConfig &config) const { return sensor_cols > 0 ? sensor_cols : config.n_x; }
  Eigen::Index rows(const DisplayConfig &config) const { return sensor_rows > 0 ? sensor_rows : config.n_y; }
};

/// Rejects pupils that leave the eyebox (the aperture disc of radius d u_m).
void validate(const CameraView &camera, const DisplayConfig &config);

struct Disc {
  Vec2 center;
  double radius = 0.0;

  /// Open-disc membership.
  bool contains(const Vec2 &p) const { return (p - center).squaredNorm() < radius * radius; }
};

struct Box {
  Vec2 lo;
  Vec2 hi;
};

/// Area of the intersection of the discs and (optionally) an axis-aligned box.
///
/// Integrates the vertical chord length over x between every breakpoint
/// where the chord's active boundaries change; each piece is mapped with a
/// cosine substitution that removes the square-root endpoint behavior, so a
/// fixed Gauss-Legendre rule is accurate to ~1e-12 relative.
double intersection_area(std::span<const Disc> discs, const std::optional<Box> &box = std::nullopt);

/// Fraction of the camera pupil through which the emitter's tilted cone is
/// visible: area(pupil ∩ aperture ∩ cone(d * tilt, d u_m)) / area(pupil).
/// A zero-radius pupil reduces to open-disc membership of its center.
double effective_pupil_weight(const Vec2 &tilt, const CameraView &camera, const DisplayConfig &config);

} // namespace conetilt

#endif // CONETILT_PUPIL_GEOMETRY_HPP
