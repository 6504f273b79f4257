#ifndef CONETILT_TILT_FIELD_HPP
#define CONETILT_TILT_FIELD_HPP

#include <utility>
#include <vector>

#include "conetilt/scene.hpp"

namespace conetilt {

enum class TiltFlag : std::uint8_t { Untilted = 0, Tilted = 1, Infeasible = 2, Removed = 3 };

/// Intersection of an emitter's light cone with a nearer focal plane.
struct ConeFootprint {
  Vec2 center;          ///< plane meters, u = 0 ray
  double diameter = 0;  ///< w
  double z_i = 0;       ///< emitter depth
  double z_o = 0;       ///< occluder depth
};

/// Footprint of the cone from display point x (plane z_i) on plane z_o < z_i.
ConeFootprint cone_footprint(const Vec2 &x, double z_i, double z_o, const DisplayConfig &config);

/// Where the ray (x, u) crosses plane z_o; affine in u.
Vec2 footprint_point(const Vec2 &x, const Vec2 &u, double z_i, double z_o, const DisplayConfig &config);

/// Footprint-center displacement per radian of cone tilt, d z_o (1/z_o - 1/z_i).
double footprint_shift_per_tilt(double z_o, double z_i, const DisplayConfig &config);

struct TiltPlane {
  double depth = 0.0;
  Grid<> tilt_x; ///< radians
  Grid<> tilt_y;
  Grid<std::uint8_t> flags;

  Vec2 tilt(Eigen::Index r, Eigen::Index c) const { return {tilt_x(r, c), tilt_y(r, c)}; }
  TiltFlag flag(Eigen::Index r, Eigen::Index c) const { return static_cast<TiltFlag>(flags(r, c)); }
};

struct TiltField {
  std::vector<TiltPlane> planes;
  /// Infeasible pixels are dropped from the display instead of shown with a clamped tilt.
  bool infeasible_removed = false;

  std::size_t count(TiltFlag flag) const;
};

/// Zero tilt everywhere; every pixel untilted (removed pixels flagged).
TiltField make_untilted_field(const FocalStack &stack);

struct TiltOptions {
  bool remove_infeasible = false;
};

/// Per-pixel cone tilts that steer every emitter's cone off the occupied
/// content of all nearer planes.
///
/// Candidate tilt: the violating plane whose nearest contour point is
/// closest in tilt units (distance / shift-per-tilt) decides; the shifted
/// disc is placed tangent to that contour on its unoccupied side, then
/// re-tested against every nearer plane. Pixels that cannot be cleared with
/// |tilt| <= 2 u_m are flagged infeasible and keep the candidate tilt clamped
/// to 2 u_m.
TiltField compute_tilt_field(const FocalStack &stack, const DisplayConfig &config, const TiltOptions &options = {});

/// Whether every ray of the untilted cone of pixel (r, c) on plane `plane`
/// hits occupied content on some nearer plane.
bool fully_occluded(const FocalStack &stack, const DisplayConfig &config, std::size_t plane, Eigen::Index r,
                    Eigen::Index c);

/// Clears (and marks as removed) every pixel no ray of its cone can reach the viewer from.
FocalStack remove_fully_occluded(const FocalStack &stack, const DisplayConfig &config);

/// Splits the content into the untilted sweep and the tilted sweep.
std::pair<FocalStack, FocalStack> decompose_fg_bg(const FocalStack &stack, const TiltField &field);

/// Pixels with a 4-neighbor of different flag.
Mask flag_boundary(const TiltPlane &plane);

} // namespace conetilt

#endif // CONETILT_TILT_FIELD_HPP
