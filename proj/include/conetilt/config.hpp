#ifndef CONETILT_CONFIG_HPP
#define CONETILT_CONFIG_HPP

#include <limits>
#include <numbers>
#include <vector>

#include "conetilt/types.hpp"

namespace conetilt {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Optical parameters of the display, SI units throughout.
///
/// Focal-plane depths are stored in meters and may include +infinity
/// (0 diopters). The aperture is derived, never set independently:
/// aperture_radius() == d * u_m.
struct DisplayConfig {
  double d = 0.058;              ///< display (virtual copy) to tunable lens
  double u_m = 0.020;            ///< light-cone half-angle, radians
  double lambda = 520e-9;        ///< wavelength
  double slm_pitch = 6.4e-6;     ///< phase SLM pixel pitch
  double display_pitch = 15.7e-6;
  Eigen::Index n_x = 256;
  Eigen::Index n_y = 256;
  std::vector<double> plane_depths{0.25, 1.0};

  double aperture_radius() const { return d * u_m; }
  double wave_number() const { return 2.0 * std::numbers::pi / lambda; }
  /// Angular size of one display pixel seen from the lens (shared by all planes).
  double angular_pitch() const { return display_pitch / d; }
  PlaneGeometry display_geometry() const { return {n_y, n_x, display_pitch}; }
  /// Pixel grid of the focal plane at depth z (pitch scales with z / d).
  PlaneGeometry plane_geometry(double z) const { return {n_y, n_x, display_pitch * z / d}; }
};

/// Throws ValidationError naming the violated constraint.
void validate(const DisplayConfig &config);

/// 1/z with 1/inf == 0.
inline double diopters(double z) { return 1.0 / z; }

/// Focal length of the tunable lens that images the display to depth z_i.
double plane_focal_length(double z_i, const DisplayConfig &config);

/// Field-lens tilt that aims the chief ray at the aperture center.
inline Vec2 default_field_tilt(const Vec2 &x, const DisplayConfig &config) { return -x / config.d; }

/// Position of the virtual pixel on the focal plane at depth z_i.
inline Vec2 virtual_pixel_position(const Vec2 &x, double z_i, const DisplayConfig &config) {
  return (z_i / config.d) * x;
}

/// Ray angle after the tunable lens for a ray leaving display point x at
/// (pre-field-lens) angle u.
inline Vec2 ray_after_lens(const Vec2 &x, const Vec2 &u, double z_i, const DisplayConfig &config) {
  return -x / config.d + (config.d / z_i) * u;
}

/// Largest cone half-angle the SLM can tilt by 2 u_m without phase aliasing.
inline double max_cone_radius(double lambda, double slm_pitch) { return lambda / (4.0 * slm_pitch); }
inline double max_cone_radius(const DisplayConfig &config) {
  return max_cone_radius(config.lambda, config.slm_pitch);
}

/// Eyebox (aperture) diameter, 2 u_m d.
inline double eyebox_diameter(double d, double u_m) { return 2.0 * u_m * d; }
inline double eyebox_diameter(const DisplayConfig &config) { return eyebox_diameter(config.d, config.u_m); }

/// Smallest gap between two occluding contours on the front plane that a
/// single cone tilt can still clear, in display pixels.
double min_occluder_separation(double z_o, double z_i, double d, double u_m, double display_pitch);
double min_occluder_separation(double z_o, double z_i, const DisplayConfig &config);

} // namespace conetilt

#endif // CONETILT_CONFIG_HPP
