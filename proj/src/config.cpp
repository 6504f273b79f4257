#include "conetilt/config.hpp"

#include <cmath>
#include <sstream>

namespace conetilt {

namespace {

void require(bool ok, const std::string &message) {
  if (!ok) {
    throw ValidationError(message);
  }
}

} // namespace

void validate(const DisplayConfig &config) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  require(positive(config.d), "config: d must be positive");
  require(positive(config.u_m), "config: u_m must be positive");
  require(positive(config.lambda), "config: lambda must be positive");
  require(positive(config.slm_pitch), "config: slm_pitch must be positive");
  require(positive(config.display_pitch), "config: display_pitch must be positive");
  require(config.n_x > 0 && config.n_y > 0, "config: resolution must be positive");
  require(!config.plane_depths.empty(), "config: plane_depths is empty");
  for (std::size_t i = 0; i < config.plane_depths.size(); ++i) {
    const double z = config.plane_depths[i];
    require(!std::isnan(z) && z > 0.0, "config: plane depths must be > 0");
    if (i > 0) {
      require(z > config.plane_depths[i - 1], "config: plane depths must be strictly increasing");
    }
  }
  const double bound = max_cone_radius(config);
  if (config.u_m > bound) {
    std::ostringstream os;
    os << "config: u_m = " << config.u_m << " rad exceeds the SLM Nyquist bound pi/(2 k slm_pitch) = lambda/(4 slm_pitch) = "
       << bound << " rad";
    throw ValidationError(os.str());
  }
}

double plane_focal_length(double z_i, const DisplayConfig &config) {
  if (!(z_i > 0.0)) {
    throw ValidationError("plane_focal_length: depth must be positive");
  }
  if (std::isinf(z_i)) {
    return config.d;
  }
  return config.d * z_i / (z_i + config.d);
}

double min_occluder_separation(double z_o, double z_i, double d, double u_m, double display_pitch) {
  return 2.0 * d * d * u_m / display_pitch * std::abs(diopters(z_o) - diopters(z_i));
}

double min_occluder_separation(double z_o, double z_i, const DisplayConfig &config) {
  return min_occluder_separation(z_o, z_i, config.d, config.u_m, config.display_pitch);
}

} // namespace conetilt
