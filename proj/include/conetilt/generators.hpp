#ifndef CONETILT_GENERATORS_HPP
#define CONETILT_GENERATORS_HPP

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "conetilt/scene.hpp"

namespace conetilt {

/// A procedural scene together with the focal planes it was designed for
/// and named helper masks (display pixel grid).
struct GeneratedScene {
  std::string name;
  LayeredScene scene;
  std::vector<double> plane_depths; ///< meters, increasing
  std::map<std::string, Mask> masks;
  nlohmann::json params;
};

/// Known names: occluder_text, leaf, chessboard, railing. Parameters not
/// given take their defaults; the effective set is returned in `params`.
///
///  occluder_text  opaque disc at 0.25 m over a texture with a glyph band at
///                 1 m. {disc_radius_px: 60, back_texture: "pattern"|"flat"}
///                 masks: occluder, glyphs
///  leaf           textured leaf silhouette at 0.25 m over texture at 1 m.
///                 masks: occluder
///  chessboard     floor ramp from 0 to 4 diopters with upright pieces, 40
///                 planes uniform in diopters. masks: pieces
///  railing        vertical bars at 0.25 m over texture at 1 m, gap equal to
///                 spacing_factor times the minimum occluder separation.
///                 {spacing_factor: 0.5, bar_width_px: 6}  masks: occluder, gaps
GeneratedScene generate_scene(const std::string &name, const nlohmann::json &params, const DisplayConfig &config);

std::vector<std::string> generator_names();

} // namespace conetilt

#endif // CONETILT_GENERATORS_HPP
