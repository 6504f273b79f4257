#ifndef CONETILT_SCENE_HPP
#define CONETILT_SCENE_HPP

#include <vector>

#include "conetilt/config.hpp"

namespace conetilt {

/// One RGB-D layer: linear radiance per channel plus depth in diopters.
///
/// `coverage` marks pixels that carry content; a plain RGB-D image covers
/// every pixel. Layers other than the first describe surfaces hidden behind
/// it, which a single depth map cannot hold.
struct SceneRGBD {
  std::vector<Grid<>> intensity;
  Grid<> depth;
  Mask coverage;

  Eigen::Index rows() const { return depth.rows(); }
  Eigen::Index cols() const { return depth.cols(); }
  int channels() const { return static_cast<int>(intensity.size()); }
};

/// Layers ordered front to back; where two layers land on the same focal
/// plane pixel the earlier one wins.
struct LayeredScene {
  std::vector<SceneRGBD> layers;
};

/// Builds a fully-covered layer and checks the invariants.
SceneRGBD make_scene(std::vector<Grid<>> intensity, Grid<> depth_diopters);
void validate(const SceneRGBD &scene);

struct FocalPlane {
  double depth = 0.0; ///< meters, may be +inf
  std::vector<Grid<>> intensity;
  Mask occupancy;
  Mask removed; ///< pixels cleared by remove_fully_occluded
};

struct FocalStack {
  std::vector<FocalPlane> planes;

  Eigen::Index rows() const { return planes.empty() ? 0 : planes.front().occupancy.rows(); }
  Eigen::Index cols() const { return planes.empty() ? 0 : planes.front().occupancy.cols(); }
  int channels() const { return planes.empty() ? 0 : static_cast<int>(planes.front().intensity.size()); }
};

/// Empty stack with one plane per configured depth.
FocalStack make_empty_stack(const DisplayConfig &config, int channels);

struct DiscretizeOptions {
  /// Resample scenes whose size differs from the display resolution
  /// (nearest-neighbor depth, area-average intensity) instead of rejecting them.
  bool resample = false;
};

/// Index of the plane nearest in diopters; ties go to the larger-diopter plane.
std::size_t nearest_plane(double depth_diopters, const DisplayConfig &config);

FocalStack discretize_scene(const SceneRGBD &scene, const DisplayConfig &config,
                            const DiscretizeOptions &options = {});
FocalStack discretize_scene(const LayeredScene &scene, const DisplayConfig &config,
                            const DiscretizeOptions &options = {});

SceneRGBD resample_scene(const SceneRGBD &scene, Eigen::Index rows, Eigen::Index cols);

/// Copy of the stack with the given planes' intensities zeroed (occupancy kept).
FocalStack with_dark_planes(FocalStack stack, const std::vector<std::size_t> &plane_indices);

} // namespace conetilt

#endif // CONETILT_SCENE_HPP
