#ifndef CONETILT_RENDER_HPP
#define CONETILT_RENDER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "conetilt/pupil_geometry.hpp"
#include "conetilt/tilt_field.hpp"

namespace conetilt {

enum class RenderMode { Reality, Multifocal, MultifocalNoOccluded, ConeTilt };

std::string to_string(RenderMode mode);
RenderMode parse_render_mode(const std::string &name);

/// Linear radiance image, one grid per channel.
struct ImageBuffer {
  std::vector<Grid<>> channels;

  Eigen::Index width() const { return channels.empty() ? 0 : channels.front().cols(); }
  Eigen::Index height() const { return channels.empty() ? 0 : channels.front().rows(); }
  int channel_count() const { return static_cast<int>(channels.size()); }

  static ImageBuffer zeros(Eigen::Index height, Eigen::Index width, int channels);
  /// Channel mean (grayscale view used by the metrics).
  Grid<> luminance() const;
};

ImageBuffer operator+(const ImageBuffer &a, const ImageBuffer &b);
ImageBuffer operator-(const ImageBuffer &a, const ImageBuffer &b);

/// Backward ray sampling through a thin-lens camera focused at
/// camera.focus_depth, averaged over stratified pupil samples. The sensor
/// is sampled 1:1 with display pixels at the focus plane.
///
/// Reality stops at the first occupied plane; Multifocal sums all planes;
/// MultifocalNoOccluded sums after remove_fully_occluded; ConeTilt sums
/// planes gated by the aperture disc and each emitter's tilted cone disc.
/// Output depends only on the inputs and `seed`.
ImageBuffer render(const FocalStack &stack, const TiltField *field, const CameraView &camera, RenderMode mode,
                   std::uint64_t seed, const DisplayConfig &config);

/// Deterministic counterpart of render for the additive modes: each
/// emitter cell is splatted with the exact pupil-area fraction through
/// which it is seen.
ImageBuffer render_splat(const FocalStack &stack, const TiltField *field, const CameraView &camera, RenderMode mode,
                         const DisplayConfig &config);

/// Ground truth: opaque, continuous-depth surfaces of every scene layer.
ImageBuffer render_reality_reference(const LayeredScene &scene, const CameraView &camera, std::uint64_t seed,
                                     const DisplayConfig &config);
ImageBuffer render_reality_reference(const SceneRGBD &scene, const CameraView &camera, std::uint64_t seed,
                                     const DisplayConfig &config);

/// Renders the same content from several pupil positions (offsets added to
/// the base pupil center); nothing is recomputed per view.
std::vector<ImageBuffer> viewpoint_sweep(const FocalStack &stack, const TiltField *field,
                                         const CameraView &base_camera, const std::vector<Vec2> &offsets,
                                         RenderMode mode, std::uint64_t seed, const DisplayConfig &config);

/// Sum of the untilted sweep and the tilted sweep, as captured by the
/// two-pass display.
ImageBuffer render_two_sweep(const FocalStack &foreground, const FocalStack &background, const TiltField &field,
                             const CameraView &camera, std::uint64_t seed, const DisplayConfig &config);

/// Pupil sample positions used for one sensor pixel (exposed for tests).
std::vector<Vec2> pupil_samples(const CameraView &camera, std::uint64_t seed, std::uint64_t pixel_index);

} // namespace conetilt

#endif // CONETILT_RENDER_HPP
