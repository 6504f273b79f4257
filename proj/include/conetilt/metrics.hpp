#ifndef CONETILT_METRICS_HPP
#define CONETILT_METRICS_HPP

#include <string>
#include <utility>
#include <vector>

#include "conetilt/render.hpp"

namespace conetilt {

inline constexpr double kPsnrCap = 99.0;

/// Throws unless every value is finite and non-negative.
void validate(const ImageBuffer &image);

/// 10 log10(1 / MSE) over all pixels and channels, peak 1. Identical images
/// report kPsnrCap.
double psnr(const ImageBuffer &a, const ImageBuffer &b);

/// Mean local SSIM of the channel-averaged images: 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1, windows fully inside
/// the image.
double ssim(const ImageBuffer &a, const ImageBuffer &b);

struct ContrastScatter {
  std::vector<std::pair<double, double>> points; ///< (fg_only, with_bg)
  double pearson_r = 0.0;
};

/// Grayscale pairs over the mask and their Pearson correlation. A series
/// without variance gives r = 1 when both series agree exactly, else 0.
ContrastScatter contrast_scatter(const ImageBuffer &fg_only, const ImageBuffer &with_bg, const Mask &fg_mask);

/// Mean over the mask of max(with_bg - fg_only, 0), grayscale.
double leakage_score(const ImageBuffer &fg_only, const ImageBuffer &with_bg, const Mask &fg_mask);

/// Signed Euclidean distance from each pixel center to the boundary of the
/// union of occluder cells, in pixels; negative inside the occluder.
Grid<> signed_edge_distance(const Mask &occluder);

struct HaloProfile {
  std::vector<double> distance_px; ///< bin centers
  std::vector<double> mean_delta;  ///< 0 for empty bins
  std::vector<long> counts;
};

/// Mean of (image - reference), grayscale, binned in 1-pixel bins of the
/// signed distance to the occluder edge over [-radius_px, radius_px).
HaloProfile halo_profile(const ImageBuffer &image, const Mask &occluder, const ImageBuffer &reference,
                         int radius_px = 20);

struct MetricsRow {
  std::string scene;
  std::string mode;
  Vec2 pupil_offset{0.0, 0.0}; ///< meters
  double focus_depth = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double pearson_r = 0.0;
  double leakage = 0.0;
};

} // namespace conetilt

#endif // CONETILT_METRICS_HPP
