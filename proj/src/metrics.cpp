#include "conetilt/metrics.hpp"

#include <cmath>

#include "conetilt/distance_transform.hpp"

namespace conetilt {

namespace {

void check_pair(const ImageBuffer &a, const ImageBuffer &b) {
  if (a.channel_count() == 0 || a.channel_count() != b.channel_count() || a.width() != b.width() ||
      a.height() != b.height()) {
    throw ValidationError("metrics: image dimensions differ");
  }
}

void check_mask(const ImageBuffer &a, const ImageBuffer &b, const Mask &mask) {
  check_pair(a, b);
  if (mask.rows() != a.height() || mask.cols() != a.width()) {
    throw ValidationError("metrics: mask size differs from the images");
  }
  if (mask.count() < 2) {
    throw ValidationError("metrics: mask must contain at least 2 pixels");
  }
}

Eigen::ArrayXd gaussian_kernel(int size, double sigma) {
  Eigen::ArrayXd k(size);
  const double mid = 0.5 * (size - 1);
  for (int i = 0; i < size; ++i) {
    k(i) = std::exp(-0.5 * (i - mid) * (i - mid) / (sigma * sigma));
  }
  return k / k.sum();
}

// Separable correlation keeping only windows fully inside the image.
Grid<> filter_valid(const Grid<> &img, const Eigen::ArrayXd &k) {
  const Eigen::Index n = k.size();
  const Eigen::Index rows = img.rows() - n + 1, cols = img.cols() - n + 1;
  Grid<> horizontal = Grid<>::Zero(img.rows(), cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    horizontal += k(i) * img.middleCols(i, cols);
  }
  Grid<> out = Grid<>::Zero(rows, cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    out += k(i) * horizontal.middleRows(i, rows);
  }
  return out;
}

} // namespace

void validate(const ImageBuffer &image) {
  for (const auto &ch : image.channels) {
    if (!ch.allFinite() || (ch < 0.0).any()) {
      throw ValidationError("image: values must be finite and non-negative");
    }
  }
}

double psnr(const ImageBuffer &a, const ImageBuffer &b) {
  check_pair(a, b);
  double sum = 0.0;
  for (int ch = 0; ch < a.channel_count(); ++ch) {
    sum += (a.channels[ch] - b.channels[ch]).square().sum();
  }
  const double mse = sum / double(a.channels.front().size() * a.channel_count());
  if (mse == 0.0) {
    return kPsnrCap;
  }
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageBuffer &a, const ImageBuffer &b) {
  check_pair(a, b);
  constexpr int window = 11;
  if (a.width() < window || a.height() < window) {
    throw ValidationError("ssim: image smaller than the 11x11 window");
  }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const Eigen::ArrayXd k = gaussian_kernel(window, 1.5);
  const Grid<> x = a.luminance(), y = b.luminance();
  const Grid<> mx = filter_valid(x, k), my = filter_valid(y, k);
  const Grid<> sxx = filter_valid(x * x, k) - mx * mx;
  const Grid<> syy = filter_valid(y * y, k) - my * my;
  const Grid<> sxy = filter_valid(x * y, k) - mx * my;
  const Grid<> map = ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
  return map.mean();
}

ContrastScatter contrast_scatter(const ImageBuffer &fg_only, const ImageBuffer &with_bg, const Mask &fg_mask) {
  check_mask(fg_only, with_bg, fg_mask);
  const Grid<> x = fg_only.luminance(), y = with_bg.luminance();
  ContrastScatter out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (fg_mask(r, c)) {
        out.points.emplace_back(x(r, c), y(r, c));
      }
    }
  }
  const double n = double(out.points.size());
  double mx = 0.0, my = 0.0;
  for (const auto &[px, py] : out.points) {
    mx += px;
    my += py;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  bool identical = true, flat_x = true, flat_y = true;
  const auto [x0, y0] = out.points.front();
  for (const auto &[px, py] : out.points) {
    sxx += (px - mx) * (px - mx);
    syy += (py - my) * (py - my);
    sxy += (px - mx) * (py - my);
    identical = identical && px == py;
    flat_x = flat_x && px == x0;
    flat_y = flat_y && py == y0;
  }
  // Decided on the values, since a rounded mean leaves a tiny spurious variance.
  if (flat_x || flat_y) {
    out.pearson_r = identical ? 1.0 : 0.0;
  } else {
    out.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  }
  return out;
}

double leakage_score(const ImageBuffer &fg_only, const ImageBuffer &with_bg, const Mask &fg_mask) {
  check_mask(fg_only, with_bg, fg_mask);
  const Grid<> excess = (with_bg.luminance() - fg_only.luminance()).max(0.0);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < excess.rows(); ++r) {
    for (Eigen::Index c = 0; c < excess.cols(); ++c) {
      if (fg_mask(r, c)) {
        sum += excess(r, c);
      }
    }
  }
  return sum / double(fg_mask.count());
}

Grid<> signed_edge_distance(const Mask &occluder) {
  if (!occluder.any() || occluder.all()) {
    throw ValidationError("signed_edge_distance: mask has no edge");
  }
  const PlaneGeometry geom{occluder.rows(), occluder.cols(), 1.0};
  const OccupancyIndex index(occluder, geom);
  Grid<> out(occluder.rows(), occluder.cols());
  for (Eigen::Index r = 0; r < occluder.rows(); ++r) {
    for (Eigen::Index c = 0; c < occluder.cols(); ++c) {
      const Vec2 q = geom.center_of(r, c);
      const bool inside = occluder(r, c);
      const double dist = *index.distance(q, !inside, OccupancyIndex::kNoLimit);
      out(r, c) = inside ? -dist : dist;
    }
  }
  return out;
}

HaloProfile halo_profile(const ImageBuffer &image, const Mask &occluder, const ImageBuffer &reference,
                         int radius_px) {
  check_pair(image, reference);
  if (occluder.rows() != image.height() || occluder.cols() != image.width()) {
    throw ValidationError("halo_profile: occluder mask size differs from the images");
  }
  if (!occluder.any() || occluder.all()) {
    throw ValidationError("halo_profile: empty edge mask");
  }
  const Grid<> distance = signed_edge_distance(occluder);
  const Grid<> delta = image.luminance() - reference.luminance();
  const int bins = 2 * radius_px;
  HaloProfile out;
  out.mean_delta.assign(bins, 0.0);
  out.counts.assign(bins, 0);
  for (int b = 0; b < bins; ++b) {
    out.distance_px.push_back(double(b - radius_px) + 0.5);
  }
  for (Eigen::Index r = 0; r < delta.rows(); ++r) {
    for (Eigen::Index c = 0; c < delta.cols(); ++c) {
      const double bin = std::floor(distance(r, c)) + radius_px;
      if (bin >= 0.0 && bin < bins) {
        out.mean_delta[std::size_t(bin)] += delta(r, c);
        ++out.counts[std::size_t(bin)];
      }
    }
  }
  for (int b = 0; b < bins; ++b) {
    if (out.counts[b] > 0) {
      out.mean_delta[b] /= double(out.counts[b]);
    }
  }
  return out;
}

} // namespace conetilt
