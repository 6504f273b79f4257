#include "conetilt/pupil_geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace conetilt {

namespace {

constexpr int kNodes = 24;

struct GaussLegendre {
  std::array<double, kNodes> x{};
  std::array<double, kNodes> w{};

  GaussLegendre() {
    for (int i = 0; i < kNodes; ++i) {
      double t = std::cos(std::numbers::pi * (i + 0.75) / (kNodes + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= kNodes; ++k) {
          const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = kNodes * (t * p1 - p0) / (t * t - 1.0);
        const double step = p1 / dp;
        t -= step;
        if (std::abs(step) < 1e-16) {
          break;
        }
      }
      x[i] = t;
      w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
  }
};

const GaussLegendre &rule() {
  static const GaussLegendre gl;
  return gl;
}

double chord(double x, std::span<const Disc> discs, const std::optional<Box> &box) {
  double top = box ? box->hi.y() : std::numeric_limits<double>::infinity();
  double bottom = box ? box->lo.y() : -std::numeric_limits<double>::infinity();
  for (const auto &d : discs) {
    const double dx = x - d.center.x();
    const double h = std::sqrt(std::max(0.0, d.radius * d.radius - dx * dx));
    top = std::min(top, d.center.y() + h);
    bottom = std::max(bottom, d.center.y() - h);
  }
  return std::max(0.0, top - bottom);
}

void circle_line_breaks(const Disc &d, double y, std::vector<double> &out) {
  const double dy = y - d.center.y();
  const double h2 = d.radius * d.radius - dy * dy;
  if (h2 > 0.0) {
    const double h = std::sqrt(h2);
    out.push_back(d.center.x() - h);
    out.push_back(d.center.x() + h);
  }
}

void circle_circle_breaks(const Disc &a, const Disc &b, std::vector<double> &out) {
  const Vec2 delta = b.center - a.center;
  const double dist = delta.norm();
  if (dist == 0.0 || dist >= a.radius + b.radius || dist <= std::abs(a.radius - b.radius)) {
    return;
  }
  const double along = (dist * dist + a.radius * a.radius - b.radius * b.radius) / (2.0 * dist);
  const double h = std::sqrt(std::max(0.0, a.radius * a.radius - along * along));
  const Vec2 mid = a.center + along * delta / dist;
  const Vec2 normal(-delta.y() / dist, delta.x() / dist);
  out.push_back(mid.x() + h * normal.x());
  out.push_back(mid.x() - h * normal.x());
}

} // namespace

void validate(const CameraView &camera, const DisplayConfig &config) {
  if (!(camera.pupil_radius >= 0.0) || !camera.pupil_center.allFinite()) {
    throw ValidationError("camera: invalid pupil");
  }
  if (camera.pupil_center.norm() + camera.pupil_radius > config.aperture_radius() * (1.0 + 1e-12)) {
    throw ValidationError("camera: pupil leaves the eyebox (|center| + radius > d u_m = " +
                          std::to_string(config.aperture_radius()) + " m)");
  }
  if (!(camera.focus_depth > 0.0)) {
    throw ValidationError("camera: focus depth must be positive");
  }
  if (camera.samples_per_pixel < 1) {
    throw ValidationError("camera: samples_per_pixel must be >= 1");
  }
}

double intersection_area(std::span<const Disc> discs, const std::optional<Box> &box) {
  double lo = box ? box->lo.x() : -std::numeric_limits<double>::infinity();
  double hi = box ? box->hi.x() : std::numeric_limits<double>::infinity();
  for (const auto &d : discs) {
    lo = std::max(lo, d.center.x() - d.radius);
    hi = std::min(hi, d.center.x() + d.radius);
  }
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    return 0.0;
  }
  std::vector<double> breaks{lo, hi};
  for (std::size_t i = 0; i < discs.size(); ++i) {
    breaks.push_back(discs[i].center.x() - discs[i].radius);
    breaks.push_back(discs[i].center.x() + discs[i].radius);
    if (box) {
      circle_line_breaks(discs[i], box->lo.y(), breaks);
      circle_line_breaks(discs[i], box->hi.y(), breaks);
    }
    for (std::size_t j = i + 1; j < discs.size(); ++j) {
      circle_circle_breaks(discs[i], discs[j], breaks);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  const auto &gl = rule();
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = std::max(lo, breaks[k]);
    const double b = std::min(hi, breaks[k + 1]);
    if (!(b > a)) {
      continue;
    }
    // x = mid - half cos(t), t in [0, pi]
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double piece = 0.0;
    for (int n = 0; n < kNodes; ++n) {
      const double t = 0.5 * std::numbers::pi * (gl.x[n] + 1.0);
      piece += gl.w[n] * chord(mid - half * std::cos(t), discs, box) * std::sin(t);
    }
    area += piece * half * 0.5 * std::numbers::pi;
  }
  return area;
}

double effective_pupil_weight(const Vec2 &tilt, const CameraView &camera, const DisplayConfig &config) {
  const Disc aperture{Vec2::Zero(), config.aperture_radius()};
  const Disc cone{config.d * tilt, config.aperture_radius()};
  if (camera.pupil_radius == 0.0) {
    return aperture.contains(camera.pupil_center) && cone.contains(camera.pupil_center) ? 1.0 : 0.0;
  }
  const Disc pupil{camera.pupil_center, camera.pupil_radius};
  const std::array<Disc, 3> discs{pupil, aperture, cone};
  const double full = std::numbers::pi * camera.pupil_radius * camera.pupil_radius;
  return std::clamp(intersection_area(discs) / full, 0.0, 1.0);
}

} // namespace conetilt
