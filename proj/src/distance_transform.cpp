#include "conetilt/distance_transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace conetilt {

namespace {

constexpr double kHalfDiagonal = 0.70710678118654757;
constexpr double kTie = 1e-9;

// 1D squared distance transform of sampled function f (lower envelope of parabolas).
template <typename Scalar>
void transform_1d(const std::vector<Scalar> &f, std::vector<Scalar> &out) {
  const auto n = static_cast<Eigen::Index>(f.size());
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  std::vector<Eigen::Index> v(n);
  std::vector<Scalar> z(n + 1);
  Eigen::Index k = -1;
  for (Eigen::Index q = 0; q < n; ++q) {
    if (f[q] == inf) {
      continue;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    Scalar s;
    while (true) {
      const Eigen::Index p = v[k];
      s = ((f[q] + Scalar(q * q)) - (f[p] + Scalar(p * p))) / Scalar(2 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  out.assign(n, inf);
  if (k < 0) {
    return;
  }
  Eigen::Index j = 0;
  for (Eigen::Index q = 0; q < n; ++q) {
    while (z[j + 1] < Scalar(q)) {
      ++j;
    }
    const Scalar dq = Scalar(q - v[j]);
    out[q] = dq * dq + f[v[j]];
  }
}

} // namespace

template <typename Scalar>
Grid<Scalar> squared_distance_transform(const Mask &features) {
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  const Eigen::Index rows = features.rows(), cols = features.cols();
  Grid<Scalar> out(rows, cols);
  std::vector<Scalar> f, g;
  for (Eigen::Index r = 0; r < rows; ++r) {
    f.resize(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      f[c] = features(r, c) ? Scalar(0) : inf;
    }
    transform_1d(f, g);
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = g[c];
    }
  }
  for (Eigen::Index c = 0; c < cols; ++c) {
    f.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      f[r] = out(r, c);
    }
    transform_1d(f, g);
    for (Eigen::Index r = 0; r < rows; ++r) {
      out(r, c) = g[r];
    }
  }
  return out;
}

template Grid<double> squared_distance_transform<double>(const Mask &);
template Grid<float> squared_distance_transform<float>(const Mask &);

OccupancyIndex::OccupancyIndex(Mask occupancy, const PlaneGeometry &geometry)
    : occupancy_(std::move(occupancy)), geometry_(geometry) {
  geometry_.rows = occupancy_.rows();
  geometry_.cols = occupancy_.cols();
  dist_to_occupied_ = squared_distance_transform<double>(occupancy_).sqrt();
  dist_to_free_ = squared_distance_transform<double>(!occupancy_).sqrt();
  summed_ = Grid<long>::Zero(occupancy_.rows() + 1, occupancy_.cols() + 1);
  for (Eigen::Index r = 0; r < occupancy_.rows(); ++r) {
    for (Eigen::Index c = 0; c < occupancy_.cols(); ++c) {
      summed_(r + 1, c + 1) = summed_(r, c + 1) + summed_(r + 1, c) - summed_(r, c) + (occupancy_(r, c) ? 1 : 0);
    }
  }
  occupied_count_ = summed_(occupancy_.rows(), occupancy_.cols());
}

bool OccupancyIndex::occupied_at(const Vec2 &q) const {
  const Vec2 uv = geometry_.to_pixel(q);
  const auto c = static_cast<Eigen::Index>(std::floor(uv.x()));
  const auto r = static_cast<Eigen::Index>(std::floor(uv.y()));
  return geometry_.contains(r, c) && occupancy_(r, c);
}

double OccupancyIndex::center_bound(const Vec2 &uv, bool occupied, Eigen::Index &r, Eigen::Index &c) const {
  c = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(uv.x())), 0, occupancy_.cols() - 1);
  r = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(uv.y())), 0, occupancy_.rows() - 1);
  return occupied ? dist_to_occupied_(r, c) : dist_to_free_(r, c);
}

template <typename Visit>
void OccupancyIndex::scan(const Vec2 &uv, bool occupied, double radius, Visit &&visit) const {
  const auto c0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(uv.x() - radius - 0.5)));
  const auto c1 = std::min<Eigen::Index>(occupancy_.cols() - 1, static_cast<Eigen::Index>(std::ceil(uv.x() + radius)));
  const auto r0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(uv.y() - radius - 0.5)));
  const auto r1 = std::min<Eigen::Index>(occupancy_.rows() - 1, static_cast<Eigen::Index>(std::ceil(uv.y() + radius)));
  for (Eigen::Index r = r0; r <= r1; ++r) {
    for (Eigen::Index c = c0; c <= c1; ++c) {
      if (occupancy_(r, c) != occupied) {
        continue;
      }
      const double pu = std::clamp(uv.x(), double(c), double(c + 1));
      const double pv = std::clamp(uv.y(), double(r), double(r + 1));
      visit(pu, pv, std::hypot(pu - uv.x(), pv - uv.y()));
    }
  }
}

std::optional<double> OccupancyIndex::distance(const Vec2 &q, bool occupied, double limit) const {
  if (occupied ? !any_occupied() : !any_free()) {
    return std::nullopt;
  }
  const Vec2 uv = geometry_.to_pixel(q);
  const double limit_px = limit / geometry_.pitch;
  Eigen::Index r, c;
  const double feature = center_bound(uv, occupied, r, c);
  const double offset = std::hypot(uv.x() - (double(c) + 0.5), uv.y() - (double(r) + 0.5));
  if (feature - offset - kHalfDiagonal >= limit_px) {
    return std::nullopt;
  }
  const double radius = std::min(feature + offset, limit_px) + 2.0 * kHalfDiagonal;
  double best = std::numeric_limits<double>::infinity();
  scan(uv, occupied, radius, [&](double, double, double dist) { best = std::min(best, dist); });
  if (!(best < limit_px)) {
    return std::nullopt;
  }
  return best * geometry_.pitch;
}

std::vector<NearestPoint> OccupancyIndex::nearest(const Vec2 &q, bool occupied) const {
  std::vector<NearestPoint> out;
  if (occupied ? !any_occupied() : !any_free()) {
    return out;
  }
  const Vec2 uv = geometry_.to_pixel(q);
  Eigen::Index r, c;
  const double feature = center_bound(uv, occupied, r, c);
  const double offset = std::hypot(uv.x() - (double(c) + 0.5), uv.y() - (double(r) + 0.5));
  const double radius = feature + offset + 2.0 * kHalfDiagonal;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::pair<Vec2, double>> candidates;
  scan(uv, occupied, radius, [&](double pu, double pv, double dist) {
    if (dist <= best + kTie) {
      best = std::min(best, dist);
      candidates.emplace_back(Vec2(pu, pv), dist);
    }
  });
  for (const auto &[point, dist] : candidates) {
    if (dist > best + kTie) {
      continue;
    }
    const Vec2 meters = geometry_.to_meters(point);
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const NearestPoint &np) {
      return (np.point - meters).norm() <= kTie * geometry_.pitch;
    });
    if (!duplicate) {
      out.push_back({meters, dist * geometry_.pitch});
    }
  }
  return out;
}

long OccupancyIndex::count_in(Eigen::Index r0, Eigen::Index c0, Eigen::Index r1, Eigen::Index c1) const {
  // Inclusive cell ranges, already clipped to the grid.
  return summed_(r1 + 1, c1 + 1) - summed_(r0, c1 + 1) - summed_(r1 + 1, c0) + summed_(r0, c0);
}

bool OccupancyIndex::box_all_occupied(double u0, double v0, double u1, double v1) const {
  const auto c0 = static_cast<Eigen::Index>(std::floor(u0));
  const auto r0 = static_cast<Eigen::Index>(std::floor(v0));
  const auto c1 = std::max(c0, static_cast<Eigen::Index>(std::ceil(u1)) - 1);
  const auto r1 = std::max(r0, static_cast<Eigen::Index>(std::ceil(v1)) - 1);
  if (c0 < 0 || r0 < 0 || c1 >= occupancy_.cols() || r1 >= occupancy_.rows()) {
    return false;
  }
  return count_in(r0, c0, r1, c1) == (r1 - r0 + 1) * (c1 - c0 + 1);
}

bool OccupancyIndex::box_any_occupied(double u0, double v0, double u1, double v1) const {
  const auto c0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(u0)));
  const auto r0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(v0)));
  const auto c1 = std::min<Eigen::Index>(occupancy_.cols() - 1, std::max(Eigen::Index(std::floor(u0)),
                                                                          Eigen::Index(std::ceil(u1)) - 1));
  const auto r1 = std::min<Eigen::Index>(occupancy_.rows() - 1, std::max(Eigen::Index(std::floor(v0)),
                                                                          Eigen::Index(std::ceil(v1)) - 1));
  if (c0 > c1 || r0 > r1) {
    return false;
  }
  return count_in(r0, c0, r1, c1) > 0;
}

Vec2 nearest_contour_point(const Mask &occupancy, const PlaneGeometry &geometry, const Vec2 &query) {
  const OccupancyIndex index(occupancy, geometry);
  if (!index.any_occupied()) {
    throw ValidationError("nearest_contour_point: mask has no occupied pixels (no occluder)");
  }
  if (!index.any_free()) {
    throw ValidationError("nearest_contour_point: mask is fully occupied (no contour)");
  }
  const bool inside = index.occupied_at(query);
  const auto candidates = index.nearest(query, !inside);
  auto angle = [&](const NearestPoint &np) {
    const Vec2 d = np.point - query;
    const double a = std::atan2(d.y(), d.x());
    return a < 0.0 ? a + 2.0 * std::numbers::pi : a;
  };
  const auto best = std::min_element(candidates.begin(), candidates.end(),
                                     [&](const NearestPoint &a, const NearestPoint &b) { return angle(a) < angle(b); });
  return best->point;
}

} // namespace conetilt
