#include "conetilt/tilt_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "conetilt/distance_transform.hpp"

namespace conetilt {

namespace {

constexpr double kLengthTolerance = 1e-12; // meters
constexpr double kAngleTolerance = 1e-12;  // radians
constexpr int kCoverageDepth = 10;

double polar_angle(const Vec2 &v) {
  const double a = std::atan2(v.y(), v.x());
  return a < 0.0 ? a + 2.0 * std::numbers::pi : a;
}

struct NearerPlane {
  std::size_t index;
  double z;
  const OccupancyIndex *occupancy;
};

struct Candidate {
  Vec2 tilt;
  double contour_distance_in_tilt = 0.0;
};

// Occupancy indices for every plane with finite depth and any content.
std::vector<std::optional<OccupancyIndex>> build_indices(const FocalStack &stack, const DisplayConfig &config) {
  std::vector<std::optional<OccupancyIndex>> indices(stack.planes.size());
  for (std::size_t i = 0; i < stack.planes.size(); ++i) {
    const auto &plane = stack.planes[i];
    if (std::isfinite(plane.depth) && plane.occupancy.any()) {
      indices[i].emplace(plane.occupancy, config.plane_geometry(plane.depth));
    }
  }
  return indices;
}

std::vector<NearerPlane> nearer_planes(const FocalStack &stack,
                                       const std::vector<std::optional<OccupancyIndex>> &indices, std::size_t i) {
  std::vector<NearerPlane> out;
  for (std::size_t o = 0; o < i; ++o) {
    if (indices[o] && stack.planes[o].depth < stack.planes[i].depth) {
      out.push_back({o, stack.planes[o].depth, &*indices[o]});
    }
  }
  return out;
}

// Smallest tilt placing the footprint disc tangent to the nearest contour point.
std::optional<Candidate> tangent_candidate(const OccupancyIndex &index, const Vec2 &center, double radius,
                                           double shift_per_tilt) {
  const bool inside = index.occupied_at(center);
  const auto contour = index.nearest(center, !inside);
  std::optional<Candidate> best;
  for (const auto &np : contour) {
    Vec2 direction = inside ? Vec2(np.point - center) : Vec2(center - np.point);
    if (direction.norm() == 0.0) {
      continue;
    }
    direction.normalize();
    const Vec2 tangent_center = np.point + radius * direction;
    Candidate candidate{(tangent_center - center) / shift_per_tilt, np.distance / shift_per_tilt};
    if (!best) {
      best = candidate;
      continue;
    }
    const double dn = candidate.tilt.norm() - best->tilt.norm();
    if (dn < -kAngleTolerance ||
        (std::abs(dn) <= kAngleTolerance && polar_angle(candidate.tilt) < polar_angle(best->tilt))) {
      best = candidate;
    }
  }
  return best;
}

bool clears_all(const std::vector<NearerPlane> &planes, const Vec2 &x, double z_i, const Vec2 &tilt,
                const DisplayConfig &config) {
  for (const auto &plane : planes) {
    const ConeFootprint fp = cone_footprint(x, z_i, plane.z, config);
    const double s = footprint_shift_per_tilt(plane.z, z_i, config);
    const Vec2 shifted = fp.center + s * tilt;
    if (plane.occupancy->distance(shifted, true, 0.5 * fp.diameter - kLengthTolerance)) {
      return false;
    }
  }
  return true;
}

// Quadtree over the normalized cone disc |v| <= 1: true when every ray is blocked.
struct CoverageProbe {
  struct Mapped {
    const OccupancyIndex *occupancy;
    Vec2 center_px; // footprint center, continuous pixel coordinates
    double radius_px;
  };
  std::vector<Mapped> planes;

  bool blocked(const Vec2 &v) const {
    for (const auto &p : planes) {
      const double u = p.center_px.x() + p.radius_px * v.x();
      const double w = p.center_px.y() - p.radius_px * v.y();
      const auto c = static_cast<Eigen::Index>(std::floor(u));
      const auto r = static_cast<Eigen::Index>(std::floor(w));
      if (p.occupancy->geometry().contains(r, c) && p.occupancy->occupancy()(r, c)) {
        return true;
      }
    }
    return false;
  }

  bool covered(double a0, double b0, double a1, double b1, int depth) const {
    const Vec2 closest(std::clamp(0.0, a0, a1), std::clamp(0.0, b0, b1));
    if (closest.squaredNorm() >= 1.0) {
      return true;
    }
    bool any = false;
    for (const auto &p : planes) {
      const double u0 = p.center_px.x() + p.radius_px * a0, u1 = p.center_px.x() + p.radius_px * a1;
      const double v0 = p.center_px.y() - p.radius_px * b1, v1 = p.center_px.y() - p.radius_px * b0;
      if (p.occupancy->box_all_occupied(u0, v0, u1, v1)) {
        return true;
      }
      any = any || p.occupancy->box_any_occupied(u0, v0, u1, v1);
    }
    if (!any) {
      return false;
    }
    if (depth == kCoverageDepth) {
      Vec2 probe(0.5 * (a0 + a1), 0.5 * (b0 + b1));
      if (probe.squaredNorm() >= 1.0) {
        probe = closest;
      }
      return blocked(probe);
    }
    const double am = 0.5 * (a0 + a1), bm = 0.5 * (b0 + b1);
    return covered(a0, b0, am, bm, depth + 1) && covered(am, b0, a1, bm, depth + 1) &&
           covered(a0, bm, am, b1, depth + 1) && covered(am, bm, a1, b1, depth + 1);
  }
};

bool fully_occluded_impl(const std::vector<NearerPlane> &planes, const Vec2 &x, double z_i,
                         const DisplayConfig &config) {
  CoverageProbe probe;
  bool overlaps = false;
  for (const auto &plane : planes) {
    const ConeFootprint fp = cone_footprint(x, z_i, plane.z, config);
    const double radius = 0.5 * fp.diameter;
    if (!plane.occupancy->distance(fp.center, true, radius)) {
      continue;
    }
    overlaps = true;
    const PlaneGeometry &g = plane.occupancy->geometry();
    const Vec2 center_px = g.to_pixel(fp.center);
    const double radius_px = radius / g.pitch;
    const bool inside_grid = center_px.x() - radius_px >= 0.0 && center_px.y() - radius_px >= 0.0 &&
                             center_px.x() + radius_px <= double(g.cols) &&
                             center_px.y() + radius_px <= double(g.rows);
    if (inside_grid && !plane.occupancy->distance(fp.center, false, radius)) {
      return true; // one plane covers the whole disc
    }
    probe.planes.push_back({plane.occupancy, center_px, radius_px});
  }
  if (!overlaps) {
    return false;
  }
  return probe.covered(-1.0, -1.0, 1.0, 1.0, 0);
}

} // namespace

ConeFootprint cone_footprint(const Vec2 &x, double z_i, double z_o, const DisplayConfig &config) {
  if (!(z_o > 0.0) || !(z_o < z_i)) {
    throw ValidationError("cone_footprint: requires 0 < z_o < z_i");
  }
  const double s = footprint_shift_per_tilt(z_o, z_i, config);
  return {(z_o / config.d) * x, 2.0 * config.u_m * s, z_i, z_o};
}

Vec2 footprint_point(const Vec2 &x, const Vec2 &u, double z_i, double z_o, const DisplayConfig &config) {
  return (z_o / config.d) * x + footprint_shift_per_tilt(z_o, z_i, config) * u;
}

double footprint_shift_per_tilt(double z_o, double z_i, const DisplayConfig &config) {
  if (!(z_o > 0.0) || z_o > z_i) {
    throw ValidationError("footprint_shift_per_tilt: requires 0 < z_o <= z_i");
  }
  return config.d * z_o * (diopters(z_o) - diopters(z_i));
}

std::size_t TiltField::count(TiltFlag flag) const {
  std::size_t n = 0;
  for (const auto &plane : planes) {
    n += static_cast<std::size_t>((plane.flags == static_cast<std::uint8_t>(flag)).count());
  }
  return n;
}

TiltField make_untilted_field(const FocalStack &stack) {
  TiltField field;
  for (const auto &plane : stack.planes) {
    TiltPlane tp;
    tp.depth = plane.depth;
    tp.tilt_x = Grid<>::Zero(stack.rows(), stack.cols());
    tp.tilt_y = Grid<>::Zero(stack.rows(), stack.cols());
    tp.flags = plane.removed.select(Grid<std::uint8_t>::Constant(stack.rows(), stack.cols(),
                                                                 std::uint8_t(TiltFlag::Removed)),
                                    Grid<std::uint8_t>::Zero(stack.rows(), stack.cols()));
    field.planes.push_back(std::move(tp));
  }
  return field;
}

TiltField compute_tilt_field(const FocalStack &stack, const DisplayConfig &config, const TiltOptions &options) {
  validate(config);
  if (stack.planes.size() != config.plane_depths.size() || stack.rows() != config.n_y || stack.cols() != config.n_x) {
    throw ValidationError("compute_tilt_field: stack does not match the display configuration");
  }
  TiltField field = make_untilted_field(stack);
  field.infeasible_removed = options.remove_infeasible;
  const auto indices = build_indices(stack, config);
  const PlaneGeometry display = config.display_geometry();
  const double max_tilt = 2.0 * config.u_m;

  for (std::size_t i = 0; i < stack.planes.size(); ++i) {
    const auto &plane = stack.planes[i];
    const auto nearer = nearer_planes(stack, indices, i);
    if (nearer.empty()) {
      continue;
    }
    auto &out = field.planes[i];
    const double z_i = plane.depth;
#pragma omp parallel for schedule(dynamic, 4)
    for (Eigen::Index r = 0; r < stack.rows(); ++r) {
      for (Eigen::Index c = 0; c < stack.cols(); ++c) {
        if (!plane.occupancy(r, c)) {
          continue;
        }
        const Vec2 x = display.center_of(r, c);
        std::optional<Candidate> chosen;
        for (const auto &o : nearer) {
          const ConeFootprint fp = cone_footprint(x, z_i, o.z, config);
          const double radius = 0.5 * fp.diameter;
          if (!o.occupancy->distance(fp.center, true, radius - kLengthTolerance)) {
            continue;
          }
          const auto candidate =
              tangent_candidate(*o.occupancy, fp.center, radius, footprint_shift_per_tilt(o.z, z_i, config));
          if (candidate && (!chosen || candidate->contour_distance_in_tilt < chosen->contour_distance_in_tilt)) {
            chosen = candidate;
          }
        }
        if (!chosen) {
          continue;
        }
        Vec2 tilt = chosen->tilt;
        const bool feasible = tilt.norm() <= max_tilt + kAngleTolerance && clears_all(nearer, x, z_i, tilt, config);
        if (!feasible && tilt.norm() > max_tilt) {
          tilt *= max_tilt / tilt.norm();
        }
        out.tilt_x(r, c) = tilt.x();
        out.tilt_y(r, c) = tilt.y();
        out.flags(r, c) = static_cast<std::uint8_t>(feasible ? TiltFlag::Tilted : TiltFlag::Infeasible);
      }
    }
  }
  return field;
}

bool fully_occluded(const FocalStack &stack, const DisplayConfig &config, std::size_t plane, Eigen::Index r,
                    Eigen::Index c) {
  const auto indices = build_indices(stack, config);
  const auto nearer = nearer_planes(stack, indices, plane);
  return fully_occluded_impl(nearer, config.display_geometry().center_of(r, c), stack.planes[plane].depth, config);
}

FocalStack remove_fully_occluded(const FocalStack &stack, const DisplayConfig &config) {
  validate(config);
  FocalStack out = stack;
  const auto indices = build_indices(stack, config);
  const PlaneGeometry display = config.display_geometry();
  for (std::size_t i = 1; i < stack.planes.size(); ++i) {
    const auto nearer = nearer_planes(stack, indices, i);
    if (nearer.empty()) {
      continue;
    }
    const auto &plane = stack.planes[i];
    auto &target = out.planes[i];
#pragma omp parallel for schedule(dynamic, 4)
    for (Eigen::Index r = 0; r < stack.rows(); ++r) {
      for (Eigen::Index c = 0; c < stack.cols(); ++c) {
        if (!plane.occupancy(r, c) || !fully_occluded_impl(nearer, display.center_of(r, c), plane.depth, config)) {
          continue;
        }
        target.occupancy(r, c) = false;
        target.removed(r, c) = true;
        for (auto &channel : target.intensity) {
          channel(r, c) = 0.0;
        }
      }
    }
  }
  return out;
}

std::pair<FocalStack, FocalStack> decompose_fg_bg(const FocalStack &stack, const TiltField &field) {
  if (field.planes.size() != stack.planes.size()) {
    throw ValidationError("decompose_fg_bg: field and stack plane counts differ");
  }
  FocalStack foreground = stack, background = stack;
  for (std::size_t i = 0; i < stack.planes.size(); ++i) {
    const auto &flags = field.planes[i].flags;
    for (Eigen::Index r = 0; r < stack.rows(); ++r) {
      for (Eigen::Index c = 0; c < stack.cols(); ++c) {
        const auto flag = static_cast<TiltFlag>(flags(r, c));
        const bool in_fg = stack.planes[i].occupancy(r, c) && flag == TiltFlag::Untilted;
        const bool in_bg = stack.planes[i].occupancy(r, c) &&
                           (flag == TiltFlag::Tilted || (flag == TiltFlag::Infeasible && !field.infeasible_removed));
        auto clear = [&](FocalPlane &plane) {
          plane.occupancy(r, c) = false;
          for (auto &channel : plane.intensity) {
            channel(r, c) = 0.0;
          }
        };
        if (!in_fg) {
          clear(foreground.planes[i]);
        }
        if (!in_bg) {
          clear(background.planes[i]);
        }
      }
    }
  }
  return {std::move(foreground), std::move(background)};
}

Mask flag_boundary(const TiltPlane &plane) {
  const auto &f = plane.flags;
  Mask out = Mask::Constant(f.rows(), f.cols(), false);
  for (Eigen::Index r = 0; r < f.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      const bool differs = (r > 0 && f(r - 1, c) != f(r, c)) || (r + 1 < f.rows() && f(r + 1, c) != f(r, c)) ||
                           (c > 0 && f(r, c - 1) != f(r, c)) || (c + 1 < f.cols() && f(r, c + 1) != f(r, c));
      out(r, c) = differs;
    }
  }
  return out;
}

} // namespace conetilt
