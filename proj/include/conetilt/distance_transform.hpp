#ifndef CONETILT_DISTANCE_TRANSFORM_HPP
#define CONETILT_DISTANCE_TRANSFORM_HPP

#include <optional>
#include <vector>

#include "conetilt/types.hpp"

namespace conetilt {

/// Squared Euclidean distance from every pixel center to the nearest pixel
/// center where `features` is true (Felzenszwalb-Huttenlocher lower
/// envelope, separable). Pixels have unit spacing; +inf when there are no
/// features.
template <typename Scalar = double>
Grid<Scalar> squared_distance_transform(const Mask &features);

/// Nearest point of a union of pixel cells, in plane meters.
struct NearestPoint {
  Vec2 point;
  double distance = 0.0;
};

/// Occupancy of one focal plane with exact point-to-region queries.
///
/// The occupied region is the union of closed pixel cells; the contour is
/// its boundary inside the grid. Queries are answered exactly: a two-sided
/// distance transform over pixel centers bounds a local search over cell
/// boxes, so results equal a brute-force scan over every cell.
class OccupancyIndex {
public:
  OccupancyIndex() = default;
  OccupancyIndex(Mask occupancy, const PlaneGeometry &geometry);

  const Mask &occupancy() const { return occupancy_; }
  const PlaneGeometry &geometry() const { return geometry_; }
  bool any_occupied() const { return occupied_count_ > 0; }
  bool any_free() const { return occupied_count_ < occupancy_.size(); }

  /// Whether point q (meters) lies in an occupied cell; points off the grid are free.
  bool occupied_at(const Vec2 &q) const;

  /// Distance from q to the occupied (or free, when `occupied` is false)
  /// cell union. Returns nullopt when it is at least `limit` or the region
  /// is empty.
  std::optional<double> distance(const Vec2 &q, bool occupied, double limit = kNoLimit) const;

  /// All nearest points of the occupied / free cell union, ties included
  /// (distances equal within 1e-9 pixel). Empty when the region is empty.
  std::vector<NearestPoint> nearest(const Vec2 &q, bool occupied) const;

  /// Cell-index box tests in continuous pixel units [u0,u1] x [v0,v1].
  /// Cells outside the grid count as free.
  bool box_all_occupied(double u0, double v0, double u1, double v1) const;
  bool box_any_occupied(double u0, double v0, double u1, double v1) const;

  static constexpr double kNoLimit = 1e300;

private:
  long count_in(Eigen::Index r0, Eigen::Index c0, Eigen::Index r1, Eigen::Index c1) const;
  template <typename Visit>
  void scan(const Vec2 &uv, bool occupied, double radius, Visit &&visit) const;
  double center_bound(const Vec2 &uv, bool occupied, Eigen::Index &r, Eigen::Index &c) const;

  Mask occupancy_;
  PlaneGeometry geometry_;
  Grid<> dist_to_occupied_; // center distances, pixel units
  Grid<> dist_to_free_;
  Grid<long> summed_;       // (rows+1) x (cols+1) summed-area table
  long occupied_count_ = 0;
};

/// Nearest point on the occluding contour of `occupancy` to `query`.
///
/// For a query outside the occupied region this is the nearest occupied
/// point; inside, the nearest free point. Ties resolve to the smallest polar
/// angle of (point - query). Throws ValidationError if the mask has no
/// occupied or no free pixels (no contour).
Vec2 nearest_contour_point(const Mask &occupancy, const PlaneGeometry &geometry, const Vec2 &query);

} // namespace conetilt

#endif // CONETILT_DISTANCE_TRANSFORM_HPP
