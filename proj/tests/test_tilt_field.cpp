#include <doctest.h>

#include "conetilt/distance_transform.hpp"
#include "oracles.hpp"

using namespace conetilt;

namespace {

Mask random_blobs(Eigen::Index n, int count, double min_r, double max_r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-0.4 * double(n), 0.4 * double(n)), rad(min_r, max_r);
  Mask m = Mask::Constant(n, n, false);
  for (int k = 0; k < count; ++k) {
    const double cx = pos(rng), cy = pos(rng), r = rad(rng);
    m = m || oracle::disc_mask(n, r, cx, cy);
  }
  return m;
}

Mask random_mask(Eigen::Index rows, Eigen::Index cols, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  Mask m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = b(rng);
  }
  return m;
}

// Half-plane occluder {x >= 4.0 mm} on the 0.25 m plane, full back plane at 1 m.
struct HalfPlane {
  DisplayConfig config;
  FocalStack stack;
  HalfPlane() {
    config.display_pitch = 16e-6;
    Mask front = Mask::Constant(256, 256, false);
    front.rightCols(256 - 186).setConstant(true);
    stack = oracle::stack_from_masks(config, {front, Mask::Constant(256, 256, true)}, {1.0, 0.5});
  }
};

} // namespace

TEST_SUITE("tilt_field") {

TEST_CASE("distance transform matches brute force") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Mask m = random_mask(13, 17, 0.08, seed);
    if (!m.any()) {
      continue;
    }
    const Grid<> fast = squared_distance_transform<double>(m);
    const Grid<> slow = oracle::brute_sdt(m);
    CHECK((fast - slow).abs().maxCoeff() == doctest::Approx(0.0));
    const Grid<float> single = squared_distance_transform<float>(m);
    CHECK((single.cast<double>() - slow).abs().maxCoeff() == doctest::Approx(0.0));
  }
  const Grid<> none = squared_distance_transform<double>(Mask::Constant(3, 3, false));
  CHECK(std::isinf(none(1, 1)));
}

TEST_CASE("nearest contour point on a half-plane") {
  const HalfPlane hp;
  const PlaneGeometry g = hp.config.plane_geometry(0.25);
  const Vec2 p = nearest_contour_point(hp.stack.planes[0].occupancy, g, Vec2(4.31e-3, 0.0));
  CHECK(p.x() == doctest::Approx(4.0e-3).epsilon(1e-12));
  CHECK(p.y() == doctest::Approx(0.0).epsilon(1e-12));
  const Vec2 q = nearest_contour_point(hp.stack.planes[0].occupancy, g, Vec2(3.5e-3, 1e-3));
  CHECK(q.x() == doctest::Approx(4.0e-3).epsilon(1e-12));
  CHECK(q.y() == doctest::Approx(1e-3).epsilon(1e-12));
}

TEST_CASE("nearest contour point matches exhaustive search") {
  const PlaneGeometry g{24, 24, 1e-4};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.3e-3, 1.3e-3);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Mask m = random_mask(24, 24, 0.2, seed + 20);
    const OccupancyIndex index(m, g);
    for (int k = 0; k < 200; ++k) {
      const Vec2 q(u(rng), u(rng));
      const bool inside = oracle::point_occupied(m, g, q);
      const auto expected = oracle::brute_nearest(m, g, q, !inside);
      const Vec2 got = nearest_contour_point(m, g, q);
      CHECK((got - q).norm() == doctest::Approx(expected.distance).epsilon(1e-9));
      CHECK((got - expected.point).norm() < 1e-12);
      CHECK(*index.distance(q, !inside) == doctest::Approx(expected.distance).epsilon(1e-9));
    }
  }
}

TEST_CASE("distance queries respect the limit") {
  const PlaneGeometry g{10, 10, 1.0};
  Mask m = Mask::Constant(10, 10, false);
  m(2, 7) = true;
  const OccupancyIndex index(m, g);
  const Vec2 q = g.center_of(2, 2);
  CHECK(*index.distance(q, true) == doctest::Approx(4.5));
  CHECK_FALSE(index.distance(q, true, 4.5).has_value());
  CHECK(index.distance(q, true, 4.6).has_value());
  CHECK(index.occupied_at(g.center_of(2, 7)));
  CHECK_FALSE(index.occupied_at(Vec2(100.0, 0.0)));
}

TEST_CASE("nearest contour point rejects masks without a contour") {
  const PlaneGeometry g{4, 4, 1.0};
  CHECK_THROWS_AS(nearest_contour_point(Mask::Constant(4, 4, false), g, Vec2::Zero()), ValidationError);
  CHECK_THROWS_AS(nearest_contour_point(Mask::Constant(4, 4, true), g, Vec2::Zero()), ValidationError);
}

TEST_CASE("cone footprint hand values") {
  DisplayConfig config;
  const ConeFootprint fp = cone_footprint(Vec2(1e-3, 0.0), 1.0, 0.25, config);
  CHECK(fp.center.x() == doctest::Approx(4.3103448e-3).epsilon(1e-7));
  CHECK(0.5 * fp.diameter == doctest::Approx(0.870e-3).epsilon(1e-9));
  CHECK(footprint_shift_per_tilt(0.25, 1.0, config) == doctest::Approx(0.0435));
  CHECK(footprint_shift_per_tilt(0.5, 0.5, config) == 0.0);
  CHECK_THROWS_AS(cone_footprint(Vec2::Zero(), 0.25, 1.0, config), ValidationError);
  CHECK_THROWS_AS(cone_footprint(Vec2::Zero(), 0.5, 0.5, config), ValidationError);
  CHECK_THROWS_AS(cone_footprint(Vec2::Zero(), 1.0, 0.0, config), ValidationError);
}

TEST_CASE("footprint point is affine in the ray angle and bounds the footprint") {
  DisplayConfig config;
  const Vec2 x(0.3e-3, -0.7e-3);
  const Vec2 a(0.004, -0.01), b(-0.013, 0.002);
  const double z_i = 1.0, z_o = 0.4;
  const Vec2 fa = footprint_point(x, a, z_i, z_o, config);
  const Vec2 fb = footprint_point(x, b, z_i, z_o, config);
  const Vec2 fm = footprint_point(x, 0.3 * a + 0.7 * b, z_i, z_o, config);
  CHECK((fm - (0.3 * fa + 0.7 * fb)).norm() < 1e-15);
  const ConeFootprint fp = cone_footprint(x, z_i, z_o, config);
  for (int k = 0; k < 16; ++k) {
    const double t = 2.0 * std::numbers::pi * k / 16.0;
    const Vec2 u = config.u_m * Vec2(std::cos(t), std::sin(t));
    CHECK((footprint_point(x, u, z_i, z_o, config) - fp.center).norm() ==
          doctest::Approx(0.5 * fp.diameter).epsilon(1e-12));
  }
}

TEST_CASE("half-plane occluder: hand-evaluated tilt, tangency and clearance") {
  const HalfPlane hp;
  const TiltField field = compute_tilt_field(hp.stack, hp.config);
  const auto &back = field.planes[1];
  const double s = 0.058 * 0.25 * 3.0;
  const double expected = (4.0e-3 - 0.02 * s - (0.25 / 0.058) * 1e-3) / s;
  CHECK(back.flag(127, 190) == TiltFlag::Tilted);
  CHECK(std::abs(back.tilt_x(127, 190) - expected) < 1e-9);
  CHECK(std::abs(back.tilt_x(127, 190) - (-0.02714)) < 1e-5);
  CHECK(back.tilt_y(127, 190) == 0.0);
  // The nearest plane is never tilted.
  CHECK(field.planes[0].flags.isZero());

  const OccupancyIndex front(hp.stack.planes[0].occupancy, hp.config.plane_geometry(0.25));
  int tilted = 0;
  for (Eigen::Index c = 150; c < 256; ++c) {
    const auto flag = back.flag(127, c);
    if (flag != TiltFlag::Tilted) {
      continue;
    }
    ++tilted;
    const Vec2 x = hp.config.display_geometry().center_of(127, c);
    const ConeFootprint fp = cone_footprint(x, 1.0, 0.25, hp.config);
    const Vec2 shifted = fp.center + s * back.tilt(127, c);
    CHECK(std::abs(*front.distance(shifted, true) - 0.5 * fp.diameter) < 1e-9);
    CHECK(oracle::count_cone_hits(hp.stack, hp.config, 1, 127, c, back.tilt(127, c), 1000, std::uint64_t(c)) == 0);
  }
  CHECK(tilted > 10);
}

TEST_CASE("tilt magnitude grows with depth behind the occluder edge") {
  const HalfPlane hp;
  const TiltField field = compute_tilt_field(hp.stack, hp.config);
  const auto &back = field.planes[1];
  double previous = -1.0;
  for (Eigen::Index c = 0; c < 256; ++c) {
    if (back.flag(100, c) == TiltFlag::Untilted) {
      CHECK(back.tilt(100, c).norm() == 0.0);
      continue;
    }
    const double magnitude = std::abs(back.tilt_x(100, c));
    if (back.flag(100, c) == TiltFlag::Tilted && previous >= 0.0) {
      CHECK(magnitude >= previous - 1e-12);
    }
    previous = magnitude;
  }
}

TEST_CASE("random occluders: every tilted cone clears every nearer plane, tangent and minimal") {
  const DisplayConfig config = oracle::small_config(64, {0.25, 0.5, 1.0});
  const Mask near = random_blobs(64, 4, 2.0, 6.0, 5);
  const Mask mid = random_blobs(64, 3, 3.0, 7.0, 6) && !near;
  const Mask back = Mask::Constant(64, 64, true);
  const FocalStack stack = oracle::stack_from_masks(config, {near, mid, back}, {1.0, 0.8, 0.5});
  const TiltField field = compute_tilt_field(stack, config);
  int tilted = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    const auto &plane = field.planes[i];
    for (Eigen::Index r = 0; r < 64; ++r) {
      for (Eigen::Index c = 0; c < 64; ++c) {
        const auto flag = plane.flag(r, c);
        if (!stack.planes[i].occupancy(r, c)) {
          CHECK(flag == TiltFlag::Untilted);
          continue;
        }
        if (flag == TiltFlag::Untilted) {
          CHECK(oracle::count_cone_hits(stack, config, i, r, c, Vec2::Zero(), 200, 1) == 0);
          continue;
        }
        if (flag == TiltFlag::Infeasible) {
          CHECK(plane.tilt(r, c).norm() <= 2.0 * config.u_m + 1e-12);
          continue;
        }
        ++tilted;
        const Vec2 tilt = plane.tilt(r, c);
        CHECK(tilt.norm() <= 2.0 * config.u_m + 1e-12);
        CHECK(oracle::count_cone_hits(stack, config, i, r, c, tilt, 1000, std::uint64_t(r * 64 + c)) == 0);
        // Tangent to some nearer plane's content, and overlapping again once shrunk.
        const Vec2 x = config.display_geometry().center_of(r, c);
        double gap = std::numeric_limits<double>::infinity();
        bool overlaps_when_shrunk = false;
        for (std::size_t o = 0; o < i; ++o) {
          if (!stack.planes[o].occupancy.any()) {
            continue;
          }
          const OccupancyIndex index(stack.planes[o].occupancy, config.plane_geometry(stack.planes[o].depth));
          const ConeFootprint fp = cone_footprint(x, stack.planes[i].depth, stack.planes[o].depth, config);
          const double s = footprint_shift_per_tilt(stack.planes[o].depth, stack.planes[i].depth, config);
          gap = std::min(gap, *index.distance(fp.center + s * tilt, true) - 0.5 * fp.diameter);
          const double shrunk = *index.distance(fp.center + s * (1.0 - 1e-6) * tilt, true);
          overlaps_when_shrunk = overlaps_when_shrunk || shrunk < 0.5 * fp.diameter;
        }
        CHECK(gap >= -1e-9);
        CHECK(gap <= 1e-9);
        CHECK(overlaps_when_shrunk);
      }
    }
  }
  CHECK(tilted > 50);
}

TEST_CASE("mirror-symmetric scene gives a mirror-symmetric tilt field") {
  const DisplayConfig config = oracle::small_config(64);
  Mask front = Mask::Constant(64, 64, false);
  front.block(8, 28, 48, 8).setConstant(true);  // vertical strip, symmetric about the center
  front.block(20, 4, 6, 56).setConstant(true);  // horizontal band
  const FocalStack stack = oracle::stack_from_masks(config, {front, Mask::Constant(64, 64, true)}, {1.0, 0.5});
  const TiltField field = compute_tilt_field(stack, config);
  const auto &p = field.planes[1];
  const OccupancyIndex index(front, config.plane_geometry(0.25));
  // Equidistant contour points are resolved by polar angle, which is not
  // mirror invariant; such pixels are skipped.
  auto tied = [&](Eigen::Index r, Eigen::Index c) {
    const Vec2 q = cone_footprint(config.display_geometry().center_of(r, c), 1.0, 0.25, config).center;
    return index.nearest(q, !index.occupied_at(q)).size() > 1;
  };
  int compared = 0;
  for (Eigen::Index r = 0; r < 64; ++r) {
    for (Eigen::Index c = 0; c < 64; ++c) {
      const Eigen::Index m = 63 - c;
      if (tied(r, c) || tied(r, m)) {
        continue;
      }
      ++compared;
      CHECK(p.flags(r, c) == p.flags(r, m));
      CHECK(p.tilt_x(r, c) == doctest::Approx(-p.tilt_x(r, m)).epsilon(1e-12));
      CHECK(p.tilt_y(r, c) == doctest::Approx(p.tilt_y(r, m)).epsilon(1e-12));
    }
  }
  CHECK(compared > 3500);
}

TEST_CASE("infeasible pixels are clamped, or dropped on request") {
  const DisplayConfig config = oracle::small_config(128);
  const Mask disc = oracle::disc_mask(128, 40.0);
  const FocalStack stack = oracle::stack_from_masks(config, {disc, Mask::Constant(128, 128, true)}, {1.0, 0.5});
  const TiltField field = compute_tilt_field(stack, config);
  const auto &back = field.planes[1];
  CHECK(back.flag(64, 64) == TiltFlag::Infeasible);
  CHECK(back.tilt(64, 64).norm() == doctest::Approx(2.0 * config.u_m));
  CAPTURE(field.count(TiltFlag::Infeasible));
  CHECK(field.count(TiltFlag::Infeasible) > 0);
  CHECK_FALSE(field.infeasible_removed);
  // A clamped cone is tangent to the aperture: no pupil point sees it.
  CameraView centered;
  centered.pupil_radius = 0.0;
  CHECK(effective_pupil_weight(back.tilt(64, 64), centered, config) == 0.0);

  TiltOptions options;
  options.remove_infeasible = true;
  const TiltField dropped = compute_tilt_field(stack, config, options);
  CHECK(dropped.infeasible_removed);
  const auto [fg, bg] = decompose_fg_bg(stack, dropped);
  CHECK_FALSE(bg.planes[1].occupancy(64, 64));
  CHECK_FALSE(fg.planes[1].occupancy(64, 64));
  const auto [fg2, bg2] = decompose_fg_bg(stack, field);
  CHECK(bg2.planes[1].occupancy(64, 64));
}

TEST_CASE("foreground/background decomposition partitions the content") {
  const DisplayConfig config = oracle::small_config(64);
  const Mask disc = oracle::disc_mask(64, 12.0);
  const FocalStack stack = oracle::stack_from_masks(config, {disc, Mask::Constant(64, 64, true)}, {1.0, 0.5});
  const TiltField field = compute_tilt_field(stack, config);
  const auto [fg, bg] = decompose_fg_bg(stack, field);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((fg.planes[i].occupancy && bg.planes[i].occupancy).count() == 0);
    CHECK(((fg.planes[i].occupancy || bg.planes[i].occupancy) == stack.planes[i].occupancy).all());
    CHECK((fg.planes[i].intensity[0] + bg.planes[i].intensity[0]).isApprox(stack.planes[i].intensity[0]));
  }
  CHECK(fg.planes[0].occupancy.count() == disc.count());
  CHECK(bg.planes[1].occupancy.count() == Eigen::Index(field.count(TiltFlag::Tilted) + field.count(TiltFlag::Infeasible)));
}

TEST_CASE("fully occluded pixels: deep ones removed, partially covered ones kept") {
  const DisplayConfig config = oracle::small_config(128);
  const Mask disc = oracle::disc_mask(128, 40.0);
  const FocalStack stack = oracle::stack_from_masks(config, {disc, Mask::Constant(128, 128, true)}, {1.0, 0.5});
  CHECK(fully_occluded(stack, config, 1, 64, 64));
  // Footprint center on the disc edge: about half the cone is clear.
  CHECK_FALSE(fully_occluded(stack, config, 1, 64, 64 + 40));
  CHECK_FALSE(fully_occluded(stack, config, 1, 5, 5));
  const FocalStack cleared = remove_fully_occluded(stack, config);
  CHECK(cleared.planes[1].removed(64, 64));
  CHECK_FALSE(cleared.planes[1].occupancy(64, 64));
  CHECK(cleared.planes[1].intensity[0](64, 64) == 0.0);
  CHECK(cleared.planes[0].occupancy.count() == disc.count());
  const FocalStack twice = remove_fully_occluded(cleared, config);
  CHECK((twice.planes[1].occupancy == cleared.planes[1].occupancy).all());
}

TEST_CASE("removal agrees with a 10^4-ray oracle") {
  const DisplayConfig config = oracle::small_config(64, {0.25, 0.5, 1.0});
  const Mask near = random_blobs(64, 5, 4.0, 9.0, 9);
  const Mask mid = random_blobs(64, 5, 4.0, 9.0, 10) && !near;
  const FocalStack stack =
      oracle::stack_from_masks(config, {near, mid, Mask::Constant(64, 64, true)}, {1.0, 0.8, 0.5});
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Eigen::Index> pick(0, 63);
  int removed = 0, kept = 0;
  for (int k = 0; k < 120; ++k) {
    const Eigen::Index r = pick(rng), c = pick(rng);
    const int hits = oracle::count_cone_hits(stack, config, 2, r, c, Vec2::Zero(), 10000, std::uint64_t(k));
    const bool occluded = fully_occluded(stack, config, 2, r, c);
    if (occluded) {
      ++removed;
      CHECK(hits == 10000);
    } else {
      ++kept;
      // Clear slivers below the ray oracle's resolution are not expected here.
      CHECK(hits < 10000);
    }
  }
  CHECK(removed > 0);
  CHECK(kept > 0);
}

TEST_CASE("flag boundary marks 4-neighbor changes") {
  TiltPlane plane;
  plane.flags = Grid<std::uint8_t>::Zero(5, 5);
  plane.flags(2, 2) = 1;
  const Mask b = flag_boundary(plane);
  CHECK(b.count() == 5);
  CHECK(b(2, 2));
  CHECK(b(1, 2));
  CHECK_FALSE(b(1, 1));
}

TEST_CASE("tilt solve rejects a stack that does not match the display") {
  const DisplayConfig config = oracle::small_config(16);
  const FocalStack stack = make_empty_stack(oracle::small_config(8), 1);
  CHECK_THROWS_AS(compute_tilt_field(stack, config), ValidationError);
}

} // TEST_SUITE
