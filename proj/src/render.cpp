#include "conetilt/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace conetilt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Shirley-Chiu concentric map from [0,1)^2 to the unit disc.
Vec2 concentric_disc(double a, double b) {
  const double x = 2.0 * a - 1.0, y = 2.0 * b - 1.0;
  if (x == 0.0 && y == 0.0) {
    return Vec2::Zero();
  }
  constexpr double quarter = 0.25 * std::numbers::pi;
  double r, phi;
  if (std::abs(x) > std::abs(y)) {
    r = x;
    phi = quarter * (y / x);
  } else {
    r = y;
    phi = 2.0 * quarter - quarter * (x / y);
  }
  return {r * std::cos(phi), r * std::sin(phi)};
}

struct PlaneView {
  double diopter;
  const FocalPlane *plane;
  const TiltPlane *tilt;
};

class RayModel {
public:
  RayModel(const DisplayConfig &config, const CameraView &camera)
      : alpha_(config.angular_pitch()), half_cols_(0.5 * double(config.n_x)), half_rows_(0.5 * double(config.n_y)),
        sensor_half_cols_(0.5 * double(camera.cols(config))), sensor_half_rows_(0.5 * double(camera.rows(config))),
        focus_diopter_(diopters(camera.focus_depth)), n_x_(config.n_x), n_y_(config.n_y) {}

  Vec2 sensor_angle(Eigen::Index r, Eigen::Index c) const {
    return {(double(c) + 0.5 - sensor_half_cols_) * alpha_, (sensor_half_rows_ - double(r) - 0.5) * alpha_};
  }

  // Continuous (column, row) coordinates on the shared plane grid.
  Vec2 grid_position(const Vec2 &theta_s, const Vec2 &p, double diopter) const {
    const Vec2 theta = theta_s + p * (diopter - focus_diopter_);
    return {theta.x() / alpha_ + half_cols_, half_rows_ - theta.y() / alpha_};
  }

  bool cell(const Vec2 &uv, Eigen::Index &r, Eigen::Index &c) const {
    const double fc = std::floor(uv.x()), fr = std::floor(uv.y());
    if (!(fc >= 0.0 && fr >= 0.0 && fc < double(n_x_) && fr < double(n_y_))) {
      return false;
    }
    c = Eigen::Index(fc);
    r = Eigen::Index(fr);
    return true;
  }

  double alpha() const { return alpha_; }
  double focus_diopter() const { return focus_diopter_; }
  double half_cols() const { return half_cols_; }
  double half_rows() const { return half_rows_; }
  Eigen::Index n_x() const { return n_x_; }
  Eigen::Index n_y() const { return n_y_; }

private:
  double alpha_, half_cols_, half_rows_, sensor_half_cols_, sensor_half_rows_, focus_diopter_;
  Eigen::Index n_x_, n_y_;
};

void check_stack(const FocalStack &stack, const DisplayConfig &config) {
  if (stack.planes.empty()) {
    throw ValidationError("render: empty focal stack");
  }
  if (stack.rows() != config.n_y || stack.cols() != config.n_x) {
    throw ValidationError("render: focal stack size differs from the display resolution");
  }
  for (const auto &plane : stack.planes) {
    const auto &depths = config.plane_depths;
    if (std::find(depths.begin(), depths.end(), plane.depth) == depths.end()) {
      throw ValidationError("render: focal plane depth not in the configuration");
    }
  }
}

std::vector<PlaneView> plane_views(const FocalStack &stack, const TiltField *field) {
  std::vector<PlaneView> views;
  for (std::size_t i = 0; i < stack.planes.size(); ++i) {
    views.push_back({diopters(stack.planes[i].depth), &stack.planes[i], field ? &field->planes[i] : nullptr});
  }
  return views;
}

void check_field(const FocalStack &stack, const TiltField *field, RenderMode mode) {
  if (mode != RenderMode::ConeTilt) {
    return;
  }
  if (!field) {
    throw ValidationError("render: ConeTilt mode requires a tilt field");
  }
  if (field->planes.size() != stack.planes.size()) {
    throw ValidationError("render: tilt field and focal stack have different plane counts");
  }
  for (const auto &plane : field->planes) {
    if (plane.tilt_x.rows() != stack.rows() || plane.tilt_x.cols() != stack.cols()) {
      throw ValidationError("render: tilt field size differs from the focal stack");
    }
  }
}

bool emitter_suppressed(const PlaneView &view, const TiltField &field, Eigen::Index r, Eigen::Index c) {
  return field.infeasible_removed && view.tilt->flag(r, c) == TiltFlag::Infeasible;
}

// Render assuming validated inputs; MultifocalNoOccluded expects a stack
// that has already been through remove_fully_occluded.
ImageBuffer render_prepared(const FocalStack &stack, const TiltField *field, const CameraView &camera,
                            RenderMode mode, std::uint64_t seed, const DisplayConfig &config) {
  const RayModel model(config, camera);
  const auto views = plane_views(stack, field);
  const Eigen::Index rows = camera.rows(config), cols = camera.cols(config);
  const int channels = stack.channels();
  ImageBuffer out = ImageBuffer::zeros(rows, cols, channels);
  const double aperture2 = config.aperture_radius() * config.aperture_radius();
  const double inv_samples = 1.0 / double(camera.samples_per_pixel);

#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::vector<double> accum(channels);
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::fill(accum.begin(), accum.end(), 0.0);
      const Vec2 theta_s = model.sensor_angle(r, c);
      const auto samples = pupil_samples(camera, seed, std::uint64_t(r * cols + c));
      for (const Vec2 &p : samples) {
        const bool in_aperture = p.squaredNorm() < aperture2;
        for (const auto &view : views) {
          Eigen::Index pr, pc;
          if (!model.cell(model.grid_position(theta_s, p, view.diopter), pr, pc) || !view.plane->occupancy(pr, pc)) {
            continue;
          }
          if (mode == RenderMode::ConeTilt) {
            if (!in_aperture || emitter_suppressed(view, *field, pr, pc)) {
              continue;
            }
            if ((p - config.d * view.tilt->tilt(pr, pc)).squaredNorm() >= aperture2) {
              continue;
            }
          }
          for (int ch = 0; ch < channels; ++ch) {
            accum[ch] += view.plane->intensity[ch](pr, pc);
          }
          if (mode == RenderMode::Reality) {
            break;
          }
        }
      }
      for (int ch = 0; ch < channels; ++ch) {
        out.channels[ch](r, c) = accum[ch] * inv_samples;
      }
    }
  }
  return out;
}

struct Hit {
  double diopter = -1.0;
  Eigen::Index r = 0, c = 0;
  bool found = false;
};

// First surface of one layer along a ray, by grid traversal between the
// layer's nearest and farthest depths.
Hit first_hit(const SceneRGBD &layer, double d_min, double d_max, const RayModel &model, const Vec2 &theta_s,
              const Vec2 &p) {
  auto test = [&](Eigen::Index r, Eigen::Index c, Hit &hit) {
    if (r < 0 || c < 0 || r >= layer.rows() || c >= layer.cols() || !layer.coverage(r, c)) {
      return false;
    }
    const double dk = layer.depth(r, c);
    Eigen::Index hr, hc;
    if (model.cell(model.grid_position(theta_s, p, dk), hr, hc) && hr == r && hc == c) {
      hit = {dk, r, c, true};
      return true;
    }
    return false;
  };
  Hit hit;
  const Vec2 a = model.grid_position(theta_s, p, d_max);
  const Vec2 b = model.grid_position(theta_s, p, d_min);
  Eigen::Index ix = Eigen::Index(std::floor(a.x())), iy = Eigen::Index(std::floor(a.y()));
  const Eigen::Index ex = Eigen::Index(std::floor(b.x())), ey = Eigen::Index(std::floor(b.y()));
  const Vec2 delta = b - a;
  const Eigen::Index step_x = delta.x() > 0 ? 1 : -1, step_y = delta.y() > 0 ? 1 : -1;
  constexpr double inf = std::numeric_limits<double>::infinity();
  double t_max_x = delta.x() != 0.0 ? ((step_x > 0 ? double(ix + 1) : double(ix)) - a.x()) / delta.x() : inf;
  double t_max_y = delta.y() != 0.0 ? ((step_y > 0 ? double(iy + 1) : double(iy)) - a.y()) / delta.y() : inf;
  const double t_delta_x = delta.x() != 0.0 ? std::abs(1.0 / delta.x()) : inf;
  const double t_delta_y = delta.y() != 0.0 ? std::abs(1.0 / delta.y()) : inf;
  Eigen::Index remaining = std::abs(ex - ix) + std::abs(ey - iy);
  while (true) {
    if (test(iy, ix, hit)) {
      return hit;
    }
    if (remaining-- <= 0) {
      break;
    }
    if (t_max_x < t_max_y) {
      ix += step_x;
      t_max_x += t_delta_x;
    } else {
      iy += step_y;
      t_max_y += t_delta_y;
    }
  }
  return hit;
}

} // namespace

std::string to_string(RenderMode mode) {
  switch (mode) {
  case RenderMode::Reality:
    return "Reality";
  case RenderMode::Multifocal:
    return "Multifocal";
  case RenderMode::MultifocalNoOccluded:
    return "MultifocalNoOccluded";
  case RenderMode::ConeTilt:
    return "ConeTilt";
  }
  return "unknown";
}

RenderMode parse_render_mode(const std::string &name) {
  for (RenderMode m : {RenderMode::Reality, RenderMode::Multifocal, RenderMode::MultifocalNoOccluded,
                       RenderMode::ConeTilt}) {
    if (to_string(m) == name) {
      return m;
    }
  }
  throw ValidationError("unknown render mode '" + name + "'");
}

ImageBuffer ImageBuffer::zeros(Eigen::Index height, Eigen::Index width, int channels) {
  ImageBuffer out;
  out.channels.assign(channels, Grid<>::Zero(height, width));
  return out;
}

Grid<> ImageBuffer::luminance() const {
  if (channels.empty()) {
    return {};
  }
  Grid<> sum = channels.front();
  for (std::size_t i = 1; i < channels.size(); ++i) {
    sum += channels[i];
  }
  return sum / double(channels.size());
}

static void check_same_shape(const ImageBuffer &a, const ImageBuffer &b) {
  if (a.channel_count() != b.channel_count() || a.width() != b.width() || a.height() != b.height()) {
    throw ValidationError("image dimensions differ");
  }
}

ImageBuffer operator+(const ImageBuffer &a, const ImageBuffer &b) {
  check_same_shape(a, b);
  ImageBuffer out = a;
  for (int ch = 0; ch < a.channel_count(); ++ch) {
    out.channels[ch] += b.channels[ch];
  }
  return out;
}

ImageBuffer operator-(const ImageBuffer &a, const ImageBuffer &b) {
  check_same_shape(a, b);
  ImageBuffer out = a;
  for (int ch = 0; ch < a.channel_count(); ++ch) {
    out.channels[ch] -= b.channels[ch];
  }
  return out;
}

std::vector<Vec2> pupil_samples(const CameraView &camera, std::uint64_t seed, std::uint64_t pixel_index) {
  const int n = camera.samples_per_pixel;
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(pixel_index)));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<Vec2> out;
  out.reserve(n);
  const int side = int(std::lround(std::sqrt(double(n))));
  if (side * side == n) {
    for (int j = 0; j < side; ++j) {
      for (int i = 0; i < side; ++i) {
        const double a = (i + uniform(rng)) / side;
        const double b = (j + uniform(rng)) / side;
        out.push_back(camera.pupil_center + camera.pupil_radius * concentric_disc(a, b));
      }
    }
  } else {
    for (int k = 0; k < n; ++k) {
      const double a = uniform(rng);
      const double b = uniform(rng);
      out.push_back(camera.pupil_center + camera.pupil_radius * concentric_disc(a, b));
    }
  }
  return out;
}

ImageBuffer render(const FocalStack &stack, const TiltField *field, const CameraView &camera, RenderMode mode,
                   std::uint64_t seed, const DisplayConfig &config) {
  validate(camera, config);
  check_stack(stack, config);
  check_field(stack, field, mode);
  if (mode == RenderMode::MultifocalNoOccluded) {
    return render_prepared(remove_fully_occluded(stack, config), nullptr, camera, RenderMode::Multifocal, seed,
                           config);
  }
  return render_prepared(stack, field, camera, mode, seed, config);
}

ImageBuffer render_splat(const FocalStack &stack_in, const TiltField *field, const CameraView &camera,
                         RenderMode mode, const DisplayConfig &config) {
  validate(camera, config);
  check_stack(stack_in, config);
  check_field(stack_in, field, mode);
  if (mode == RenderMode::Reality) {
    throw ValidationError("render_splat: Reality mode is not additive");
  }
  const FocalStack stack =
      mode == RenderMode::MultifocalNoOccluded ? remove_fully_occluded(stack_in, config) : stack_in;
  const bool tilted = mode == RenderMode::ConeTilt;
  const RayModel model(config, camera);
  const auto views = plane_views(stack, tilted ? field : nullptr);
  const Eigen::Index rows = camera.rows(config), cols = camera.cols(config);
  const int channels = stack.channels();
  ImageBuffer out = ImageBuffer::zeros(rows, cols, channels);
  const double radius = config.aperture_radius();
  const double rp = camera.pupil_radius;
  const Vec2 pc = camera.pupil_center;
  const double alpha = model.alpha();
  const double pupil_area = std::numbers::pi * rp * rp;
  const Disc pupil{pc, rp};
  const Disc aperture{Vec2::Zero(), radius};
  const bool need_aperture = pc.norm() + rp > radius;

  auto cone_weight = [&](const Vec2 &tilt) { return effective_pupil_weight(tilt, camera, config); };

#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::vector<Disc> discs;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Vec2 theta_s = model.sensor_angle(r, c);
      for (const auto &view : views) {
        const double dd = view.diopter - model.focus_diopter();
        const double image_radius_px = rp * std::abs(dd) / alpha;
        auto add = [&](Eigen::Index qr, Eigen::Index qc, double weight) {
          for (int ch = 0; ch < channels; ++ch) {
            out.channels[ch](r, c) += weight * view.plane->intensity[ch](qr, qc);
          }
        };
        if (image_radius_px < 1e-9) {
          Eigen::Index qr, qc;
          if (!model.cell(model.grid_position(theta_s, pc, view.diopter), qr, qc) || !view.plane->occupancy(qr, qc)) {
            continue;
          }
          if (tilted) {
            if (!emitter_suppressed(view, *field, qr, qc)) {
              add(qr, qc, cone_weight(view.tilt->tilt(qr, qc)));
            }
          } else {
            add(qr, qc, rp == 0.0 ? (aperture.contains(pc) ? 1.0 : 0.0) : 1.0);
          }
          continue;
        }
        // Cells covered by the pupil's image on this plane.
        const Vec2 center = model.grid_position(theta_s, pc, view.diopter);
        const double span = image_radius_px;
        const Eigen::Index c0 = std::max<Eigen::Index>(0, Eigen::Index(std::floor(center.x() - span)));
        const Eigen::Index c1 = std::min<Eigen::Index>(model.n_x() - 1, Eigen::Index(std::floor(center.x() + span)));
        const Eigen::Index r0 = std::max<Eigen::Index>(0, Eigen::Index(std::floor(center.y() - span)));
        const Eigen::Index r1 = std::min<Eigen::Index>(model.n_y() - 1, Eigen::Index(std::floor(center.y() + span)));
        for (Eigen::Index qr = r0; qr <= r1; ++qr) {
          for (Eigen::Index qc = c0; qc <= c1; ++qc) {
            if (!view.plane->occupancy(qr, qc)) {
              continue;
            }
            discs.assign({pupil});
            if (need_aperture) {
              discs.push_back(aperture);
            }
            if (tilted) {
              if (emitter_suppressed(view, *field, qr, qc)) {
                continue;
              }
              const Vec2 cone_center = config.d * view.tilt->tilt(qr, qc);
              const double gap = (cone_center - pc).norm();
              if (gap >= radius + rp) {
                continue;
              }
              if (gap + rp > radius) {
                discs.push_back({cone_center, radius});
              }
            }
            // Cell in angle, then its preimage on the pupil plane.
            const double tx0 = (double(qc) - model.half_cols()) * alpha;
            const double tx1 = tx0 + alpha;
            const double ty1 = (model.half_rows() - double(qr)) * alpha;
            const double ty0 = ty1 - alpha;
            const double px0 = (tx0 - theta_s.x()) / dd, px1 = (tx1 - theta_s.x()) / dd;
            const double py0 = (ty0 - theta_s.y()) / dd, py1 = (ty1 - theta_s.y()) / dd;
            const Box box{{std::min(px0, px1), std::min(py0, py1)}, {std::max(px0, px1), std::max(py0, py1)}};
            const double weight = intersection_area(discs, box) / pupil_area;
            if (weight > 0.0) {
              add(qr, qc, weight);
            }
          }
        }
      }
    }
  }
  return out;
}

ImageBuffer render_reality_reference(const LayeredScene &scene, const CameraView &camera, std::uint64_t seed,
                                     const DisplayConfig &config) {
  validate(camera, config);
  if (scene.layers.empty()) {
    throw ValidationError("render_reality_reference: scene has no layers");
  }
  std::vector<std::pair<double, double>> ranges;
  for (const auto &layer : scene.layers) {
    validate(layer);
    if (layer.rows() != config.n_y || layer.cols() != config.n_x) {
      throw ValidationError("render_reality_reference: scene size differs from the display resolution");
    }
    if (layer.channels() != scene.layers.front().channels()) {
      throw ValidationError("render_reality_reference: layers differ in channel count");
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index r = 0; r < layer.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.cols(); ++c) {
        if (layer.coverage(r, c)) {
          lo = std::min(lo, layer.depth(r, c));
          hi = std::max(hi, layer.depth(r, c));
        }
      }
    }
    ranges.emplace_back(lo, hi);
  }
  const RayModel model(config, camera);
  const Eigen::Index rows = camera.rows(config), cols = camera.cols(config);
  const int channels = scene.layers.front().channels();
  ImageBuffer out = ImageBuffer::zeros(rows, cols, channels);
  const double inv_samples = 1.0 / double(camera.samples_per_pixel);

#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::vector<double> accum(channels);
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::fill(accum.begin(), accum.end(), 0.0);
      const Vec2 theta_s = model.sensor_angle(r, c);
      const auto samples = pupil_samples(camera, seed, std::uint64_t(r * cols + c));
      for (const Vec2 &p : samples) {
        Hit best;
        std::size_t best_layer = 0;
        for (std::size_t l = 0; l < scene.layers.size(); ++l) {
          if (!(ranges[l].second >= ranges[l].first)) {
            continue;
          }
          const Hit hit = first_hit(scene.layers[l], ranges[l].first, ranges[l].second, model, theta_s, p);
          if (hit.found && (!best.found || hit.diopter > best.diopter)) {
            best = hit;
            best_layer = l;
          }
        }
        if (best.found) {
          for (int ch = 0; ch < channels; ++ch) {
            accum[ch] += scene.layers[best_layer].intensity[ch](best.r, best.c);
          }
        }
      }
      for (int ch = 0; ch < channels; ++ch) {
        out.channels[ch](r, c) = accum[ch] * inv_samples;
      }
    }
  }
  return out;
}

ImageBuffer render_reality_reference(const SceneRGBD &scene, const CameraView &camera, std::uint64_t seed,
                                     const DisplayConfig &config) {
  return render_reality_reference(LayeredScene{{scene}}, camera, seed, config);
}

std::vector<ImageBuffer> viewpoint_sweep(const FocalStack &stack, const TiltField *field,
                                         const CameraView &base_camera, const std::vector<Vec2> &offsets,
                                         RenderMode mode, std::uint64_t seed, const DisplayConfig &config) {
  std::vector<CameraView> cameras;
  for (const Vec2 &offset : offsets) {
    CameraView camera = base_camera;
    camera.pupil_center += offset;
    validate(camera, config);
    cameras.push_back(camera);
  }
  std::vector<ImageBuffer> out;
  if (cameras.empty()) {
    return out;
  }
  check_stack(stack, config);
  check_field(stack, field, mode);
  if (mode == RenderMode::MultifocalNoOccluded) {
    const FocalStack cleared = remove_fully_occluded(stack, config);
    for (const auto &camera : cameras) {
      out.push_back(render_prepared(cleared, nullptr, camera, RenderMode::Multifocal, seed, config));
    }
    return out;
  }
  for (const auto &camera : cameras) {
    out.push_back(render_prepared(stack, field, camera, mode, seed, config));
  }
  return out;
}

ImageBuffer render_two_sweep(const FocalStack &foreground, const FocalStack &background, const TiltField &field,
                             const CameraView &camera, std::uint64_t seed, const DisplayConfig &config) {
  const ImageBuffer front = render(foreground, nullptr, camera, RenderMode::Multifocal, seed, config);
  const ImageBuffer back = render(background, &field, camera, RenderMode::ConeTilt, seed, config);
  return front + back;
}

} // namespace conetilt
