#include "conetilt/scene.hpp"

#include <cmath>

namespace conetilt {

SceneRGBD make_scene(std::vector<Grid<>> intensity, Grid<> depth_diopters) {
  SceneRGBD scene;
  scene.coverage = Mask::Constant(depth_diopters.rows(), depth_diopters.cols(), true);
  scene.intensity = std::move(intensity);
  scene.depth = std::move(depth_diopters);
  validate(scene);
  return scene;
}

void validate(const SceneRGBD &scene) {
  if (scene.channels() != 1 && scene.channels() != 3) {
    throw ValidationError("scene: channel count must be 1 or 3");
  }
  for (const auto &channel : scene.intensity) {
    if (channel.rows() != scene.rows() || channel.cols() != scene.cols()) {
      throw ValidationError("scene: intensity and depth dimensions differ");
    }
    if (!channel.allFinite() || (channel < 0.0).any()) {
      throw ValidationError("scene: intensity must be finite and non-negative");
    }
  }
  if (scene.coverage.rows() != scene.rows() || scene.coverage.cols() != scene.cols()) {
    throw ValidationError("scene: coverage mask dimensions differ");
  }
  if (!scene.depth.allFinite() || (scene.depth < 0.0).any()) {
    throw ValidationError("scene: depth (diopters) must be finite and >= 0");
  }
}

FocalStack make_empty_stack(const DisplayConfig &config, int channels) {
  FocalStack stack;
  for (double z : config.plane_depths) {
    FocalPlane plane;
    plane.depth = z;
    plane.intensity.assign(channels, Grid<>::Zero(config.n_y, config.n_x));
    plane.occupancy = Mask::Constant(config.n_y, config.n_x, false);
    plane.removed = Mask::Constant(config.n_y, config.n_x, false);
    stack.planes.push_back(std::move(plane));
  }
  return stack;
}

std::size_t nearest_plane(double depth_diopters, const DisplayConfig &config) {
  std::size_t best = 0;
  double best_distance = kInfinity;
  for (std::size_t i = 0; i < config.plane_depths.size(); ++i) {
    const double distance = std::abs(depth_diopters - diopters(config.plane_depths[i]));
    // Planes are ordered near to far, so on a tie the earlier (larger-diopter) one stays.
    if (distance < best_distance - 1e-12) {
      best = i;
      best_distance = distance;
    }
  }
  return best;
}

SceneRGBD resample_scene(const SceneRGBD &scene, Eigen::Index rows, Eigen::Index cols) {
  SceneRGBD out;
  out.depth.resize(rows, cols);
  out.coverage.resize(rows, cols);
  out.intensity.assign(scene.channels(), Grid<>::Zero(rows, cols));
  const double sy = double(scene.rows()) / double(rows);
  const double sx = double(scene.cols()) / double(cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto nr = std::min<Eigen::Index>(scene.rows() - 1, Eigen::Index((double(r) + 0.5) * sy));
      const auto nc = std::min<Eigen::Index>(scene.cols() - 1, Eigen::Index((double(c) + 0.5) * sx));
      out.depth(r, c) = scene.depth(nr, nc);
      out.coverage(r, c) = scene.coverage(nr, nc);

      // Box filter over the source footprint with fractional edge weights.
      const double y0 = double(r) * sy, y1 = double(r + 1) * sy;
      const double x0 = double(c) * sx, x1 = double(c + 1) * sx;
      double weight_sum = 0.0;
      std::vector<double> sums(scene.channels(), 0.0);
      for (auto sr = Eigen::Index(y0); sr < std::min<Eigen::Index>(scene.rows(), Eigen::Index(std::ceil(y1))); ++sr) {
        const double wy = std::min(y1, double(sr + 1)) - std::max(y0, double(sr));
        for (auto sc = Eigen::Index(x0); sc < std::min<Eigen::Index>(scene.cols(), Eigen::Index(std::ceil(x1))); ++sc) {
          const double w = wy * (std::min(x1, double(sc + 1)) - std::max(x0, double(sc)));
          if (w <= 0.0) {
            continue;
          }
          weight_sum += w;
          for (int ch = 0; ch < scene.channels(); ++ch) {
            sums[ch] += w * scene.intensity[ch](sr, sc);
          }
        }
      }
      for (int ch = 0; ch < scene.channels(); ++ch) {
        out.intensity[ch](r, c) = weight_sum > 0.0 ? sums[ch] / weight_sum : 0.0;
      }
    }
  }
  return out;
}

namespace {

void deposit_layer(const SceneRGBD &layer, const DisplayConfig &config, FocalStack &stack) {
  for (Eigen::Index r = 0; r < layer.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.cols(); ++c) {
      if (!layer.coverage(r, c)) {
        continue;
      }
      auto &plane = stack.planes[nearest_plane(layer.depth(r, c), config)];
      if (plane.occupancy(r, c)) {
        continue;
      }
      plane.occupancy(r, c) = true;
      for (int ch = 0; ch < layer.channels(); ++ch) {
        plane.intensity[ch](r, c) = layer.intensity[ch](r, c);
      }
    }
  }
}

SceneRGBD conform(const SceneRGBD &layer, const DisplayConfig &config, const DiscretizeOptions &options) {
  validate(layer);
  if (layer.rows() == config.n_y && layer.cols() == config.n_x) {
    return layer;
  }
  if (!options.resample) {
    throw ValidationError("discretize: scene is " + std::to_string(layer.cols()) + "x" + std::to_string(layer.rows()) +
                          " but the display is " + std::to_string(config.n_x) + "x" + std::to_string(config.n_y));
  }
  return resample_scene(layer, config.n_y, config.n_x);
}

} // namespace

FocalStack discretize_scene(const SceneRGBD &scene, const DisplayConfig &config, const DiscretizeOptions &options) {
  return discretize_scene(LayeredScene{{scene}}, config, options);
}

FocalStack discretize_scene(const LayeredScene &scene, const DisplayConfig &config, const DiscretizeOptions &options) {
  if (config.plane_depths.empty()) {
    throw ValidationError("discretize: no focal planes configured");
  }
  if (scene.layers.empty()) {
    throw ValidationError("discretize: scene has no layers");
  }
  const int channels = scene.layers.front().channels();
  FocalStack stack = make_empty_stack(config, channels);
  for (const auto &layer : scene.layers) {
    if (layer.channels() != channels) {
      throw ValidationError("discretize: layers disagree on channel count");
    }
    deposit_layer(conform(layer, config, options), config, stack);
  }
  return stack;
}

FocalStack with_dark_planes(FocalStack stack, const std::vector<std::size_t> &plane_indices) {
  for (std::size_t i : plane_indices) {
    for (auto &channel : stack.planes.at(i).intensity) {
      channel.setZero();
    }
  }
  return stack;
}

} // namespace conetilt
