#include "conetilt/generators.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace conetilt {

using nlohmann::json;

namespace {

constexpr double kFrontDepth = 0.25;
constexpr double kBackDepth = 1.0;

using Glyph = std::array<const char *, 7>;

const std::map<char, Glyph> &font() {
  static const std::map<char, Glyph> glyphs{
      {'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
      {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
      {'N', {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"}},
      {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
      {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
      {'I', {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
      {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
  };
  return glyphs;
}

// Stamps `text` with 3x-scaled 5x7 glyphs; top-left corner of the first
// glyph at (row0, col0), 18 px advance.
void stamp_text(Mask &mask, const std::string &text, Eigen::Index row0, Eigen::Index col0) {
  constexpr int scale = 3, advance = 18;
  for (std::size_t k = 0; k < text.size(); ++k) {
    const auto it = font().find(text[k]);
    if (it == font().end()) {
      continue;
    }
    for (int gy = 0; gy < 7; ++gy) {
      for (int gx = 0; gx < 5; ++gx) {
        if (it->second[gy][gx] != '#') {
          continue;
        }
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) {
            const Eigen::Index r = row0 + gy * scale + sy;
            const Eigen::Index c = col0 + Eigen::Index(k) * advance + gx * scale + sx;
            if (r >= 0 && c >= 0 && r < mask.rows() && c < mask.cols()) {
              mask(r, c) = true;
            }
          }
        }
      }
    }
  }
}

Grid<> pattern_texture(Eigen::Index rows, Eigen::Index cols) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Grid<> t(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      t(r, c) = 0.45 + 0.2 * std::sin(two_pi * double(c) / 23.0) * std::sin(two_pi * double(r) / 31.0) +
                0.1 * std::sin(two_pi * double(r + c) / 11.0);
    }
  }
  return t;
}

// Pixel-center offset from the grid center, x right and y up, in pixels.
Vec2 centered(Eigen::Index r, Eigen::Index c, Eigen::Index rows, Eigen::Index cols) {
  return {double(c) + 0.5 - 0.5 * double(cols), 0.5 * double(rows) - double(r) - 0.5};
}

SceneRGBD layer(const Grid<> &intensity, const Grid<> &depth, const Mask &coverage) {
  SceneRGBD s{{intensity}, depth, coverage};
  validate(s);
  return s;
}

// Front object over a fully covered back texture, plus the back texture as
// a hidden layer.
LayeredScene two_plane_scene(const Mask &front, const Grid<> &front_intensity, const Grid<> &back_intensity) {
  const Eigen::Index rows = front.rows(), cols = front.cols();
  const Grid<> back_depth = Grid<>::Constant(rows, cols, diopters(kBackDepth));
  const Grid<> depth = front.select(Grid<>::Constant(rows, cols, diopters(kFrontDepth)), back_depth);
  const Grid<> intensity = front.select(front_intensity, back_intensity);
  const Mask all = Mask::Constant(rows, cols, true);
  return {{layer(intensity, depth, all), layer(back_intensity, back_depth, all)}};
}

double param(const json &params, const char *key, double fallback) {
  if (!params.contains(key)) {
    return fallback;
  }
  if (!params.at(key).is_number()) {
    throw ValidationError(std::string("generator parameter '") + key + "' must be a number");
  }
  return params.at(key).get<double>();
}

void check_keys(const json &params, std::initializer_list<const char *> known) {
  if (params.is_null()) {
    return;
  }
  if (!params.is_object()) {
    throw ValidationError("generator parameters must be a JSON object");
  }
  for (const auto &[key, value] : params.items()) {
    bool ok = false;
    for (const char *k : known) {
      ok = ok || key == k;
    }
    if (!ok) {
      throw ValidationError("unknown generator parameter '" + key + "'");
    }
  }
}

GeneratedScene occluder_text(const json &params, const DisplayConfig &config) {
  check_keys(params, {"disc_radius_px", "back_texture"});
  const double radius = param(params, "disc_radius_px", 60.0);
  const std::string texture = params.is_object() ? params.value("back_texture", "pattern") : "pattern";
  if (texture != "pattern" && texture != "flat") {
    throw ValidationError("occluder_text: back_texture must be \"pattern\" or \"flat\"");
  }
  if (!(radius > 0.0)) {
    throw ValidationError("occluder_text: disc_radius_px must be positive");
  }
  const Eigen::Index rows = config.n_y, cols = config.n_x;
  Mask disc(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      disc(r, c) = centered(r, c, rows, cols).squaredNorm() <= radius * radius;
    }
  }
  Mask glyphs = Mask::Constant(rows, cols, false);
  // Third glyph's left stroke ends up just inside the disc's right edge.
  const Eigen::Index edge = Eigen::Index(std::floor(0.5 * double(cols) + radius));
  stamp_text(glyphs, "CONETILT", rows / 2 - 10, edge - 4 - 2 * 18);
  Grid<> back = texture == "flat" ? Grid<>::Constant(rows, cols, 0.3) : pattern_texture(rows, cols);
  back = glyphs.select(Grid<>::Constant(rows, cols, 1.0), back);
  const Grid<> front = Grid<>::Constant(rows, cols, 0.8);

  GeneratedScene out{"occluder_text", two_plane_scene(disc, front, back), {kFrontDepth, kBackDepth}, {}, {}};
  out.masks["occluder"] = disc;
  out.masks["glyphs"] = glyphs;
  out.params = {{"disc_radius_px", radius}, {"back_texture", texture}};
  return out;
}

GeneratedScene leaf(const json &params, const DisplayConfig &config) {
  check_keys(params, {"length_px", "width_px", "angle_deg"});
  const double length = param(params, "length_px", 150.0);
  const double width = param(params, "width_px", 70.0);
  const double angle = param(params, "angle_deg", 30.0) * std::numbers::pi / 180.0;
  const Eigen::Index rows = config.n_y, cols = config.n_x;
  Mask shape(rows, cols);
  Grid<> front(rows, cols);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Vec2 p = centered(r, c, rows, cols);
      const double along = ca * p.x() + sa * p.y();
      const double across = -sa * p.x() + ca * p.y();
      const double t = along / length + 0.5; // 0 at the stem, 1 at the tip
      const double half_width = t > 0.0 && t < 1.0 ? 0.5 * width * std::pow(std::sin(std::numbers::pi * t), 0.8) : 0.0;
      const bool blade = std::abs(across) <= half_width;
      const bool stem = t <= 0.0 && t > -0.12 && std::abs(across) <= 2.0;
      shape(r, c) = blade || stem;
      const double midrib = std::exp(-across * across / 2.0);
      const double phase = 2.0 * std::numbers::pi * (along - 1.2 * std::abs(across)) / 14.0;
      const double lateral = std::abs(across) < half_width ? 0.5 + 0.5 * std::cos(phase) : 0.0;
      front(r, c) = std::clamp(0.35 + 0.3 * t + 0.3 * midrib + 0.15 * std::pow(lateral, 8.0), 0.0, 1.0);
    }
  }
  GeneratedScene out{"leaf", two_plane_scene(shape, front, pattern_texture(rows, cols)), {kFrontDepth, kBackDepth},
                     {}, {}};
  out.masks["occluder"] = shape;
  out.params = {{"length_px", length}, {"width_px", width}, {"angle_deg", angle * 180.0 / std::numbers::pi}};
  return out;
}

GeneratedScene chessboard(const json &params, const DisplayConfig &config) {
  check_keys(params, {"planes", "max_diopters"});
  const int planes = int(param(params, "planes", 40.0));
  const double max_d = param(params, "max_diopters", 4.0);
  if (planes < 2 || !(max_d > 0.0)) {
    throw ValidationError("chessboard: needs at least 2 planes and positive max_diopters");
  }
  const Eigen::Index rows = config.n_y, cols = config.n_x;
  std::vector<double> depths;
  for (int k = planes - 1; k >= 0; --k) {
    const double dk = max_d * double(k) / double(planes - 1);
    depths.push_back(dk == 0.0 ? kInfinity : 1.0 / dk);
  }
  // Floor: 0 D at the top row, max_d at the bottom.
  auto floor_diopter = [&](Eigen::Index r) { return max_d * double(r) / double(rows - 1); };
  Grid<> depth(rows, cols), intensity(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double dr = floor_diopter(r);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double x = (double(c) + 0.5 - 0.5 * double(cols)) * std::max(dr, 0.05) / 24.0;
      const double z = dr * 2.0;
      const bool dark = (int(std::floor(x)) + int(std::floor(z))) % 2 != 0;
      depth(r, c) = dr;
      intensity(r, c) = dark ? 0.25 : 0.75;
    }
  }
  Mask pieces = Mask::Constant(rows, cols, false);
  const std::array<std::pair<double, double>, 6> bases{
      {{0.82, 0.35}, {0.82, 0.62}, {0.66, 0.48}, {0.55, 0.30}, {0.45, 0.68}, {0.35, 0.50}}};
  for (std::size_t k = 0; k < bases.size(); ++k) {
    const Eigen::Index base = Eigen::Index(bases[k].first * double(rows));
    const double dr = floor_diopter(base);
    const Eigen::Index height = Eigen::Index(8.0 + 10.0 * dr);
    const Eigen::Index half = Eigen::Index(2.0 + 2.0 * dr);
    const Eigen::Index cc = Eigen::Index(bases[k].second * double(cols));
    for (Eigen::Index r = std::max<Eigen::Index>(0, base - height); r <= base; ++r) {
      for (Eigen::Index c = std::max<Eigen::Index>(0, cc - half); c <= std::min(cols - 1, cc + half); ++c) {
        depth(r, c) = dr;
        intensity(r, c) = k % 2 == 0 ? 0.95 : 0.1;
        pieces(r, c) = true;
      }
    }
  }
  GeneratedScene out{"chessboard",
                     {{layer(intensity, depth, Mask::Constant(rows, cols, true))}},
                     depths,
                     {},
                     {}};
  out.masks["pieces"] = pieces;
  out.params = {{"planes", planes}, {"max_diopters", max_d}};
  return out;
}

GeneratedScene railing(const json &params, const DisplayConfig &config) {
  check_keys(params, {"spacing_factor", "bar_width_px"});
  const double factor = param(params, "spacing_factor", 0.5);
  const double bar = param(params, "bar_width_px", 6.0);
  if (!(factor > 0.0) || !(bar >= 1.0)) {
    throw ValidationError("railing: spacing_factor must be positive and bar_width_px >= 1");
  }
  const Eigen::Index rows = config.n_y, cols = config.n_x;
  const double gap = factor * min_occluder_separation(kFrontDepth, kBackDepth, config);
  const double period = bar + gap;
  const double margin = 8.0;
  Mask bars = Mask::Constant(rows, cols, false), gaps = Mask::Constant(rows, cols, false);
  const Eigen::Index top = std::min<Eigen::Index>(16, rows / 4), bottom = rows - top;
  // Bars symmetric about the center column, [left, left + bar) in pixel units.
  const double half = 0.5 * double(cols);
  const int k_max = int(std::floor((half - margin - 0.5 * bar) / period));
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double x = double(c) + 0.5 - half; // pixel center, relative
    bool on_bar = false;
    for (int k = -k_max; k <= k_max; ++k) {
      const double left = double(k) * period - 0.5 * bar;
      on_bar = on_bar || (x >= left && x < left + bar);
    }
    const double extent = double(k_max) * period + 0.5 * bar;
    const bool between = !on_bar && std::abs(x) < extent;
    for (Eigen::Index r = top; r < bottom; ++r) {
      bars(r, c) = on_bar;
      gaps(r, c) = between && k_max > 0;
    }
  }
  GeneratedScene out{"railing",
                     two_plane_scene(bars, Grid<>::Constant(rows, cols, 0.7), pattern_texture(rows, cols)),
                     {kFrontDepth, kBackDepth},
                     {},
                     {}};
  out.masks["occluder"] = bars;
  out.masks["gaps"] = gaps;
  out.params = {{"spacing_factor", factor}, {"bar_width_px", bar}, {"gap_px", gap}};
  return out;
}

} // namespace

std::vector<std::string> generator_names() { return {"occluder_text", "leaf", "chessboard", "railing"}; }

GeneratedScene generate_scene(const std::string &name, const json &params, const DisplayConfig &config) {
  if (name == "occluder_text") {
    return occluder_text(params, config);
  }
  if (name == "leaf") {
    return leaf(params, config);
  }
  if (name == "chessboard") {
    return chessboard(params, config);
  }
  if (name == "railing") {
    return railing(params, config);
  }
  throw ValidationError("unknown generator '" + name + "'");
}

} // namespace conetilt
