#include "conetilt/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>
#include <png.h>

namespace conetilt {

using nlohmann::json;

namespace {

std::string path_string(const fs::path &p) { return p.string(); }

json depth_to_json(double z) {
  if (std::isinf(z)) {
    return "inf";
  }
  return z;
}

double depth_from_json(const json &j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") {
      return kInfinity;
    }
    throw ValidationError("config: depth strings must be \"inf\"");
  }
  if (!j.is_number()) {
    throw ValidationError("config: plane depth must be a number or \"inf\"");
  }
  return j.get<double>();
}

json read_json(const fs::path &path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception &e) {
    throw ValidationError(path_string(path) + ": " + e.what());
  }
}

void write_json(const fs::path &path, const json &j) { write_text(path, j.dump(2) + "\n"); }

Grid<> mask_to_grid(const Mask &m) { return m.cast<double>(); }
Mask grid_to_mask(const Grid<> &g) { return g != 0.0; }

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE *file = nullptr;
  ~PngReader() {
    if (png) {
      png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
    if (file) {
      std::fclose(file);
    }
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE *file = nullptr;
  ~PngWriter() {
    if (png) {
      png_destroy_write_struct(&png, info ? &info : nullptr);
    }
    if (file) {
      std::fclose(file);
    }
  }
};

void write_png_raw(const fs::path &path, int width, int height, int channels, int bit_depth,
                   const std::vector<std::vector<png_byte>> &rows) {
  PngWriter w;
  w.file = std::fopen(path_string(path).c_str(), "wb");
  if (!w.file) {
    throw std::runtime_error("cannot write " + path_string(path));
  }
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  w.info = png_create_info_struct(w.png);
  if (!w.png || !w.info || setjmp(png_jmpbuf(w.png))) {
    throw std::runtime_error("libpng failed writing " + path_string(path));
  }
  png_init_io(w.png, w.file);
  png_set_IHDR(w.png, w.info, width, height, bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  for (const auto &row : rows) {
    png_write_row(w.png, row.data());
  }
  png_write_end(w.png, nullptr);
}

} // namespace

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path_string(path));
  }
  out << text;
}

std::string read_text(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot read " + path_string(path));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_pfm(const fs::path &path, const ImageBuffer &image) {
  const int channels = image.channel_count();
  if (channels != 1 && channels != 3) {
    throw ValidationError("write_pfm: images must have 1 or 3 channels");
  }
  const Eigen::Index w = image.width(), h = image.height();
  std::ostringstream header;
  header << (channels == 3 ? "PF" : "Pf") << "\n" << w << " " << h << "\n-1.0\n";
  std::string data = header.str();
  std::vector<float> row(std::size_t(w * channels));
  for (Eigen::Index r = h - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        row[std::size_t(c * channels + ch)] = float(image.channels[ch](r, c));
      }
    }
    for (float v : row) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap32(bits);
      }
      char bytes[4];
      std::memcpy(bytes, &bits, 4);
      data.append(bytes, 4);
    }
  }
  write_text(path, data);
}

void write_pfm(const fs::path &path, const Grid<> &grid) { write_pfm(path, ImageBuffer{{grid}}); }

ImageBuffer read_pfm(const fs::path &path) {
  const std::string data = read_text(path);
  std::istringstream in(data);
  std::string magic;
  long w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0.0) {
    throw ValidationError(path_string(path) + ": malformed PFM header");
  }
  const int channels = magic == "PF" ? 3 : 1;
  const std::size_t offset = std::size_t(in.tellg()) + 1;
  const std::size_t count = std::size_t(w) * std::size_t(h) * channels;
  if (data.size() < offset + 4 * count) {
    throw ValidationError(path_string(path) + ": truncated PFM data");
  }
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  ImageBuffer image = ImageBuffer::zeros(h, w, channels);
  const char *p = data.data() + offset;
  for (long r = h - 1; r >= 0; --r) {
    for (long c = 0; c < w; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        std::uint32_t bits;
        std::memcpy(&bits, p, 4);
        p += 4;
        if (swap) {
          bits = __builtin_bswap32(bits);
        }
        image.channels[ch](r, c) = double(std::bit_cast<float>(bits));
      }
    }
  }
  return image;
}

Grid<> read_pfm_grid(const fs::path &path) {
  ImageBuffer image = read_pfm(path);
  if (image.channel_count() != 1) {
    throw ValidationError(path_string(path) + ": expected a single-channel PFM");
  }
  return image.channels.front();
}

void write_png16(const fs::path &path, const ImageBuffer &image, double gamma) {
  const int channels = image.channel_count();
  if (channels != 1 && channels != 3) {
    throw ValidationError("write_png16: images must have 1 or 3 channels");
  }
  const int w = int(image.width()), h = int(image.height());
  std::vector<std::vector<png_byte>> rows(h, std::vector<png_byte>(std::size_t(w) * channels * 2));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        double v = std::clamp(image.channels[ch](r, c), 0.0, 1.0);
        if (gamma != 1.0) {
          v = std::pow(v, 1.0 / gamma);
        }
        const auto code = std::uint16_t(std::lround(v * 65535.0));
        const std::size_t i = (std::size_t(c) * channels + ch) * 2;
        rows[r][i] = png_byte(code >> 8);
        rows[r][i + 1] = png_byte(code & 0xff);
      }
    }
  }
  write_png_raw(path, w, h, channels, 16, rows);
}

void write_png8(const fs::path &path, const Grid<std::uint8_t> &values) {
  const int w = int(values.cols()), h = int(values.rows());
  std::vector<std::vector<png_byte>> rows(h, std::vector<png_byte>(w));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      rows[r][c] = values(r, c);
    }
  }
  write_png_raw(path, w, h, 1, 8, rows);
}

ImageBuffer read_png(const fs::path &path, double gamma) {
  PngReader rd;
  rd.file = std::fopen(path_string(path).c_str(), "rb");
  if (!rd.file) {
    throw ValidationError("cannot read " + path_string(path));
  }
  rd.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  rd.info = png_create_info_struct(rd.png);
  if (!rd.png || !rd.info || setjmp(png_jmpbuf(rd.png))) {
    throw ValidationError(path_string(path) + ": not a readable PNG");
  }
  png_init_io(rd.png, rd.file);
  png_read_info(rd.png, rd.info);
  png_set_expand(rd.png);
  png_set_strip_alpha(rd.png);
  png_read_update_info(rd.png, rd.info);
  const int w = int(png_get_image_width(rd.png, rd.info));
  const int h = int(png_get_image_height(rd.png, rd.info));
  const int depth = png_get_bit_depth(rd.png, rd.info);
  const int channels = png_get_channels(rd.png, rd.info);
  if (channels != 1 && channels != 3) {
    throw ValidationError(path_string(path) + ": unsupported PNG channel layout");
  }
  std::vector<png_byte> buffer(png_get_rowbytes(rd.png, rd.info) * std::size_t(h));
  std::vector<png_bytep> rows(h);
  for (int r = 0; r < h; ++r) {
    rows[r] = buffer.data() + std::size_t(r) * png_get_rowbytes(rd.png, rd.info);
  }
  png_read_image(rd.png, rows.data());
  ImageBuffer image = ImageBuffer::zeros(h, w, channels);
  const double max_code = depth == 16 ? 65535.0 : 255.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        const std::size_t i = std::size_t(c) * channels + ch;
        const double code = depth == 16 ? double((rows[r][2 * i] << 8) | rows[r][2 * i + 1]) : double(rows[r][i]);
        double v = code / max_code;
        if (gamma != 1.0) {
          v = std::pow(v, gamma);
        }
        image.channels[ch](r, c) = v;
      }
    }
  }
  return image;
}

Grid<std::uint8_t> read_png8(const fs::path &path) {
  const ImageBuffer image = read_png(path, 1.0);
  return (image.channels.front() * 255.0).round().cast<std::uint8_t>();
}

ImageBuffer read_image(const fs::path &path) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm" || ext == ".PFM") {
    return read_pfm(path);
  }
  if (ext == ".png" || ext == ".PNG") {
    return read_png(path, 2.2);
  }
  throw ValidationError(path_string(path) + ": unsupported image format (use .pfm or .png)");
}

json to_json(const DisplayConfig &config) {
  json depths = json::array();
  for (double z : config.plane_depths) {
    depths.push_back(depth_to_json(z));
  }
  return {{"d", config.d},
          {"u_m", config.u_m},
          {"lambda", config.lambda},
          {"slm_pitch", config.slm_pitch},
          {"display_pitch", config.display_pitch},
          {"n_x", config.n_x},
          {"n_y", config.n_y},
          {"plane_depths", depths}};
}

DisplayConfig config_from_json(const json &j) {
  if (!j.is_object()) {
    throw ValidationError("config: expected a JSON object");
  }
  DisplayConfig config;
  try {
    for (const auto &[key, value] : j.items()) {
      if (key == "d") {
        config.d = value.get<double>();
      } else if (key == "u_m") {
        config.u_m = value.get<double>();
      } else if (key == "lambda") {
        config.lambda = value.get<double>();
      } else if (key == "slm_pitch") {
        config.slm_pitch = value.get<double>();
      } else if (key == "display_pitch") {
        config.display_pitch = value.get<double>();
      } else if (key == "n_x") {
        config.n_x = value.get<Eigen::Index>();
      } else if (key == "n_y") {
        config.n_y = value.get<Eigen::Index>();
      } else if (key == "plane_depths") {
        config.plane_depths.clear();
        for (const auto &z : value) {
          config.plane_depths.push_back(depth_from_json(z));
        }
      } else {
        throw ValidationError("config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception &e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  validate(config);
  return config;
}

DisplayConfig load_config(const fs::path &path) { return config_from_json(read_json(path)); }

void save_config(const fs::path &path, const DisplayConfig &config) { write_json(path, to_json(config)); }

namespace {

SceneRGBD load_layer(const json &j, const fs::path &base, int channels, bool meters) {
  if (!j.contains("intensity") || !j.contains("depth")) {
    throw ValidationError("scene: layer needs \"intensity\" and \"depth\"");
  }
  SceneRGBD layer;
  const json &intensity = j.at("intensity");
  if (intensity.is_string()) {
    ImageBuffer image = read_image(base / intensity.get<std::string>());
    if (image.channel_count() == channels) {
      layer.intensity = image.channels;
    } else if (channels == 1) {
      layer.intensity = {image.luminance()};
    } else {
      throw ValidationError("scene: intensity image has the wrong channel count");
    }
  } else {
    for (const auto &file : intensity) {
      layer.intensity.push_back(read_image(base / file.get<std::string>()).luminance());
    }
  }
  if (int(layer.intensity.size()) != channels) {
    throw ValidationError("scene: expected " + std::to_string(channels) + " intensity channels");
  }
  layer.depth = read_image(base / j.at("depth").get<std::string>()).channels.front();
  if (meters) {
    layer.depth = layer.depth.inverse();
  }
  if (j.contains("coverage")) {
    layer.coverage = read_image(base / j.at("coverage").get<std::string>()).channels.front() != 0.0;
  } else {
    layer.coverage = Mask::Constant(layer.depth.rows(), layer.depth.cols(), true);
  }
  validate(layer);
  return layer;
}

} // namespace

LayeredScene load_scene(const fs::path &manifest) {
  const json j = read_json(manifest);
  const fs::path base = manifest.parent_path();
  try {
    const int channels = j.value("channels", 1);
    if (channels != 1 && channels != 3) {
      throw ValidationError("scene: channels must be 1 or 3");
    }
    const std::string units = j.value("depth_units", "diopters");
    if (units != "diopters" && units != "meters") {
      throw ValidationError("scene: depth_units must be \"diopters\" or \"meters\"");
    }
    LayeredScene scene;
    if (j.contains("layers")) {
      for (const auto &layer : j.at("layers")) {
        scene.layers.push_back(load_layer(layer, base, channels, units == "meters"));
      }
    } else {
      scene.layers.push_back(load_layer(j, base, channels, units == "meters"));
    }
    if (scene.layers.empty()) {
      throw ValidationError("scene: no layers");
    }
    return scene;
  } catch (const json::exception &e) {
    throw ValidationError(path_string(manifest) + ": " + e.what());
  }
}

void save_scene(const fs::path &dir, const LayeredScene &scene) {
  fs::create_directories(dir);
  json layers = json::array();
  for (std::size_t l = 0; l < scene.layers.size(); ++l) {
    const auto &layer = scene.layers[l];
    const std::string prefix = "layer" + std::to_string(l);
    json files = json::array();
    for (int ch = 0; ch < layer.channels(); ++ch) {
      const std::string name = prefix + "_intensity" + std::to_string(ch) + ".pfm";
      write_pfm(dir / name, layer.intensity[ch]);
      files.push_back(name);
    }
    write_pfm(dir / (prefix + "_depth.pfm"), layer.depth);
    write_pfm(dir / (prefix + "_coverage.pfm"), mask_to_grid(layer.coverage));
    layers.push_back(
        {{"intensity", files}, {"depth", prefix + "_depth.pfm"}, {"coverage", prefix + "_coverage.pfm"}});
  }
  write_json(dir / "scene.json", {{"channels", scene.layers.front().channels()},
                                  {"depth_units", "diopters"},
                                  {"layers", layers}});
}

void save_stack(const fs::path &dir, const FocalStack &stack) {
  fs::create_directories(dir);
  json planes = json::array();
  for (std::size_t i = 0; i < stack.planes.size(); ++i) {
    const auto &plane = stack.planes[i];
    const std::string prefix = "plane" + std::to_string(i);
    write_pfm(dir / (prefix + "_intensity.pfm"), ImageBuffer{plane.intensity});
    write_pfm(dir / (prefix + "_occupancy.pfm"), mask_to_grid(plane.occupancy));
    write_pfm(dir / (prefix + "_removed.pfm"), mask_to_grid(plane.removed));
    planes.push_back({{"depth", depth_to_json(plane.depth)}, {"prefix", prefix}});
  }
  write_json(dir / "stack.json", {{"channels", stack.channels()}, {"planes", planes}});
}

FocalStack load_stack(const fs::path &dir) {
  const json j = read_json(dir / "stack.json");
  FocalStack stack;
  try {
    for (const auto &p : j.at("planes")) {
      const std::string prefix = p.at("prefix").get<std::string>();
      FocalPlane plane;
      plane.depth = depth_from_json(p.at("depth"));
      plane.intensity = read_pfm(dir / (prefix + "_intensity.pfm")).channels;
      plane.occupancy = grid_to_mask(read_pfm_grid(dir / (prefix + "_occupancy.pfm")));
      plane.removed = grid_to_mask(read_pfm_grid(dir / (prefix + "_removed.pfm")));
      stack.planes.push_back(std::move(plane));
    }
  } catch (const json::exception &e) {
    throw ValidationError(path_string(dir / "stack.json") + ": " + e.what());
  }
  return stack;
}

void save_tilt_field(const fs::path &dir, const TiltField &field) {
  fs::create_directories(dir);
  json planes = json::array();
  for (std::size_t i = 0; i < field.planes.size(); ++i) {
    const auto &plane = field.planes[i];
    const std::string prefix = "plane" + std::to_string(i);
    write_pfm(dir / (prefix + "_tilt.pfm"), ImageBuffer{{plane.tilt_x, plane.tilt_y, Grid<>::Zero(plane.tilt_x.rows(), plane.tilt_x.cols())}});
    write_png8(dir / (prefix + "_flags.png"), plane.flags);
    planes.push_back({{"depth", depth_to_json(plane.depth)}, {"prefix", prefix}});
  }
  write_json(dir / "tilt.json", {{"infeasible_removed", field.infeasible_removed},
                                 {"counts",
                                  {{"untilted", field.count(TiltFlag::Untilted)},
                                   {"tilted", field.count(TiltFlag::Tilted)},
                                   {"infeasible", field.count(TiltFlag::Infeasible)},
                                   {"removed", field.count(TiltFlag::Removed)}}},
                                 {"planes", planes}});
}

TiltField load_tilt_field(const fs::path &dir) {
  const json j = read_json(dir / "tilt.json");
  TiltField field;
  try {
    field.infeasible_removed = j.at("infeasible_removed").get<bool>();
    for (const auto &p : j.at("planes")) {
      const std::string prefix = p.at("prefix").get<std::string>();
      TiltPlane plane;
      plane.depth = depth_from_json(p.at("depth"));
      const ImageBuffer tilt = read_pfm(dir / (prefix + "_tilt.pfm"));
      plane.tilt_x = tilt.channels[0];
      plane.tilt_y = tilt.channels[1];
      plane.flags = read_png8(dir / (prefix + "_flags.png"));
      field.planes.push_back(std::move(plane));
    }
  } catch (const json::exception &e) {
    throw ValidationError(path_string(dir / "tilt.json") + ": " + e.what());
  }
  return field;
}

void save_phase(const fs::path &dir, const std::vector<PhaseMap> &phases) {
  fs::create_directories(dir);
  json planes = json::array();
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string name = "plane" + std::to_string(i) + "_phase.pfm";
    write_pfm(dir / name, phases[i].phi);
    const auto violations = check_nyquist(phases[i]);
    planes.push_back({{"file", name},
                      {"pitch", phases[i].pitch},
                      {"wavelength", phases[i].wavelength},
                      {"nyquist_violations", violations.size()}});
  }
  write_json(dir / "phase.json", {{"planes", planes}});
}

std::vector<PhaseMap> load_phase(const fs::path &dir) {
  const json j = read_json(dir / "phase.json");
  std::vector<PhaseMap> out;
  try {
    for (const auto &p : j.at("planes")) {
      out.push_back({read_pfm_grid(dir / p.at("file").get<std::string>()), p.at("pitch").get<double>(),
                     p.at("wavelength").get<double>()});
    }
  } catch (const json::exception &e) {
    throw ValidationError(path_string(dir / "phase.json") + ": " + e.what());
  }
  return out;
}

std::string sha256_bytes(const std::string &bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  }
  return hex.str();
}

std::string sha256_file(const fs::path &path) { return sha256_bytes(read_text(path)); }

void write_metrics_csv(const fs::path &path, const std::vector<MetricsRow> &rows) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "scene,mode,pupil_offset_x_mm,pupil_offset_y_mm,focus_depth_m,psnr_db,ssim,pearson_r,leakage\n";
  for (const auto &row : rows) {
    out << row.scene << ',' << row.mode << ',' << row.pupil_offset.x() * 1e3 << ',' << row.pupil_offset.y() * 1e3
        << ',' << row.focus_depth << ',' << row.psnr_db << ',' << row.ssim << ',' << row.pearson_r << ','
        << row.leakage << '\n';
  }
  write_text(path, out.str());
}

void write_halo_csv(const fs::path &path, const HaloProfile &profile) {
  std::ostringstream out;
  out << std::setprecision(10) << "distance_px,mean_delta\n";
  for (std::size_t i = 0; i < profile.distance_px.size(); ++i) {
    out << profile.distance_px[i] << ',' << profile.mean_delta[i] << '\n';
  }
  write_text(path, out.str());
}

} // namespace conetilt
