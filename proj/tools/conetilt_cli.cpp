#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "conetilt/generators.hpp"
#include "conetilt/pipeline.hpp"

using namespace conetilt;

namespace {

Vec2 parse_offset_mm(const std::string &text) {
  const auto colon = text.find(':');
  try {
    std::size_t used = 0;
    if (colon == std::string::npos) {
      const double x = std::stod(text, &used);
      if (used != text.size()) {
        throw std::invalid_argument(text);
      }
      return {x * 1e-3, 0.0};
    }
    const std::string xs = text.substr(0, colon), ys = text.substr(colon + 1);
    const double x = std::stod(xs, &used);
    if (used != xs.size()) {
      throw std::invalid_argument(text);
    }
    const double y = std::stod(ys, &used);
    if (used != ys.size()) {
      throw std::invalid_argument(text);
    }
    return {x * 1e-3, y * 1e-3};
  } catch (const std::exception &) {
    throw ValidationError("bad pupil offset '" + text + "' (expected X or X:Y in mm)");
  }
}

double parse_depth(const std::string &text) {
  if (text == "inf") {
    return kInfinity;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) {
      return v;
    }
  } catch (const std::exception &) {
  }
  throw ValidationError("bad focus depth '" + text + "'");
}

nlohmann::json parse_gen_params(const std::vector<std::string> &items) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto &item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("bad --gen-param '" + item + "' (expected key=value)");
    }
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    const auto parsed = nlohmann::json::parse(value, nullptr, false);
    params[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
  }
  return params;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Occlusion-capable multifocal display simulator"};
  app.set_version_flag("--version", "conetilt 1.0");

  std::string config_path, scene_path, generator, out_dir;
  std::vector<std::string> stages = kStageOrder;
  std::vector<std::string> modes{"Reality", "Multifocal", "ConeTilt"};
  std::vector<std::string> offsets{"0"};
  std::vector<std::string> focus{"1.0"};
  std::vector<std::string> gen_params;
  int samples = 256;
  std::uint64_t seed = 1;
  double pupil_radius_mm = 0.15;
  double epsilon = 1e-3;
  bool remove_infeasible = false;
  bool list_generators = false;

  app.add_option("--config", config_path, "Display configuration JSON (defaults built in)")->check(CLI::ExistingFile);
  auto *scene_opt = app.add_option("--scene", scene_path, "Scene manifest JSON")->check(CLI::ExistingFile);
  auto *gen_opt = app.add_option("--generate", generator, "Procedural scene: occluder_text, leaf, chessboard, railing");
  scene_opt->excludes(gen_opt);
  app.add_option("--gen-param", gen_params, "Generator parameter key=value (repeatable)");
  app.add_option("--stages", stages, "Comma-separated subset of discretize,tilt,phase,render,metrics")
      ->delimiter(',');
  app.add_option("--mode", modes, "Render modes: Reality,Multifocal,MultifocalNoOccluded,ConeTilt")->delimiter(',');
  app.add_option("--pupil-offsets", offsets, "Pupil offsets in mm, X or X:Y, comma-separated")->delimiter(',');
  app.add_option("--focus", focus, "Camera focus depths in meters (or inf), comma-separated")->delimiter(',');
  app.add_option("--samples", samples, "Pupil samples per pixel")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Sampling seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--pupil-radius", pupil_radius_mm, "Camera pupil radius in mm")->check(CLI::NonNegativeNumber);
  app.add_option("--epsilon", epsilon, "Phase regularization weight")->check(CLI::PositiveNumber);
  app.add_flag("--remove-infeasible", remove_infeasible, "Drop pixels no tilt can clear instead of clamping");
  app.add_flag("--list-generators", list_generators, "Print the generator names and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (list_generators) {
    for (const auto &name : generator_names()) {
      std::cout << name << "\n";
    }
    return 0;
  }

  PipelineManifest manifest;
  try {
    manifest.config_path = config_path;
    manifest.scene_path = scene_path;
    manifest.generator = generator;
    manifest.generator_params = parse_gen_params(gen_params);
    manifest.out_dir = out_dir;
    manifest.stages = stages;
    manifest.modes.clear();
    for (const auto &m : modes) {
      manifest.modes.push_back(parse_render_mode(m));
    }
    manifest.pupil_offsets.clear();
    for (const auto &o : offsets) {
      manifest.pupil_offsets.push_back(parse_offset_mm(o));
    }
    manifest.focus_depths.clear();
    for (const auto &f : focus) {
      manifest.focus_depths.push_back(parse_depth(f));
    }
    manifest.samples = samples;
    manifest.seed = seed;
    manifest.pupil_radius = pupil_radius_mm * 1e-3;
    manifest.epsilon = epsilon;
    manifest.remove_infeasible = remove_infeasible;
  } catch (const ValidationError &e) {
    std::cerr << "[setup] validation error: " << e.what() << "\n";
    return 1;
  }
  return run_pipeline(manifest, std::cerr);
}
