#include "conetilt/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "conetilt/generators.hpp"
#include "conetilt/io.hpp"
#include "conetilt/metrics.hpp"
#include "conetilt/phase.hpp"

namespace conetilt {

using nlohmann::json;

namespace {

std::string fixed(double v, const char *format = "%+.3f") {
  if (std::isinf(v)) {
    return "inf";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string camera_tag(double focus, const Vec2 &offset) {
  return "f" + fixed(focus, "%.3f") + "_o" + fixed(offset.x() * 1e3) + "_" + fixed(offset.y() * 1e3);
}

std::string render_name(RenderMode mode, double focus, const Vec2 &offset) {
  return to_string(mode) + "_" + camera_tag(focus, offset);
}

template <typename T> void hash_append(std::string &bytes, const T &value) {
  bytes.append(reinterpret_cast<const char *>(&value), sizeof(T));
}

std::string scene_digest(const LayeredScene &scene) {
  std::string bytes;
  for (const auto &layer : scene.layers) {
    hash_append(bytes, layer.rows());
    hash_append(bytes, layer.cols());
    for (const auto &ch : layer.intensity) {
      bytes.append(reinterpret_cast<const char *>(ch.data()), sizeof(double) * std::size_t(ch.size()));
    }
    bytes.append(reinterpret_cast<const char *>(layer.depth.data()), sizeof(double) * std::size_t(layer.depth.size()));
    for (Eigen::Index i = 0; i < layer.coverage.size(); ++i) {
      bytes.push_back(layer.coverage.data()[i] ? 1 : 0);
    }
  }
  return sha256_bytes(bytes);
}

// Combined hash of every regular file in a stage directory.
std::string directory_digest(const fs::path &dir) {
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::string bytes;
  for (const auto &f : files) {
    bytes += f.filename().string() + ":" + sha256_file(f) + "\n";
  }
  return sha256_bytes(bytes);
}

struct Context {
  const PipelineManifest &manifest;
  std::ostream &log;
  fs::path out;
  DisplayConfig config;
  LayeredScene scene;
  std::string scene_name;
  std::map<std::string, std::string> input_hashes;
  json outputs = json::object();
  json summary = json::object();

  void record(const fs::path &file, const std::string &stage, const std::vector<std::string> &inputs) {
    json in = json::object();
    for (const auto &name : inputs) {
      in[name] = input_hashes.at(name);
    }
    outputs[fs::relative(file, out).generic_string()] = {{"stage", stage}, {"sha256", sha256_file(file)}, {"inputs", in}};
  }

  void record_dir(const fs::path &dir, const std::string &stage, const std::vector<std::string> &inputs) {
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto &f : files) {
      record(f, stage, inputs);
    }
  }
};

bool wants(const PipelineManifest &m, const std::string &stage) {
  return std::find(m.stages.begin(), m.stages.end(), stage) != m.stages.end();
}

bool needs_tilt(const PipelineManifest &m) {
  return std::find(m.modes.begin(), m.modes.end(), RenderMode::ConeTilt) != m.modes.end();
}

std::vector<CameraView> cameras_for(const PipelineManifest &m, double focus) {
  std::vector<CameraView> out;
  for (const Vec2 &offset : m.pupil_offsets) {
    CameraView camera;
    camera.pupil_center = offset;
    camera.pupil_radius = m.pupil_radius;
    camera.focus_depth = focus;
    camera.samples_per_pixel = m.samples;
    out.push_back(camera);
  }
  return out;
}

FocalStack front_only(const FocalStack &stack, std::size_t &front) {
  front = stack.planes.size();
  for (std::size_t i = 0; i < stack.planes.size(); ++i) {
    if (stack.planes[i].occupancy.any()) {
      front = i;
      break;
    }
  }
  FocalStack out = stack;
  for (std::size_t i = 0; i < out.planes.size(); ++i) {
    if (i != front) {
      out.planes[i].occupancy.setConstant(false);
      for (auto &ch : out.planes[i].intensity) {
        ch.setZero();
      }
    }
  }
  return out;
}

Grid<std::uint8_t> flag_preview(const TiltPlane &plane) {
  return plane.flags.unaryExpr([](std::uint8_t f) { return std::uint8_t(std::min(255, 85 * int(f))); });
}

void stage_discretize(Context &ctx, FocalStack &stack) {
  DiscretizeOptions options;
  options.resample = true;
  stack = discretize_scene(ctx.scene, ctx.config, options);
  const fs::path dir = ctx.out / "stack";
  save_stack(dir, stack);
  ctx.record_dir(dir, "discretize", {"config", "scene"});
  json planes = json::array();
  for (const auto &plane : stack.planes) {
    planes.push_back(plane.occupancy.count());
  }
  ctx.summary["discretize"] = {{"occupied_pixels_per_plane", planes}};
}

void stage_tilt(Context &ctx, const FocalStack &stack, TiltField &field) {
  TiltOptions options;
  options.remove_infeasible = ctx.manifest.remove_infeasible;
  field = compute_tilt_field(stack, ctx.config, options);
  const fs::path dir = ctx.out / "tilt";
  save_tilt_field(dir, field);
  for (std::size_t i = 0; i < field.planes.size(); ++i) {
    write_png8(dir / ("plane" + std::to_string(i) + "_flags_preview.png"), flag_preview(field.planes[i]));
  }
  ctx.record_dir(dir, "tilt", {"config", "stack"});
  ctx.summary["tilt"] = {{"untilted", field.count(TiltFlag::Untilted)},
                         {"tilted", field.count(TiltFlag::Tilted)},
                         {"infeasible", field.count(TiltFlag::Infeasible)},
                         {"removed", field.count(TiltFlag::Removed)},
                         {"infeasible_removed", field.infeasible_removed}};
}

void stage_phase(Context &ctx, const TiltField &field) {
  const fs::path dir = ctx.out / "phase";
  std::vector<PhaseMap> phases;
  json planes = json::array();
  json audit = json::array();
  for (const auto &plane : field.planes) {
    SolverStats stats;
    phases.push_back(solve_phase(tilt_to_gradient_targets(plane, ctx.config), ctx.manifest.epsilon, ctx.config, {},
                                 &stats));
    const auto report = tilt_error_report(phases.back(), plane, 5, ctx.config);
    const auto violations = check_nyquist(phases.back());
    json listed = json::array();
    for (std::size_t k = 0; k < std::min<std::size_t>(violations.size(), 1000); ++k) {
      const auto &v = violations[k];
      listed.push_back({{"row", v.row}, {"col", v.col}, {"axis", v.axis == 0 ? "x" : "y"}, {"delta", v.delta}});
    }
    audit.push_back({{"depth", std::isinf(plane.depth) ? json("inf") : json(plane.depth)},
                     {"violations", violations.size()},
                     {"listed", listed}});
    planes.push_back({{"iterations", stats.iterations},
                      {"relative_residual", stats.relative_residual},
                      {"tilt_error_mean_all", report.mean_all},
                      {"tilt_error_mean_boundary", report.mean_boundary},
                      {"tilt_error_max", report.max},
                      {"nyquist_violations", violations.size()}});
  }
  save_phase(dir, phases);
  write_text(dir / "nyquist_audit.json", audit.dump(2) + "\n");
  ctx.record_dir(dir, "phase", {"config", "tilt"});
  ctx.summary["phase"] = {{"epsilon", ctx.manifest.epsilon}, {"planes", planes}};
}

void stage_render(Context &ctx, const FocalStack &stack, const TiltField *field) {
  const fs::path dir = ctx.out / "renders";
  fs::create_directories(dir);
  std::vector<std::string> inputs{"config", "stack"};
  if (field) {
    inputs.push_back("tilt");
  }
  json files = json::array();
  for (double focus : ctx.manifest.focus_depths) {
    const auto cameras = cameras_for(ctx.manifest, focus);
    CameraView base = cameras.front();
    base.pupil_center = Vec2::Zero();
    for (RenderMode mode : ctx.manifest.modes) {
      const auto images = viewpoint_sweep(stack, field, base, ctx.manifest.pupil_offsets, mode, ctx.manifest.seed,
                                          ctx.config);
      for (std::size_t k = 0; k < images.size(); ++k) {
        const std::string name = render_name(mode, focus, ctx.manifest.pupil_offsets[k]);
        write_pfm(dir / (name + ".pfm"), images[k]);
        write_png16(dir / (name + ".png"), images[k]);
        ctx.record(dir / (name + ".pfm"), "render", inputs);
        ctx.record(dir / (name + ".png"), "render", inputs);
        files.push_back(name + ".pfm");
      }
    }
  }
  ctx.summary["render"] = {{"images", files},
                           {"camera",
                            {{"pupil_radius_m", ctx.manifest.pupil_radius},
                             {"samples_per_pixel", ctx.manifest.samples},
                             {"sensor", {ctx.config.n_x, ctx.config.n_y}},
                             {"seed", ctx.manifest.seed}}}};
}

void stage_metrics(Context &ctx, const FocalStack &stack) {
  const fs::path render_dir = ctx.out / "renders";
  const fs::path dir = ctx.out / "metrics";
  fs::create_directories(dir);
  std::size_t front = 0;
  const FocalStack fg_stack = front_only(stack, front);
  const Mask fg_mask = front < stack.planes.size() ? stack.planes[front].occupancy : Mask();
  const bool has_mask = fg_mask.size() > 0 && fg_mask.count() >= 2;
  const bool has_edge = has_mask && !fg_mask.all();
  std::vector<MetricsRow> rows;
  for (double focus : ctx.manifest.focus_depths) {
    for (const auto &camera : cameras_for(ctx.manifest, focus)) {
      const std::string tag = camera_tag(focus, camera.pupil_center);
      const ImageBuffer reference = render_reality_reference(ctx.scene, camera, ctx.manifest.seed, ctx.config);
      write_pfm(dir / ("reference_" + tag + ".pfm"), reference);
      ctx.record(dir / ("reference_" + tag + ".pfm"), "metrics", {"config", "scene"});
      const ImageBuffer fg_only = render(fg_stack, nullptr, camera, RenderMode::Multifocal, ctx.manifest.seed, ctx.config);
      for (RenderMode mode : ctx.manifest.modes) {
        const std::string name = render_name(mode, focus, camera.pupil_center);
        const fs::path file = render_dir / (name + ".pfm");
        if (!fs::exists(file)) {
          throw ValidationError("missing render " + file.string() + " (run the render stage first)");
        }
        const ImageBuffer image = read_pfm(file);
        MetricsRow row;
        row.scene = ctx.scene_name;
        row.mode = to_string(mode);
        row.pupil_offset = camera.pupil_center;
        row.focus_depth = focus;
        row.psnr_db = psnr(image, reference);
        row.ssim = ssim(image, reference);
        if (has_mask) {
          row.pearson_r = contrast_scatter(fg_only, image, fg_mask).pearson_r;
          row.leakage = leakage_score(fg_only, image, fg_mask);
        }
        rows.push_back(row);
        if (has_edge) {
          const fs::path halo = dir / ("halo_" + name + ".csv");
          write_halo_csv(halo, halo_profile(image, fg_mask, reference));
          ctx.record(halo, "metrics", {"config", "scene", "stack"});
        }
      }
    }
  }
  write_metrics_csv(dir / "metrics.csv", rows);
  ctx.record(dir / "metrics.csv", "metrics", {"config", "scene", "stack"});
  ctx.summary["metrics"] = {{"rows", rows.size()}};
}

void load_scene_source(Context &ctx) {
  const auto &m = ctx.manifest;
  if (!m.generator.empty()) {
    GeneratedScene generated = generate_scene(m.generator, m.generator_params, ctx.config);
    ctx.config.plane_depths = generated.plane_depths;
    validate(ctx.config);
    ctx.scene = std::move(generated.scene);
    ctx.scene_name = m.generator;
    ctx.summary["generator"] = {{"name", m.generator}, {"params", generated.params}};
  } else {
    ctx.scene = load_scene(m.scene_path);
    ctx.scene_name = m.scene_path.stem().string();
  }
  ctx.input_hashes["scene"] = scene_digest(ctx.scene);
}

} // namespace

void validate(const PipelineManifest &m) {
  if (m.out_dir.empty()) {
    throw ValidationError("manifest: output directory required");
  }
  if (m.generator.empty() == m.scene_path.empty()) {
    throw ValidationError("manifest: give exactly one of a scene file or a generator");
  }
  if (m.stages.empty()) {
    throw ValidationError("manifest: empty stage list");
  }
  std::ptrdiff_t last = -1;
  for (const auto &stage : m.stages) {
    const auto it = std::find(kStageOrder.begin(), kStageOrder.end(), stage);
    if (it == kStageOrder.end()) {
      throw ValidationError("manifest: unknown stage '" + stage + "'");
    }
    const std::ptrdiff_t pos = it - kStageOrder.begin();
    if (pos <= last) {
      throw ValidationError("manifest: stages must follow discretize, tilt, phase, render, metrics");
    }
    last = pos;
  }
  if (m.modes.empty() || m.pupil_offsets.empty() || m.focus_depths.empty()) {
    throw ValidationError("manifest: modes, pupil offsets and focus depths must be non-empty");
  }
  if (m.samples < 1) {
    throw ValidationError("manifest: samples must be >= 1");
  }
  if (!(m.epsilon > 0.0)) {
    throw ValidationError("manifest: epsilon must be positive");
  }
}

json to_json(const PipelineManifest &m) {
  json modes = json::array(), offsets = json::array(), focus = json::array();
  for (RenderMode mode : m.modes) {
    modes.push_back(to_string(mode));
  }
  for (const Vec2 &o : m.pupil_offsets) {
    offsets.push_back({o.x() * 1e3, o.y() * 1e3});
  }
  for (double f : m.focus_depths) {
    focus.push_back(std::isinf(f) ? json("inf") : json(f));
  }
  json j = {{"config", m.config_path.string()},
            {"stages", m.stages},
            {"modes", modes},
            {"pupil_offsets_mm", offsets},
            {"focus_depths_m", focus},
            {"samples", m.samples},
            {"seed", m.seed},
            {"pupil_radius_m", m.pupil_radius},
            {"epsilon", m.epsilon},
            {"remove_infeasible", m.remove_infeasible}};
  if (m.generator.empty()) {
    j["scene"] = m.scene_path.string();
  } else {
    j["generator"] = {{"name", m.generator}, {"params", m.generator_params}};
  }
  return j;
}

int run_pipeline(const PipelineManifest &manifest, std::ostream &log) {
  std::string stage = "setup";
  try {
    validate(manifest);
    Context ctx{manifest, log, manifest.out_dir, {}, {}, {}, {}, json::object(), json::object()};
    fs::create_directories(ctx.out);
    ctx.config = manifest.config_path.empty() ? DisplayConfig{} : load_config(manifest.config_path);
    validate(ctx.config);
    load_scene_source(ctx);
    save_config(ctx.out / "config.json", ctx.config);
    ctx.input_hashes["config"] = sha256_file(ctx.out / "config.json");

    const fs::path manifest_file = ctx.out / "manifest.json";
    if (fs::exists(manifest_file)) {
      const json previous = json::parse(read_text(manifest_file), nullptr, false);
      if (previous.is_object() && previous.contains("outputs")) {
        ctx.outputs = previous["outputs"];
      }
    }

    FocalStack stack;
    TiltField field;
    bool have_field = false;

    stage = "discretize";
    if (wants(manifest, "discretize")) {
      log << "[discretize] " << ctx.scene_name << "\n";
      stage_discretize(ctx, stack);
    }
    // Later stages always consume the stored (float32) data, so running them
    // alone reproduces a full run byte for byte.
    stack = load_stack(ctx.out / "stack");
    ctx.input_hashes["stack"] = directory_digest(ctx.out / "stack");

    stage = "tilt";
    if (wants(manifest, "tilt")) {
      log << "[tilt] " << stack.planes.size() << " planes\n";
      stage_tilt(ctx, stack, field);
      field = load_tilt_field(ctx.out / "tilt");
      have_field = true;
    } else if (wants(manifest, "phase") || (wants(manifest, "render") && needs_tilt(manifest))) {
      field = load_tilt_field(ctx.out / "tilt");
      have_field = true;
    }
    if (have_field) {
      ctx.input_hashes["tilt"] = directory_digest(ctx.out / "tilt");
    }

    stage = "phase";
    if (wants(manifest, "phase")) {
      log << "[phase] epsilon " << manifest.epsilon << "\n";
      stage_phase(ctx, field);
    }

    stage = "render";
    if (wants(manifest, "render")) {
      log << "[render] " << manifest.modes.size() * manifest.pupil_offsets.size() * manifest.focus_depths.size()
          << " images\n";
      stage_render(ctx, stack, have_field ? &field : nullptr);
    }

    stage = "metrics";
    if (wants(manifest, "metrics")) {
      log << "[metrics]\n";
      stage_metrics(ctx, stack);
    }

    stage = "summary";
    json summary = {{"manifest", to_json(manifest)},
                    {"config", to_json(ctx.config)},
                    {"input_hashes", ctx.input_hashes},
                    {"stages", ctx.summary}};
    write_text(ctx.out / "summary.json", summary.dump(2) + "\n");
    write_text(manifest_file, json({{"manifest", to_json(manifest)}, {"outputs", ctx.outputs}}).dump(2) + "\n");
    return 0;
  } catch (const ValidationError &e) {
    log << "[" << stage << "] validation error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError &e) {
    log << "[" << stage << "] numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    log << "[" << stage << "] error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace conetilt
