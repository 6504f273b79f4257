#include <doctest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "conetilt/io.hpp"
#include "conetilt/pipeline.hpp"

using namespace conetilt;
using nlohmann::json;

namespace {

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &tag) {
    static int counter = 0;
    path = fs::temp_directory_path() / ("conetilt_" + tag + "_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path small_config_file(const fs::path &dir) {
  save_config(dir / "config.json", oracle::small_config(64));
  return dir / "config.json";
}

PipelineManifest small_run(const fs::path &dir) {
  PipelineManifest m;
  m.config_path = small_config_file(dir);
  m.generator = "occluder_text";
  m.generator_params = {{"disc_radius_px", 15}};
  m.out_dir = dir / "out";
  m.pupil_offsets = {{-0.5e-3, 0.0}, {0.5e-3, 0.0}};
  m.samples = 16;
  return m;
}

std::map<std::string, std::string> output_hashes(const fs::path &out) {
  const json j = json::parse(read_text(out / "manifest.json"));
  std::map<std::string, std::string> hashes;
  for (const auto &[file, entry] : j["outputs"].items()) {
    hashes[file] = entry["sha256"];
  }
  return hashes;
}

} // namespace

TEST_SUITE("cli_pipeline") {

TEST_CASE("SHA-256 of known strings") {
  CHECK(sha256_bytes("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_bytes("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  TempDir tmp("sha");
  write_text(tmp.path / "abc.txt", "abc");
  CHECK(sha256_file(tmp.path / "abc.txt") == sha256_bytes("abc"));
}

TEST_CASE("PFM round trip and byte order") {
  TempDir tmp("pfm");
  ImageBuffer rgb = ImageBuffer::zeros(3, 5, 3);
  for (int ch = 0; ch < 3; ++ch) {
    for (Eigen::Index i = 0; i < 15; ++i) {
      rgb.channels[ch].data()[i] = 0.1 * double(ch) + 0.01 * double(i);
    }
  }
  write_pfm(tmp.path / "rgb.pfm", rgb);
  const ImageBuffer back = read_pfm(tmp.path / "rgb.pfm");
  REQUIRE(back.channel_count() == 3);
  REQUIRE(back.height() == 3);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK((back.channels[ch] - rgb.channels[ch]).abs().maxCoeff() < 1e-7);
  }
  const std::string header = read_text(tmp.path / "rgb.pfm").substr(0, 11);
  CHECK(header == "PF\n5 3\n-1.0");

  // Hand-built big-endian file: 2 x 1, values 1 and 2, bottom row first.
  std::string bytes = "Pf\n2 1\n1.0\n";
  for (float v : {1.0f, 2.0f}) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    for (int k = 3; k >= 0; --k) {
      bytes.push_back(char((u >> (8 * k)) & 0xff));
    }
  }
  write_text(tmp.path / "be.pfm", bytes);
  const Grid<> g = read_pfm_grid(tmp.path / "be.pfm");
  REQUIRE(g.cols() == 2);
  CHECK(g(0, 0) == 1.0);
  CHECK(g(0, 1) == 2.0);

  // Rows are stored bottom-up.
  Grid<> two(2, 1);
  two << 3.0, 4.0;
  write_pfm(tmp.path / "rows.pfm", two);
  const std::string raw = read_text(tmp.path / "rows.pfm");
  float first;
  std::memcpy(&first, raw.data() + raw.size() - 8, 4);
  CHECK(first == 4.0f);
  write_text(tmp.path / "bad.pfm", "P5\n1 1\n255\n");
  CHECK_THROWS_AS(read_pfm(tmp.path / "bad.pfm"), ValidationError);
}

TEST_CASE("PNG round trips") {
  TempDir tmp("png");
  ImageBuffer img = ImageBuffer::zeros(4, 6, 1);
  for (Eigen::Index i = 0; i < 24; ++i) {
    img.channels[0].data()[i] = double(i) / 23.0;
  }
  write_png16(tmp.path / "lin.png", img, 1.0);
  CHECK((read_png(tmp.path / "lin.png").channels[0] - img.channels[0]).abs().maxCoeff() <= 0.5 / 65535.0 + 1e-12);
  write_png16(tmp.path / "gamma.png", img);
  CHECK((read_image(tmp.path / "gamma.png").channels[0] - img.channels[0]).abs().maxCoeff() < 1e-3);
  Grid<std::uint8_t> bytes(2, 3);
  bytes << 0, 85, 170, 255, 1, 2;
  write_png8(tmp.path / "b.png", bytes);
  CHECK((read_png8(tmp.path / "b.png") == bytes).all());
}

TEST_CASE("config JSON round trip and validation") {
  TempDir tmp("cfg");
  DisplayConfig c = oracle::small_config(32, {0.25, 0.5, kInfinity});
  c.u_m = 0.015;
  save_config(tmp.path / "c.json", c);
  const json j = json::parse(read_text(tmp.path / "c.json"));
  CHECK(j["plane_depths"][2] == "inf");
  const DisplayConfig back = load_config(tmp.path / "c.json");
  CHECK(back.u_m == c.u_m);
  CHECK(back.n_x == 32);
  CHECK(std::isinf(back.plane_depths[2]));
  CHECK_THROWS_AS(config_from_json({{"d", 0.058}, {"colour", 1}}), ValidationError);
  CHECK_THROWS_AS(config_from_json({{"u_m", "wide"}}), ValidationError);
  CHECK_THROWS_AS(load_config(tmp.path / "missing.json"), ValidationError);
}

TEST_CASE("scene, stack, tilt and phase files round trip") {
  TempDir tmp("stages");
  const DisplayConfig config = oracle::small_config(32);
  const GeneratedScene g = generate_scene("occluder_text", {{"disc_radius_px", 8}}, config);
  save_scene(tmp.path / "scene", g.scene);
  const LayeredScene scene = load_scene(tmp.path / "scene" / "scene.json");
  REQUIRE(scene.layers.size() == g.scene.layers.size());
  for (std::size_t l = 0; l < scene.layers.size(); ++l) {
    CHECK((scene.layers[l].depth - g.scene.layers[l].depth).abs().maxCoeff() < 1e-6);
    CHECK((scene.layers[l].intensity[0] - g.scene.layers[l].intensity[0]).abs().maxCoeff() < 1e-7);
    CHECK((scene.layers[l].coverage == g.scene.layers[l].coverage).all());
  }

  const FocalStack stack = remove_fully_occluded(discretize_scene(g.scene, config), config);
  save_stack(tmp.path / "stack", stack);
  const FocalStack s2 = load_stack(tmp.path / "stack");
  REQUIRE(s2.planes.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(s2.planes[i].depth == stack.planes[i].depth);
    CHECK((s2.planes[i].occupancy == stack.planes[i].occupancy).all());
    CHECK((s2.planes[i].removed == stack.planes[i].removed).all());
    CHECK((s2.planes[i].intensity[0] - stack.planes[i].intensity[0]).abs().maxCoeff() < 1e-7);
  }

  TiltOptions options;
  options.remove_infeasible = true;
  const TiltField field = compute_tilt_field(stack, config, options);
  save_tilt_field(tmp.path / "tilt", field);
  const TiltField f2 = load_tilt_field(tmp.path / "tilt");
  CHECK(f2.infeasible_removed);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((f2.planes[i].flags == field.planes[i].flags).all());
    CHECK((f2.planes[i].tilt_x - field.planes[i].tilt_x).abs().maxCoeff() < 1e-9);
    CHECK((f2.planes[i].tilt_y - field.planes[i].tilt_y).abs().maxCoeff() < 1e-9);
  }

  const auto phases = solve_phase_field(field, 1e-3, config);
  save_phase(tmp.path / "phase", phases);
  const auto p2 = load_phase(tmp.path / "phase");
  REQUIRE(p2.size() == 2);
  CHECK(p2[1].pitch == phases[1].pitch);
  CHECK(p2[1].wavelength == phases[1].wavelength);
  CHECK((p2[1].phi - phases[1].phi).abs().maxCoeff() <= 1e-6 * (1.0 + phases[1].phi.abs().maxCoeff()));
}

TEST_CASE("scene manifests in meters and diopters") {
  TempDir tmp("manifest");
  Grid<> depth_m = Grid<>::Constant(4, 4, 0.5);
  write_pfm(tmp.path / "depth.pfm", depth_m);
  write_pfm(tmp.path / "rgb.pfm", Grid<>::Constant(4, 4, 0.25));
  write_text(tmp.path / "m.json", R"({"channels": 1, "depth_units": "meters", "intensity": "rgb.pfm", "depth": "depth.pfm"})");
  const LayeredScene s = load_scene(tmp.path / "m.json");
  REQUIRE(s.layers.size() == 1);
  CHECK(s.layers[0].depth(1, 1) == doctest::Approx(2.0));
  CHECK(s.layers[0].coverage.all());
  write_text(tmp.path / "bad.json", R"({"channels": 1, "depth_units": "furlongs", "intensity": "rgb.pfm", "depth": "depth.pfm"})");
  CHECK_THROWS_AS(load_scene(tmp.path / "bad.json"), ValidationError);
  write_text(tmp.path / "missing.json", R"({"channels": 1, "intensity": "nope.pfm", "depth": "depth.pfm"})");
  CHECK_THROWS_AS(load_scene(tmp.path / "missing.json"), ValidationError);
}

TEST_CASE("CSV writers") {
  TempDir tmp("csv");
  MetricsRow row;
  row.scene = "leaf";
  row.mode = "ConeTilt";
  row.pupil_offset = {0.5e-3, 0.0};
  row.focus_depth = 1.0;
  row.psnr_db = 30.5;
  row.ssim = 0.9;
  row.pearson_r = 0.99;
  row.leakage = 0.01;
  write_metrics_csv(tmp.path / "m.csv", {row});
  std::istringstream in(read_text(tmp.path / "m.csv"));
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(header == "scene,mode,pupil_offset_x_mm,pupil_offset_y_mm,focus_depth_m,psnr_db,ssim,pearson_r,leakage");
  CHECK(line.rfind("leaf,ConeTilt,0.5", 0) == 0);
  HaloProfile h{{-0.5, 0.5}, {0.1, 0.2}, {3, 4}};
  write_halo_csv(tmp.path / "h.csv", h);
  CHECK(read_text(tmp.path / "h.csv").rfind("distance_px,mean_delta\n", 0) == 0);
}

TEST_CASE("generators") {
  const DisplayConfig config = oracle::small_config(256);
  CHECK(generator_names() == std::vector<std::string>{"occluder_text", "leaf", "chessboard", "railing"});
  for (const auto &name : generator_names()) {
    const GeneratedScene g = generate_scene(name, json::object(), config);
    CAPTURE(name);
    CHECK(g.name == name);
    CHECK(std::is_sorted(g.plane_depths.begin(), g.plane_depths.end()));
    for (const auto &layer : g.scene.layers) {
      CHECK_NOTHROW(validate(layer));
      CHECK(layer.rows() == 256);
    }
    DisplayConfig c = config;
    c.plane_depths = g.plane_depths;
    const FocalStack stack = discretize_scene(g.scene, c);
    for (const auto &[mask_name, mask] : g.masks) {
      CHECK(mask.rows() == 256);
      CHECK(mask.any());
    }
    CHECK(stack.planes.front().occupancy.any());
  }
  const GeneratedScene text = generate_scene("occluder_text", json::object(), config);
  CHECK(text.masks.at("occluder").count() == oracle::disc_mask(256, 60.0).count());
  // The glyph band is partly hidden behind the disc and partly visible.
  const Mask &glyphs = text.masks.at("glyphs");
  CHECK((glyphs && text.masks.at("occluder")).any());
  CHECK((glyphs && !text.masks.at("occluder")).any());

  const GeneratedScene chess = generate_scene("chessboard", json::object(), config);
  CHECK(chess.plane_depths.size() == 40);
  CHECK(chess.plane_depths.front() == doctest::Approx(0.25));
  CHECK(std::isinf(chess.plane_depths.back()));

  for (double factor : {0.5, 2.0}) {
    const GeneratedScene rail = generate_scene("railing", {{"spacing_factor", factor}}, config);
    const double expected = factor * min_occluder_separation(0.25, 1.0, config);
    CHECK(rail.params["gap_px"].get<double>() == doctest::Approx(expected));
    // Every run of gap columns on one row is as wide as the gap, to a pixel.
    const auto row = rail.masks.at("gaps").row(128);
    int run = 0;
    for (Eigen::Index c = 0; c <= 256; ++c) {
      if (c < 256 && row(c)) {
        ++run;
      } else if (run > 0) {
        CHECK(std::abs(double(run) - expected) <= 1.0);
        run = 0;
      }
    }
  }
  CHECK_THROWS_AS(generate_scene("teapot", json::object(), config), ValidationError);
  CHECK_THROWS_AS(generate_scene("leaf", {{"petals", 5}}, config), ValidationError);
  CHECK_THROWS_AS(generate_scene("railing", {{"spacing_factor", "wide"}}, config), ValidationError);
}

TEST_CASE("manifest validation") {
  PipelineManifest m;
  m.generator = "leaf";
  m.out_dir = "x";
  CHECK_NOTHROW(validate(m));
  PipelineManifest bad = m;
  bad.stages = {"tilt", "discretize"};
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = m;
  bad.stages = {"discretize", "paint"};
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = m;
  bad.scene_path = "scene.json";
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = m;
  bad.generator.clear();
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = m;
  bad.out_dir.clear();
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = m;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = m;
  bad.focus_depths.clear();
  CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("full pipeline run, rerun and partial rerun") {
  TempDir tmp("pipeline");
  const PipelineManifest m = small_run(tmp.path);
  std::ostringstream log;
  REQUIRE(run_pipeline(m, log) == 0);
  const fs::path out = m.out_dir;
  for (const char *sub : {"stack", "tilt", "phase", "renders", "metrics"}) {
    CHECK(fs::is_directory(out / sub));
  }
  int renders = 0;
  for (const auto &entry : fs::directory_iterator(out / "renders")) {
    renders += entry.path().extension() == ".pfm";
  }
  CHECK(renders == 6);
  CHECK(fs::exists(out / "renders" / "ConeTilt_f1.000_o+0.500_+0.000.pfm"));
  CHECK(fs::exists(out / "phase" / "nyquist_audit.json"));

  std::istringstream csv(read_text(out / "metrics" / "metrics.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) {
    ++lines;
  }
  CHECK(lines == 7);

  const json summary = json::parse(read_text(out / "summary.json"));
  CHECK(summary["stages"]["render"]["camera"]["samples_per_pixel"] == 16);
  CHECK(summary["stages"]["tilt"]["tilted"].get<long>() > 0);

  const auto first = output_hashes(out);
  CHECK(first.size() > 20);
  for (const auto &[file, hash] : first) {
    CHECK(sha256_file(out / file) == hash);
  }

  // Byte-identical rerun.
  REQUIRE(run_pipeline(m, log) == 0);
  CHECK(output_hashes(out) == first);

  // Later stages alone reuse the stored stack and tilt field.
  PipelineManifest partial = m;
  partial.stages = {"render", "metrics"};
  REQUIRE(run_pipeline(partial, log) == 0);
  CHECK(output_hashes(out) == first);

  // Reality renders of plane-aligned layers match the reference exactly.
  const ImageBuffer reality = read_pfm(out / "renders" / "Reality_f1.000_o+0.500_+0.000.pfm");
  const ImageBuffer reference = read_pfm(out / "metrics" / "reference_f1.000_o+0.500_+0.000.pfm");
  CHECK(psnr(reality, reference) == kPsnrCap);
}

TEST_CASE("pipeline failures map to exit codes") {
  TempDir tmp("fail");
  std::ostringstream log;
  PipelineManifest m = small_run(tmp.path);
  m.stages = {"tilt", "discretize"};
  CHECK(run_pipeline(m, log) == 1);
  CHECK(log.str().find("[setup] validation error") != std::string::npos);

  // Tilt stage without a stored stack.
  m = small_run(tmp.path);
  m.out_dir = tmp.path / "empty";
  m.stages = {"tilt"};
  CHECK(run_pipeline(m, log) == 1);

  m = small_run(tmp.path);
  m.generator = "teapot";
  CHECK(run_pipeline(m, log) == 1);

  m = small_run(tmp.path);
  m.pupil_offsets = {{2e-3, 0.0}};
  CHECK(run_pipeline(m, log) == 1);
  CHECK(log.str().find("eyebox") != std::string::npos);

  // Configuration beyond the phase-wrap bound.
  DisplayConfig wide = oracle::small_config(64);
  wide.u_m = 0.05;
  save_config(tmp.path / "wide.json", wide);
  m = small_run(tmp.path);
  m.config_path = tmp.path / "wide.json";
  CHECK(run_pipeline(m, log) == 1);
}

} // TEST_SUITE
