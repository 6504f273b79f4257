#ifndef CONETILT_IO_HPP
#define CONETILT_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "conetilt/metrics.hpp"
#include "conetilt/phase.hpp"

namespace conetilt {

namespace fs = std::filesystem;

/// PFM, float32, little-endian, rows stored bottom-up. One channel ("Pf")
/// or three ("PF").
void write_pfm(const fs::path &path, const ImageBuffer &image);
void write_pfm(const fs::path &path, const Grid<> &grid);
/// Reads either byte order.
ImageBuffer read_pfm(const fs::path &path);
Grid<> read_pfm_grid(const fs::path &path);

/// 16-bit PNG, 1 or 3 channels. Values are clamped to [0, 1]; with
/// `gamma` != 1 they are encoded as v^(1/gamma).
void write_png16(const fs::path &path, const ImageBuffer &image, double gamma = 2.2);
/// 8-bit grayscale PNG of raw byte values.
void write_png8(const fs::path &path, const Grid<std::uint8_t> &values);
/// Any 8/16-bit gray or RGB(A) PNG, as [0, 1] values; `gamma` != 1 linearizes v^gamma.
ImageBuffer read_png(const fs::path &path, double gamma = 1.0);
Grid<std::uint8_t> read_png8(const fs::path &path);

/// Image by extension: .pfm linear, .png gamma-decoded with 2.2.
ImageBuffer read_image(const fs::path &path);

nlohmann::json to_json(const DisplayConfig &config);
DisplayConfig config_from_json(const nlohmann::json &j);
DisplayConfig load_config(const fs::path &path);
void save_config(const fs::path &path, const DisplayConfig &config);

/// Scene manifest: {"channels", "depth_units": "diopters"|"meters",
/// "layers": [{"intensity": file or [files], "depth": file, "coverage": file?}]}
/// or the fields of a single layer at the top level. Paths are relative to
/// the manifest.
LayeredScene load_scene(const fs::path &manifest);
void save_scene(const fs::path &dir, const LayeredScene &scene);

void save_stack(const fs::path &dir, const FocalStack &stack);
FocalStack load_stack(const fs::path &dir);

void save_tilt_field(const fs::path &dir, const TiltField &field);
TiltField load_tilt_field(const fs::path &dir);

void save_phase(const fs::path &dir, const std::vector<PhaseMap> &phases);
std::vector<PhaseMap> load_phase(const fs::path &dir);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path &path);
std::string sha256_bytes(const std::string &bytes);

void write_text(const fs::path &path, const std::string &text);
std::string read_text(const fs::path &path);

void write_metrics_csv(const fs::path &path, const std::vector<MetricsRow> &rows);
void write_halo_csv(const fs::path &path, const HaloProfile &profile);

} // namespace conetilt

#endif // CONETILT_IO_HPP
