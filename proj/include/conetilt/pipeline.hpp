#ifndef CONETILT_PIPELINE_HPP
#define CONETILT_PIPELINE_HPP

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "conetilt/render.hpp"

namespace conetilt {

inline const std::vector<std::string> kStageOrder{"discretize", "tilt", "phase", "render", "metrics"};

struct PipelineManifest {
  std::filesystem::path config_path;  ///< empty: built-in defaults
  std::filesystem::path scene_path;   ///< scene manifest JSON, or
  std::string generator;              ///< generator name
  nlohmann::json generator_params = nlohmann::json::object();
  std::filesystem::path out_dir;
  std::vector<std::string> stages = kStageOrder;
  std::vector<RenderMode> modes{RenderMode::Reality, RenderMode::Multifocal, RenderMode::ConeTilt};
  std::vector<Vec2> pupil_offsets{Vec2::Zero()}; ///< meters
  std::vector<double> focus_depths{1.0};         ///< meters
  int samples = 256;
  std::uint64_t seed = 1;
  double pupil_radius = 0.15e-3;
  double epsilon = 1e-3;
  bool remove_infeasible = false;
};

/// Throws ValidationError for an unknown or out-of-order stage list, a
/// missing or doubled scene source, or an empty output directory.
void validate(const PipelineManifest &manifest);

nlohmann::json to_json(const PipelineManifest &manifest);

/// Runs the requested stages in order. Stages that are not requested but
/// needed downstream are loaded from the output directory. Returns the
/// process exit code: 0 success, 1 validation failure, 2 numerical failure;
/// diagnostics (tagged with the failing stage) go to `log`.
int run_pipeline(const PipelineManifest &manifest, std::ostream &log);

} // namespace conetilt

#endif // CONETILT_PIPELINE_HPP
