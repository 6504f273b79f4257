#ifndef CONETILT_PHASE_HPP
#define CONETILT_PHASE_HPP

#include <vector>

#include "conetilt/tilt_field.hpp"

namespace conetilt {

/// SLM phase sampled at pixel corners: (n_y + 1) x (n_x + 1) nodes, radians.
struct PhaseMap {
  Grid<> phi;
  double pitch = 0.0;
  double wavelength = 0.0;
};

/// Per-pixel target phase gradient, radians per meter.
struct GradientField {
  Grid<> gx;
  Grid<> gy;
};

/// g = k * tilt with k = 2 pi / lambda.
GradientField tilt_to_gradient_targets(const TiltPlane &plane, const DisplayConfig &config);
GradientField tilt_to_gradient_targets(const Grid<> &tilt_x, const Grid<> &tilt_y, const DisplayConfig &config);

struct SolverOptions {
  double tolerance = 1e-10; ///< relative residual of the normal equations
  int max_iterations = 0;   ///< 0: 10 (n_x + n_y)
};

struct SolverStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Forward differences of the node grid scaled by 1/pitch: per pixel (r, c),
/// Dx = (phi(r, c+1) - phi(r, c)) / pitch and Dy = (phi(r, c) - phi(r+1, c)) / pitch
/// (y points up, rows go down).
GradientField phase_gradient(const Grid<> &phi, double pitch);

/// Minimizes |Dx phi - gx|^2 + |Dy phi - gy|^2 + epsilon |phi|^2 with
/// Jacobi-preconditioned conjugate gradients on the normal equations; the
/// result is gauge-fixed to zero mean. Throws NumericalError (carrying the
/// final residual) if the iteration cap is reached.
PhaseMap solve_phase(const GradientField &targets, double epsilon, const DisplayConfig &config,
                     const SolverOptions &options = {}, SolverStats *stats = nullptr);

/// The normal-equations operator (D^T D + epsilon I) applied to phi.
Grid<> apply_normal_operator(const Grid<> &phi, double epsilon, double pitch);

/// The objective value minimized by solve_phase.
double phase_objective(const Grid<> &phi, const GradientField &targets, double epsilon, double pitch);

/// One phase map per focal plane, solved from that plane's target tilts.
std::vector<PhaseMap> solve_phase_field(const TiltField &field, double epsilon, const DisplayConfig &config,
                                        const SolverOptions &options = {});

/// Tilt the phase actually produces, (1/k) D phi, on the solve's stencil.
TiltPlane realized_tilts(const PhaseMap &phase, const TiltPlane &reference);

struct NyquistViolation {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  int axis = 0; ///< 0: (row, col)-(row, col+1), 1: (row, col)-(row+1, col)
  double delta = 0.0;
};

/// Neighbor pairs whose phase difference exceeds pi (bound inclusive).
std::vector<NyquistViolation> check_nyquist(const PhaseMap &phase);

/// (phi + offset) mod 2 pi, in [0, 2 pi).
PhaseMap wrap_phase(const PhaseMap &phase, double global_offset);

struct TiltErrorReport {
  Grid<> error_map; ///< |realized - target|, radians
  double mean_all = 0.0;
  double mean_boundary = 0.0;
  double max = 0.0;
  int boundary_band_px = 5;
};

TiltErrorReport tilt_error_report(const PhaseMap &phase, const TiltPlane &field, int band_px,
                                  const DisplayConfig &config);

} // namespace conetilt

#endif // CONETILT_PHASE_HPP
