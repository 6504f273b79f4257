#include "conetilt/phase.hpp"

#include <cmath>
#include <numbers>

#include "conetilt/distance_transform.hpp"

namespace conetilt {

namespace {

// Unit-spacing difference operator D and its adjoint on the node grid.
void unit_gradient(const Grid<> &phi, Grid<> &ex, Grid<> &ey) {
  const Eigen::Index ny = phi.rows() - 1, nx = phi.cols() - 1;
  ex = phi.block(0, 1, ny, nx) - phi.block(0, 0, ny, nx);
  ey = phi.block(0, 0, ny, nx) - phi.block(1, 0, ny, nx);
}

void unit_adjoint(const Grid<> &ex, const Grid<> &ey, Grid<> &out) {
  const Eigen::Index ny = ex.rows(), nx = ex.cols();
  out.setZero(ny + 1, nx + 1);
  out.block(0, 1, ny, nx) += ex;
  out.block(0, 0, ny, nx) -= ex;
  out.block(0, 0, ny, nx) += ey;
  out.block(1, 0, ny, nx) -= ey;
}

// Scaled system: (D^T D + epsilon pitch^2 I) phi = D^T (pitch g).
Grid<> apply_scaled(const Grid<> &phi, double shift) {
  Grid<> ex, ey, out;
  unit_gradient(phi, ex, ey);
  unit_adjoint(ex, ey, out);
  out += shift * phi;
  return out;
}

double dot(const Grid<> &a, const Grid<> &b) { return (a * b).sum(); }

// The bottom-right node touches no edge; its exact value is 0. The rest of
// the grid is connected, and the exact solution is mean-free there because b
// is. Both near-null modes (eigenvalue `shift`) are projected out so rounding
// cannot grow along them.
void project(Grid<> &v) {
  const Eigen::Index rr = v.rows() - 1, cc = v.cols() - 1;
  v(rr, cc) = 0.0;
  v -= v.sum() / double(v.size() - 1);
  v(rr, cc) = 0.0;
}

} // namespace

GradientField tilt_to_gradient_targets(const Grid<> &tilt_x, const Grid<> &tilt_y, const DisplayConfig &config) {
  const double k = config.wave_number();
  return {k * tilt_x, k * tilt_y};
}

GradientField tilt_to_gradient_targets(const TiltPlane &plane, const DisplayConfig &config) {
  return tilt_to_gradient_targets(plane.tilt_x, plane.tilt_y, config);
}

GradientField phase_gradient(const Grid<> &phi, double pitch) {
  GradientField g;
  unit_gradient(phi, g.gx, g.gy);
  g.gx /= pitch;
  g.gy /= pitch;
  return g;
}

Grid<> apply_normal_operator(const Grid<> &phi, double epsilon, double pitch) {
  return apply_scaled(phi, epsilon * pitch * pitch) / (pitch * pitch);
}

double phase_objective(const Grid<> &phi, const GradientField &targets, double epsilon, double pitch) {
  const GradientField g = phase_gradient(phi, pitch);
  return (g.gx - targets.gx).square().sum() + (g.gy - targets.gy).square().sum() + epsilon * phi.square().sum();
}

PhaseMap solve_phase(const GradientField &targets, double epsilon, const DisplayConfig &config,
                     const SolverOptions &options, SolverStats *stats) {
  if (!(epsilon > 0.0)) {
    throw ValidationError("solve_phase: epsilon must be positive");
  }
  if (targets.gx.rows() != targets.gy.rows() || targets.gx.cols() != targets.gy.cols()) {
    throw ValidationError("solve_phase: gradient components differ in size");
  }
  if (!targets.gx.allFinite() || !targets.gy.allFinite()) {
    throw ValidationError("solve_phase: non-finite gradient targets");
  }
  const double pitch = config.slm_pitch;
  const Eigen::Index ny = targets.gx.rows(), nx = targets.gx.cols();
  const double shift = epsilon * pitch * pitch;
  const int max_iterations = options.max_iterations > 0 ? options.max_iterations : int(10 * (nx + ny));

  Grid<> b;
  unit_adjoint(pitch * targets.gx, pitch * targets.gy, b);
  // Jacobi preconditioner: node degree in the edge graph plus the shift.
  Grid<> diagonal = Grid<>::Constant(ny + 1, nx + 1, shift);
  diagonal.block(0, 1, ny, nx) += 1.0;
  diagonal.block(0, 0, ny, nx) += 2.0;
  diagonal.block(1, 0, ny, nx) += 1.0;

  PhaseMap result{Grid<>::Zero(ny + 1, nx + 1), pitch, config.lambda};
  const double b_norm = std::sqrt(dot(b, b));
  SolverStats local;
  if (b_norm == 0.0) {
    if (stats) {
      *stats = local;
    }
    return result;
  }
  Grid<> &x = result.phi;
  Grid<> r = b;
  project(r);
  Grid<> z = r / diagonal;
  project(z);
  Grid<> p = z;
  double rz = dot(r, z);
  double residual = 1.0;
  int iteration = 0;
  for (; iteration < max_iterations; ++iteration) {
    const Grid<> ap = apply_scaled(p, shift);
    const double alpha = rz / dot(p, ap);
    x += alpha * p;
    r -= alpha * ap;
    project(r);
    residual = std::sqrt(dot(r, r)) / b_norm;
    if (residual <= options.tolerance) {
      ++iteration;
      break;
    }
    z = r / diagonal;
    project(z);
    const double rz_next = dot(r, z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  local.iterations = iteration;
  local.relative_residual = residual;
  if (stats) {
    *stats = local;
  }
  if (residual > options.tolerance) {
    throw NumericalError("solve_phase: conjugate gradients did not converge in " + std::to_string(max_iterations) +
                             " iterations (relative residual " + std::to_string(residual) + ")",
                         residual);
  }
  project(x);
  return result;
}

std::vector<PhaseMap> solve_phase_field(const TiltField &field, double epsilon, const DisplayConfig &config,
                                        const SolverOptions &options) {
  std::vector<PhaseMap> out;
  for (const auto &plane : field.planes) {
    out.push_back(solve_phase(tilt_to_gradient_targets(plane, config), epsilon, config, options));
  }
  return out;
}

TiltPlane realized_tilts(const PhaseMap &phase, const TiltPlane &reference) {
  const double k = 2.0 * std::numbers::pi / phase.wavelength;
  const GradientField g = phase_gradient(phase.phi, phase.pitch);
  TiltPlane out = reference;
  out.tilt_x = g.gx / k;
  out.tilt_y = g.gy / k;
  return out;
}

std::vector<NyquistViolation> check_nyquist(const PhaseMap &phase) {
  constexpr double bound = std::numbers::pi * (1.0 + 1e-12);
  std::vector<NyquistViolation> out;
  const auto &phi = phase.phi;
  for (Eigen::Index r = 0; r < phi.rows(); ++r) {
    for (Eigen::Index c = 0; c < phi.cols(); ++c) {
      if (c + 1 < phi.cols()) {
        const double delta = phi(r, c + 1) - phi(r, c);
        if (std::abs(delta) > bound) {
          out.push_back({r, c, 0, delta});
        }
      }
      if (r + 1 < phi.rows()) {
        const double delta = phi(r + 1, c) - phi(r, c);
        if (std::abs(delta) > bound) {
          out.push_back({r, c, 1, delta});
        }
      }
    }
  }
  return out;
}

PhaseMap wrap_phase(const PhaseMap &phase, double global_offset) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  PhaseMap out = phase;
  out.phi = (phase.phi + global_offset).unaryExpr([](double v) {
    const double w = std::fmod(v, two_pi);
    return w < 0.0 ? w + two_pi : w;
  });
  return out;
}

TiltErrorReport tilt_error_report(const PhaseMap &phase, const TiltPlane &field, int band_px,
                                  const DisplayConfig &config) {
  if (phase.phi.rows() != field.tilt_x.rows() + 1 || phase.phi.cols() != field.tilt_x.cols() + 1) {
    throw ValidationError("tilt_error_report: phase and tilt field dimensions differ");
  }
  (void)config;
  const TiltPlane realized = realized_tilts(phase, field);
  TiltErrorReport report;
  report.boundary_band_px = band_px;
  report.error_map = ((realized.tilt_x - field.tilt_x).square() + (realized.tilt_y - field.tilt_y).square()).sqrt();
  report.mean_all = report.error_map.mean();
  report.max = report.error_map.maxCoeff();

  const Mask boundary = flag_boundary(field);
  if (boundary.any()) {
    const Grid<> dist = squared_distance_transform<double>(boundary);
    const Mask band = dist <= double(band_px) * double(band_px);
    double sum = 0.0;
    long count = 0;
    for (Eigen::Index r = 0; r < band.rows(); ++r) {
      for (Eigen::Index c = 0; c < band.cols(); ++c) {
        if (band(r, c)) {
          sum += report.error_map(r, c);
          ++count;
        }
      }
    }
    report.mean_boundary = sum / double(count);
  }
  return report;
}

} // namespace conetilt
