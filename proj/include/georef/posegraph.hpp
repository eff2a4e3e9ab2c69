#pragma once

// Frame-by-frame robust pose fusion. One free pose x is pulled toward an
// absolute scan-to-map measurement (Tukey loss) and a relative scan-to-scan
// measurement anchored at the fixed previous pose (Cauchy loss):
//
//   min_x  ½ Σ_i k_i ρ_i(‖f_i(x)‖²)
//
// Losses act on the squared residual norm:
//   Tukey   ρ(s) = a²/3 (1 - (1 - s/a²)³) for s <= a², else a²/3
//   Cauchy  ρ(s) = a² ln(1 + s/a²)

#include "georef/geom.hpp"

#include <optional>

namespace georef {

struct AbsoluteConstraint {
  Pose measured;
  double width = 1.0;
  double scale = 1.0;
};

struct RelativeConstraint {
  Pose anchor;          // previous optimized pose, held fixed
  Pose measured_delta;  // anchor⁻¹ ∘ x as measured
  double width = 1.0;
  double scale = 1.0;
};

struct FrameOptimizerOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-10;
  /// Multiplies the rotational residual components; 1.0 mixes meters and radians as-is.
  double rotation_scale = 1.0;
};

struct FrameOptimizationResult {
  Pose pose;
  /// ρ'(s) at the solution, 0 when the constraint was absent.
  double absolute_weight = 0.0;
  double relative_weight = 0.0;
  double cost = 0.0;
  int iterations = 0;
  /// False when the iteration cap was hit; pose is then the best iterate.
  bool converged = false;
};

double tukey_loss(double s, double a);
double cauchy_loss(double s, double a);
/// dρ/ds.
double tukey_loss_derivative(double s, double a);
double cauchy_loss_derivative(double s, double a);

/// se3_log(z⁻¹ ∘ x).
Vec6 absolute_residual(const Pose& x, const Pose& z);
/// se3_log(z_delta⁻¹ ∘ (x_prev⁻¹ ∘ x)).
Vec6 relative_residual(const Pose& x_prev, const Pose& x, const Pose& z_delta);

/// Throws georef::Error when both constraints are absent.
FrameOptimizationResult optimize_frame(const Pose& x_init,
                                       const std::optional<AbsoluteConstraint>& abs,
                                       const std::optional<RelativeConstraint>& rel,
                                       const FrameOptimizerOptions& options = {});

}  // namespace georef
