#pragma once

// Robust point-to-point ICP against a VoxelMap, solved with Gauss-Newton
// under a left-multiplicative twist update T <- exp(delta) * T.

#include "georef/geom.hpp"
#include "georef/voxel_map.hpp"

#include <span>
#include <vector>

namespace georef {

enum class Kernel { kGemanMcClure, kTukey, kCauchy };

/// IRLS weight in [0, 1] for residual norm r >= 0 and width c > 0:
///   Geman-McClure  1 / (1 + r²/c²)²
///   Tukey          (1 - (r/c)²)² for r <= c, else 0
///   Cauchy         1 / (1 + (r/c)²)
double robust_weight(Kernel kernel, double r, double c);

/// Geman-McClure loss (r²/2) / (1 + r²/c²).
double geman_mcclure_loss(double r, double c);

struct RegistrationParams {
  double max_correspondence_dist = 6.0;
  double kernel_width = 1.0;
  int max_iterations = 30;
  double translation_epsilon = 1e-4;
  double rotation_epsilon = 1e-4;
};

struct RegistrationResult {
  Pose pose;
  /// Fraction of source points with a correspondence at the returned pose.
  double inlier_ratio = 0.0;
  int iterations = 0;
  bool converged = false;
  double final_cost = 0.0;
  /// False when too few correspondences or a degenerate system stopped the solve;
  /// `pose` is then the initial guess.
  bool valid = false;
};

struct Correspondence {
  Vec3 source;  // body frame
  Vec3 target;  // map frame
  double weight = 1.0;
};

struct NormalEquations {
  Mat6 hessian = Mat6::Zero();
  Vec6 gradient = Vec6::Zero();
  double cost = 0.0;
  std::size_t count = 0;
};

/// Accumulates H = Σ w JᵀJ, b = Σ w Jᵀr and cost = ½ Σ w |r|² for
/// r = T·source - target, J = dr/d(delta) at delta = 0 ordered (rho, theta).
NormalEquations build_normal_equations(std::span<const Correspondence> correspondences,
                                       const Pose& pose);

/// Point-to-point residual Jacobian [I, -hat(T·p)].
Eigen::Matrix<double, 3, 6> point_jacobian(const Pose& pose, const Vec3& source);

RegistrationResult icp_align(std::span<const Vec3> source, const VoxelMap& target,
                             const Pose& init, const RegistrationParams& params = {});

/// Fraction of source points whose transformed position has a map neighbor within max_dist.
double inlier_ratio(std::span<const Vec3> source, const VoxelMap& target, const Pose& pose,
                    double max_dist);

}  // namespace georef
