#include "georef/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace georef {

namespace {

constexpr std::size_t kMinCorrespondences = 6;
constexpr double kDegenerateEigenRatio = 1e-10;

RegistrationResult failure(const Pose& pose, int iterations) {
  RegistrationResult r;
  r.pose = pose;
  r.iterations = iterations;
  return r;
}

bool is_degenerate(const Mat6& h) {
  const Eigen::SelfAdjointEigenSolver<Mat6> eig(h, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return !(ev(5) > 0.0) || ev(0) <= kDegenerateEigenRatio * ev(5);
}

}  // namespace

double robust_weight(Kernel kernel, double r, double c) {
  const double u = r / c;
  switch (kernel) {
    case Kernel::kGemanMcClure: {
      const double d = 1.0 + u * u;
      return 1.0 / (d * d);
    }
    case Kernel::kTukey: {
      if (u >= 1.0) return 0.0;
      const double d = 1.0 - u * u;
      return d * d;
    }
    case Kernel::kCauchy:
      return 1.0 / (1.0 + u * u);
  }
  throw std::invalid_argument("robust_weight: unknown kernel");
}

double geman_mcclure_loss(double r, double c) {
  const double r2 = r * r;
  return 0.5 * r2 / (1.0 + r2 / (c * c));
}

Eigen::Matrix<double, 3, 6> point_jacobian(const Pose& pose, const Vec3& source) {
  Eigen::Matrix<double, 3, 6> j;
  j.leftCols<3>().setIdentity();
  j.rightCols<3>() = -hat(pose * source);
  return j;
}

NormalEquations build_normal_equations(std::span<const Correspondence> correspondences,
                                       const Pose& pose) {
  NormalEquations ne;
  const Mat3 rot = pose.rotation_matrix();
  for (const auto& c : correspondences) {
    const Vec3 y = rot * c.source + pose.translation();
    const Vec3 r = y - c.target;
    Eigen::Matrix<double, 3, 6> j;
    j.leftCols<3>().setIdentity();
    j.rightCols<3>() = -hat(y);
    ne.hessian.noalias() += c.weight * j.transpose() * j;
    ne.gradient.noalias() += c.weight * j.transpose() * r;
    ne.cost += 0.5 * c.weight * r.squaredNorm();
    ++ne.count;
  }
  return ne;
}

double inlier_ratio(std::span<const Vec3> source, const VoxelMap& target, const Pose& pose,
                    double max_dist) {
  if (source.empty()) return 0.0;
  const Mat3 rot = pose.rotation_matrix();
  std::size_t inliers = 0;
  for (const auto& p : source) {
    if (target.nearest(rot * p + pose.translation(), max_dist)) ++inliers;
  }
  return static_cast<double>(inliers) / static_cast<double>(source.size());
}

RegistrationResult icp_align(std::span<const Vec3> source, const VoxelMap& target,
                             const Pose& init, const RegistrationParams& params) {
  if (source.empty()) throw std::invalid_argument("icp_align: empty source cloud");

  std::vector<Correspondence> corr;
  corr.reserve(source.size());
  const auto associate = [&](const Pose& pose) {
    corr.clear();
    const Mat3 rot = pose.rotation_matrix();
    for (const auto& p : source) {
      const Vec3 y = rot * p + pose.translation();
      if (const auto nn = target.nearest(y, params.max_correspondence_dist)) {
        corr.push_back({p, nn->point,
                        robust_weight(Kernel::kGemanMcClure, nn->distance, params.kernel_width)});
      }
    }
  };

  Pose pose = init;
  int iter = 0;
  bool converged = false;
  for (; iter < params.max_iterations; ++iter) {
    associate(pose);
    if (corr.size() < kMinCorrespondences) return failure(init, iter);
    const NormalEquations ne = build_normal_equations(corr, pose);
    if (is_degenerate(ne.hessian)) return failure(init, iter);
    const Vec6 delta = ne.hessian.ldlt().solve(-ne.gradient);
    if (!delta.allFinite()) return failure(init, iter);
    pose = se3_exp(Twist::FromVector(delta)) * pose;
    if (delta.head<3>().norm() < params.translation_epsilon &&
        delta.tail<3>().norm() < params.rotation_epsilon) {
      converged = true;
      ++iter;
      break;
    }
  }

  RegistrationResult result;
  result.pose = pose;
  result.iterations = iter;
  result.converged = converged;
  result.valid = true;
  const Mat3 rot = pose.rotation_matrix();
  std::size_t inliers = 0;
  for (const auto& p : source) {
    if (const auto nn = target.nearest(rot * p + pose.translation(), params.max_correspondence_dist)) {
      ++inliers;
      result.final_cost += geman_mcclure_loss(nn->distance, params.kernel_width);
    }
  }
  result.inlier_ratio = static_cast<double>(inliers) / static_cast<double>(source.size());
  return result;
}

}  // namespace georef
