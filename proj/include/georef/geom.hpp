#pragma once

// Rigid-body math: SE(3) poses, twists, exponential/logarithm maps and the
// constant-motion extrapolation used to seed each frame.
//
// Quaternion convention (fixed for the whole project):
//   * Hamilton product, active rotation, Eigen storage.
//   * Serialized scalar-last as (qx, qy, qz, qw).
//   * Canonical hemisphere qw >= 0; every Pose stores the canonical form.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <vector>

namespace georef {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Quat = Eigen::Quaterniond;
using PointCloud = std::vector<Vec3>;

/// Unit quaternion flipped into the qw >= 0 hemisphere.
Quat canonical(const Quat& q);

/// Rigid transform mapping points from a body frame into the map frame.
class Pose {
 public:
  Pose() = default;
  Pose(const Vec3& translation, const Quat& rotation);

  static Pose Identity() { return {}; }
  static Pose FromTranslation(const Vec3& t) { return {t, Quat::Identity()}; }
  /// Planar pose: rotation about +z only.
  static Pose FromXYZYaw(double x, double y, double z, double yaw);

  const Vec3& translation() const { return t_; }
  const Quat& rotation() const { return q_; }
  Mat3 rotation_matrix() const { return q_.toRotationMatrix(); }

  Vec3 operator*(const Vec3& p) const { return q_ * p + t_; }
  /// this ∘ other: applies other first.
  Pose operator*(const Pose& other) const;
  Pose inverse() const;

 private:
  Vec3 t_ = Vec3::Zero();
  Quat q_ = Quat::Identity();
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
Vec3 transform_point(const Pose& p, const Vec3& x);
PointCloud transform_cloud(const Pose& p, const PointCloud& cloud);

/// Tangent vector of SE(3): translational part rho, rotational part theta.
struct Twist {
  Vec3 rho = Vec3::Zero();
  Vec3 theta = Vec3::Zero();

  /// Stacked as (rho, theta).
  Vec6 vector() const;
  static Twist FromVector(const Vec6& v);
};

Mat3 hat(const Vec3& v);

Quat so3_exp(const Vec3& theta);
/// Axis-angle of q with angle in [0, π].
Vec3 so3_log(const Quat& q);
/// Rotation angle in [0, π].
double rotation_angle(const Quat& q);

/// Left Jacobian of SO(3), the V matrix coupling translation and rotation in se3_exp.
Mat3 so3_left_jacobian(const Vec3& theta);
Mat3 so3_left_jacobian_inverse(const Vec3& theta);

Pose se3_exp(const Twist& v);
/// Throws std::domain_error when the rotation angle is within 1e-6 of π.
Twist se3_log(const Pose& p);

/// q0 (q0⁻¹ q1)^s along the shortest geodesic; s > 1 extrapolates.
Quat slerp(const Quat& q0, const Quat& q1, double s);

/// Constant velocity prediction: translation t + (t - t_prev), rotation slerp(q_prev, q, 2).
Pose extrapolate_pose(const Pose& prev, const Pose& curr);

}  // namespace georef
