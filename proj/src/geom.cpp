#include "georef/geom.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace georef {

namespace {

constexpr double kSmallAngle = 1e-4;
constexpr double kLogDomainMargin = 1e-6;

}  // namespace

Quat canonical(const Quat& q) {
  Quat n = q.normalized();
  if (n.w() < 0.0) n.coeffs() = -n.coeffs();
  return n;
}

Pose::Pose(const Vec3& translation, const Quat& rotation)
    : t_(translation), q_(canonical(rotation)) {}

Pose Pose::FromXYZYaw(double x, double y, double z, double yaw) {
  return {Vec3(x, y, z), Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()))};
}

Pose Pose::operator*(const Pose& other) const {
  return {q_ * other.t_ + t_, q_ * other.q_};
}

Pose Pose::inverse() const {
  const Quat qi = q_.conjugate();
  return {-(qi * t_), qi};
}

Pose compose(const Pose& a, const Pose& b) { return a * b; }
Pose inverse(const Pose& p) { return p.inverse(); }
Vec3 transform_point(const Pose& p, const Vec3& x) { return p * x; }

PointCloud transform_cloud(const Pose& p, const PointCloud& cloud) {
  PointCloud out;
  out.reserve(cloud.size());
  const Mat3 r = p.rotation_matrix();
  for (const auto& x : cloud) out.emplace_back(r * x + p.translation());
  return out;
}

Vec6 Twist::vector() const {
  Vec6 v;
  v << rho, theta;
  return v;
}

Twist Twist::FromVector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Quat so3_exp(const Vec3& theta) {
  const double angle = theta.norm();
  if (angle < kSmallAngle) {
    const double a2 = angle * angle;
    const Vec3 v = theta * (0.5 - a2 / 48.0);
    return canonical(Quat(1.0 - a2 / 8.0, v.x(), v.y(), v.z()));
  }
  const Vec3 v = theta * (std::sin(0.5 * angle) / angle);
  return canonical(Quat(std::cos(0.5 * angle), v.x(), v.y(), v.z()));
}

Vec3 so3_log(const Quat& q_in) {
  const Quat q = canonical(q_in);
  const Vec3 v = q.vec();
  const double n = v.norm();
  const double w = q.w();
  if (n < 1e-8) {
    // atan2(n, w) ≈ n/w - n³/(3w³)
    return v * (2.0 / w - (2.0 / 3.0) * n * n / (w * w * w));
  }
  return v * (2.0 * std::atan2(n, w) / n);
}

double rotation_angle(const Quat& q_in) {
  const Quat q = canonical(q_in);
  return 2.0 * std::atan2(q.vec().norm(), q.w());
}

Mat3 so3_left_jacobian(const Vec3& theta) {
  const double a = theta.norm();
  const Mat3 k = hat(theta);
  double c1;
  double c2;
  if (a < kSmallAngle) {
    const double a2 = a * a;
    c1 = 0.5 - a2 / 24.0;
    c2 = 1.0 / 6.0 - a2 / 120.0;
  } else {
    const double s = std::sin(0.5 * a);
    c1 = 2.0 * s * s / (a * a);
    c2 = (a - std::sin(a)) / (a * a * a);
  }
  return Mat3::Identity() + c1 * k + c2 * k * k;
}

Mat3 so3_left_jacobian_inverse(const Vec3& theta) {
  const double a = theta.norm();
  const Mat3 k = hat(theta);
  double c2;
  if (a < kSmallAngle) {
    c2 = 1.0 / 12.0 + a * a / 720.0;
  } else {
    const double half = 0.5 * a;
    c2 = (1.0 - half * std::cos(half) / std::sin(half)) / (a * a);
  }
  return Mat3::Identity() - 0.5 * k + c2 * k * k;
}

Pose se3_exp(const Twist& v) {
  return {so3_left_jacobian(v.theta) * v.rho, so3_exp(v.theta)};
}

Twist se3_log(const Pose& p) {
  const Vec3 theta = so3_log(p.rotation());
  if (theta.norm() >= std::numbers::pi - kLogDomainMargin) {
    throw std::domain_error("se3_log: rotation angle too close to pi");
  }
  return {so3_left_jacobian_inverse(theta) * p.translation(), theta};
}

Quat slerp(const Quat& q0_in, const Quat& q1_in, double s) {
  const Quat q0 = q0_in.normalized();
  Quat q1 = q1_in.normalized();
  if (q0.dot(q1) < 0.0) q1.coeffs() = -q1.coeffs();
  const Quat delta = q0.conjugate() * q1;
  return canonical(q0 * so3_exp(s * so3_log(delta)));
}

Pose extrapolate_pose(const Pose& prev, const Pose& curr) {
  const Vec3 t = curr.translation() + (curr.translation() - prev.translation());
  return {t, slerp(prev.rotation(), curr.rotation(), 2.0)};
}

}  // namespace georef
