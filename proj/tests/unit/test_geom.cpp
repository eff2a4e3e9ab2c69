#include "georef/geom.hpp"
#include "support.hpp"

#include <doctest.h>

#include <stdexcept>

using namespace georef;
using georef::test::Gen;
using georef::test::kDeg;

namespace {

double pose_distance(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm() + rotation_angle(a.rotation().inverse() * b.rotation());
}

// Independent oracle: exponential of the 4x4 twist matrix by scaling and squaring
// of a truncated Taylor series.
Eigen::Matrix4d twist_matrix_exp(const Twist& v) {
  Eigen::Matrix4d x = Eigen::Matrix4d::Zero();
  x.topLeftCorner<3, 3>() << 0, -v.theta.z(), v.theta.y(), v.theta.z(), 0, -v.theta.x(), -v.theta.y(),
      v.theta.x(), 0;
  x.topRightCorner<3, 1>() = v.rho;
  int squarings = 0;
  while (x.norm() > 0.1) {
    x /= 2.0;
    ++squarings;
  }
  Eigen::Matrix4d sum = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d term = Eigen::Matrix4d::Identity();
  for (int k = 1; k <= 20; ++k) {
    term = term * x / k;
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

}  // namespace

TEST_CASE("compose examples") {
  Gen gen(1);
  const Pose p = gen.pose(10.0, 3.0);
  CHECK(pose_distance(compose(Pose::Identity(), p), p) < 1e-12);
  CHECK(pose_distance(compose(p, inverse(p)), Pose::Identity()) < 1e-9);
  const Pose ab = compose(Pose::FromTranslation({1, 0, 0}), Pose::FromTranslation({0, 2, 0}));
  CHECK((ab.translation() - Vec3(1, 2, 0)).norm() < 1e-15);
}

TEST_CASE("compose applies the right operand first") {
  const Pose a = Pose::FromTranslation({1, 0, 0});
  const Pose b = Pose::FromXYZYaw(0, 0, 0, 90.0 * kDeg);
  const Vec3 x(1, 0, 0);
  CHECK((compose(a, b) * x - a * (b * x)).norm() < 1e-12);
  CHECK((compose(a, b) * x - Vec3(1, 1, 0)).norm() < 1e-12);
}

TEST_CASE("inverse examples") {
  CHECK(pose_distance(inverse(Pose::Identity()), Pose::Identity()) == 0.0);
  CHECK((inverse(Pose::FromTranslation({1, 2, 3})).translation() - Vec3(-1, -2, -3)).norm() < 1e-15);
  Gen gen(2);
  for (int i = 0; i < 200; ++i) {
    const Pose p = gen.pose(100.0, 3.1);
    CHECK(pose_distance(inverse(inverse(p)), p) < 1e-9);
  }
}

TEST_CASE("property: transform round trip, associativity and unit quaternions") {
  Gen gen(3);
  for (int i = 0; i < 500; ++i) {
    const Pose a = gen.pose(1000.0, 3.1);
    const Pose b = gen.pose(1000.0, 3.1);
    const Pose c = gen.pose(1000.0, 3.1);
    const Vec3 x = gen.vec(-500.0, 500.0);
    CHECK((transform_point(a, transform_point(inverse(a), x)) - x).norm() < 1e-9);
    CHECK(pose_distance((a * b) * c, a * (b * c)) < 1e-9);
    CHECK(std::abs((a * b).rotation().norm() - 1.0) < 1e-12);
    CHECK((a * b).rotation().w() >= 0.0);
  }
}

TEST_CASE("long composition chains stay normalized") {
  Gen gen(4);
  Pose p;
  for (int i = 0; i < 100000; ++i) p = p * gen.pose(0.1, 0.05);
  CHECK(std::abs(p.rotation().norm() - 1.0) < 1e-12);
}

TEST_CASE("canonical hemisphere") {
  const Quat q(-0.5, 0.5, 0.5, 0.5);
  const Quat c = canonical(q);
  CHECK(c.w() == doctest::Approx(0.5));
  CHECK(c.x() == doctest::Approx(-0.5));
  CHECK(Pose(Vec3::Zero(), q).rotation().w() > 0.0);
}

TEST_CASE("se3_exp examples") {
  CHECK(pose_distance(se3_exp(Twist{}), Pose::Identity()) == 0.0);
  const Pose t = se3_exp(Twist{{1, 2, 3}, Vec3::Zero()});
  CHECK((t.translation() - Vec3(1, 2, 3)).norm() < 1e-15);
  CHECK(rotation_angle(t.rotation()) == 0.0);
}

TEST_CASE("se3_exp matches the matrix exponential oracle") {
  Gen gen(5);
  for (int i = 0; i < 200; ++i) {
    Twist v{gen.vec(-5.0, 5.0), gen.unit() * gen.uniform(0.0, 3.0)};
    if (i < 20) v.theta *= 1e-7;  // small-angle branch
    const Eigen::Matrix4d m = twist_matrix_exp(v);
    const Pose p = se3_exp(v);
    CHECK((p.rotation_matrix() - m.topLeftCorner<3, 3>()).norm() < 1e-9);
    CHECK((p.translation() - m.topRightCorner<3, 1>()).norm() < 1e-9);
  }
}

TEST_CASE("property: se3 log/exp round trips") {
  Gen gen(6);
  for (int i = 0; i < 500; ++i) {
    Twist v{gen.vec(-20.0, 20.0), gen.unit() * gen.uniform(0.0, 3.0)};
    if (i % 10 == 0) v.theta *= 1e-6;
    const Twist back = se3_log(se3_exp(v));
    CHECK((back.vector() - v.vector()).norm() < 1e-9);

    const Pose p = gen.pose(50.0, 3.0);
    CHECK(pose_distance(se3_exp(se3_log(p)), p) < 1e-9);
  }
}

TEST_CASE("se3_log rejects half turns") {
  const Pose half_turn(Vec3(1, 0, 0), Quat(Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitZ())));
  CHECK_THROWS_AS(se3_log(half_turn), std::domain_error);
  const Pose near(Vec3(1, 0, 0), Quat(Eigen::AngleAxisd(std::numbers::pi - 1e-3, Vec3::UnitZ())));
  CHECK_NOTHROW(se3_log(near));
}

TEST_CASE("left Jacobian and its inverse") {
  Gen gen(7);
  for (int i = 0; i < 200; ++i) {
    Vec3 theta = gen.unit() * gen.uniform(0.0, 3.0);
    if (i % 4 == 0) theta *= 1e-5;
    const Mat3 prod = so3_left_jacobian(theta) * so3_left_jacobian_inverse(theta);
    CHECK((prod - Mat3::Identity()).norm() < 1e-9);
  }
}

TEST_CASE("so3 log/exp round trip") {
  Gen gen(8);
  for (int i = 0; i < 200; ++i) {
    const Vec3 theta = gen.unit() * gen.uniform(0.0, 3.1);
    CHECK((so3_log(so3_exp(theta)) - theta).norm() < 1e-9);
  }
}

TEST_CASE("slerp examples") {
  Gen gen(9);
  const Quat q0 = gen.rotation(3.0);
  const Quat q1 = gen.rotation(3.0);
  CHECK(rotation_angle(slerp(q0, q1, 0.0).inverse() * q0) < 1e-12);
  CHECK(rotation_angle(slerp(q0, q1, 1.0).inverse() * q1) < 1e-9);
  CHECK(rotation_angle(slerp(q0, q0, 2.0).inverse() * q0) < 1e-12);

  // Axis-angle doubling: 45° about z extrapolated with s = 2 is 90° about z.
  const Quat q45(Eigen::AngleAxisd(45.0 * kDeg, Vec3::UnitZ()));
  const Quat expected(Eigen::AngleAxisd(90.0 * kDeg, Vec3::UnitZ()));
  CHECK(rotation_angle(slerp(Quat::Identity(), q45, 2.0).inverse() * expected) < 1e-12);
}

TEST_CASE("property: slerp of 2 repeats the relative rotation") {
  Gen gen(10);
  for (int i = 0; i < 300; ++i) {
    const Quat q0 = gen.rotation(3.1);
    const Quat q1 = q0 * gen.rotation(1.5);
    const Quat q2 = slerp(q0, q1, 2.0);
    CHECK(std::abs(q2.norm() - 1.0) < 1e-12);
    CHECK(rotation_angle((q1.inverse() * q2).inverse() * (q0.inverse() * q1)) < 1e-9);
  }
}

TEST_CASE("slerp takes the shortest path regardless of sign") {
  const Quat q0 = Quat::Identity();
  const Quat q10(Eigen::AngleAxisd(10.0 * kDeg, Vec3::UnitZ()));
  const Quat flipped(-q10.w(), -q10.x(), -q10.y(), -q10.z());
  const Quat a = slerp(q0, q10, 2.0);
  const Quat b = slerp(q0, flipped, 2.0);
  CHECK(rotation_angle(a.inverse() * b) < 1e-12);
  CHECK(rotation_angle(a) == doctest::Approx(20.0 * kDeg).epsilon(1e-12));
}

TEST_CASE("extrapolate_pose examples") {
  Gen gen(11);
  for (int i = 0; i < 100; ++i) {
    const Pose p = gen.pose(100.0, 3.0);
    CHECK(pose_distance(extrapolate_pose(p, p), p) < 1e-12);
  }
  const Pose next = extrapolate_pose(Pose::Identity(), Pose::FromTranslation({1, 0, 0}));
  CHECK((next.translation() - Vec3(2, 0, 0)).norm() < 1e-15);

  const Pose turned = extrapolate_pose(Pose::Identity(), Pose::FromXYZYaw(0, 0, 0, 10.0 * kDeg));
  const Quat expected(Eigen::AngleAxisd(20.0 * kDeg, Vec3::UnitZ()));
  CHECK(rotation_angle(turned.rotation().inverse() * expected) < 1e-12);
}

TEST_CASE("extrapolation translation is a plain vector step") {
  const Pose prev = Pose::FromXYZYaw(0, 0, 0, 0.0);
  const Pose curr = Pose::FromXYZYaw(1, 0, 0, 30.0 * kDeg);
  CHECK((extrapolate_pose(prev, curr).translation() - Vec3(2, 0, 0)).norm() < 1e-15);
}

TEST_CASE("twist vector layout") {
  const Twist t{{1, 2, 3}, {4, 5, 6}};
  Vec6 v;
  v << 1, 2, 3, 4, 5, 6;
  CHECK(t.vector() == v);
  CHECK(Twist::FromVector(v).theta == Vec3(4, 5, 6));
}
