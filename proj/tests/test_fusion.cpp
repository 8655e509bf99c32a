#include "railgauge/fusion.hpp"

#include <doctest.h>

#include <random>

using namespace railgauge;

namespace {

double half_residual_norm(const Eigen::Vector4d& v, const Vec3& a) {
  // Published Madgwick objective, quaternion components (w, x, y, z).
  const double q0 = v(0), q1 = v(1), q2 = v(2), q3 = v(3);
  const Vec3 f{2.0 * (q1 * q3 - q0 * q2) - a.x(), 2.0 * (q0 * q1 + q2 * q3) - a.y(),
               2.0 * (0.5 - q1 * q1 - q2 * q2) - a.z()};
  return 0.5 * f.squaredNorm();
}

}  // namespace

TEST_CASE("quaternion exponential equals the axis-angle rotation") {
  const Vec3 w{0.3, -1.1, 0.4};
  const double dt = 0.05;
  const Eigen::Quaterniond q = quaternion_exp(w, dt);
  const Eigen::Quaterniond ref(Eigen::AngleAxisd(w.norm() * dt, w.normalized()));
  CHECK(q.angularDistance(ref) < 1e-15);
  CHECK(quaternion_exp(Vec3::Zero(), dt).w() == 1.0);
}

TEST_CASE("gravity objective and gradient") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Quaterniond q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized();
    const Vec3 a = Vec3(n(rng), n(rng), n(rng)).normalized();
    // At a unit quaternion the residual is the body-frame vertical minus a.
    const Vec3 up = q.toRotationMatrix().transpose() * Vec3::UnitZ();
    const Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
    CHECK(half_residual_norm(v, a) == doctest::Approx(0.5 * (up - a).squaredNorm()).epsilon(1e-12));
    const Eigen::Vector4d g = gravity_gradient(q, a);
    for (int k = 0; k < 4; ++k) {
      Eigen::Vector4d e = Eigen::Vector4d::Zero();
      e(k) = 1e-6;
      const double fd = (half_residual_norm(v + e, a) - half_residual_norm(v - e, a)) / 2e-6;
      CHECK(g(k) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("filter holds a level attitude at rest and stays normalized") {
  AttitudeFilter f;
  f.initialize(Mat3::Identity());
  for (int i = 0; i < 1000; ++i) {
    f.step({0.01 * i, {0.0, 0.0, kGravity}, Vec3::Zero()}, Vec3::Zero(), Mat3::Identity(), 0.01);
  }
  CHECK(f.quaternion().angularDistance(Eigen::Quaterniond::Identity()) < 1e-15);
  CHECK(f.quaternion().norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_FALSE(f.free_fall());
}

TEST_CASE("filter converges to a static tilt") {
  const Mat3 truth = rotation_from_euler({0.03, -0.02, 0.7});
  AttitudeFilter f(FusionOptions{0.1, 1e-9});
  f.initialize(rotation_from_euler({0.0, 0.0, 0.7}));
  const Vec3 accel = truth.transpose() * Vec3(0.0, 0.0, kGravity);
  for (int i = 0; i < 4000; ++i) f.step({0.01 * i, accel, Vec3::Zero()}, Vec3::Zero(), Mat3::Identity(), 0.01);
  const Euler e = relative_euler(f.orientation(), Mat3::Identity());
  // The normalized gradient step leaves a limit cycle of order beta * dt.
  CHECK(std::abs(e.roll - 0.03) < 2e-4);
  CHECK(std::abs(e.pitch + 0.02) < 2e-4);
}

TEST_CASE("track acceleration is removed from the accelerometer reference") {
  const Mat3 a_track = rotation_from_euler({0.0, 0.0, 0.4});
  const Vec3 predicted{0.3, 1.2, -0.05};
  const Vec3 accel = a_track.transpose() * (Vec3(0.0, 0.0, kGravity) + a_track * predicted);
  AttitudeFilter f;
  f.initialize(a_track);
  for (int i = 0; i < 500; ++i) f.step({0.01 * i, accel, Vec3::Zero()}, predicted, a_track, 0.01);
  CHECK(f.quaternion().angularDistance(Eigen::Quaterniond(a_track)) < 1e-12);
}

TEST_CASE("free fall skips the correction") {
  AttitudeFilter f;
  f.initialize(Mat3::Identity());
  f.step({0.0, Vec3::Zero(), {0.0, 0.0, 0.2}}, Vec3::Zero(), Mat3::Identity(), 0.01);
  CHECK(f.free_fall());
  CHECK(f.quaternion().angularDistance(quaternion_exp({0.0, 0.0, 0.2}, 0.01)) < 1e-15);
  CHECK_THROWS_AS(f.step({0.0, Vec3::UnitZ(), Vec3::Zero()}, Vec3::Zero(), Mat3::Identity(), 0.0), InputError);
}

TEST_CASE("predicted acceleration and relative attitude") {
  TrackFrameState st;
  st.rho_h = 1.0 / 400.0;
  st.rho_v = -1e-4;
  const Vec3 p = predicted_body_acceleration(st, 20.0, 0.5);
  CHECK(p.x() == 0.5);
  CHECK(p.y() == doctest::Approx(1.0));
  CHECK(p.z() == doctest::Approx(0.04));
  const Mat3 a_track = rotation_from_euler({0.05, 0.01, 2.0});
  const Euler e = relative_euler(a_track * rotation_x(0.02), a_track);
  CHECK(e.roll == doctest::Approx(0.02).epsilon(1e-13));
  CHECK(std::abs(e.yaw) < 1e-15);
}
