#include "railgauge/fusion.hpp"

#include <cmath>

namespace railgauge {

Vec3 predicted_body_acceleration(const TrackFrameState& state, double v, double v_dot) {
  return {v_dot, state.rho_h * v * v, -state.rho_v * v * v};
}

AttitudeFilter::AttitudeFilter(FusionOptions options) : options_(options) {
  if (!(options_.beta >= 0.0)) throw InputError("fusion gain must be non-negative");
}

void AttitudeFilter::initialize(const Mat3& body_to_global) {
  q_ = Eigen::Quaterniond(body_to_global);
  q_.normalize();
}

void AttitudeFilter::initialize(const Eigen::Quaterniond& q) { q_ = q.normalized(); }

Eigen::Quaterniond quaternion_exp(const Vec3& omega, double dt) {
  const double angle = omega.norm() * dt;
  if (angle < 1e-300) return Eigen::Quaterniond::Identity();
  const Vec3 axis = omega.normalized();
  const double h = 0.5 * angle;
  return {std::cos(h), axis.x() * std::sin(h), axis.y() * std::sin(h), axis.z() * std::sin(h)};
}

Eigen::Vector4d gravity_gradient(const Eigen::Quaterniond& q, const Vec3& a) {
  const double q0 = q.w(), q1 = q.x(), q2 = q.y(), q3 = q.z();
  const Vec3 f{2.0 * (q1 * q3 - q0 * q2) - a.x(), 2.0 * (q0 * q1 + q2 * q3) - a.y(),
               2.0 * (0.5 - q1 * q1 - q2 * q2) - a.z()};
  Eigen::Matrix<double, 3, 4> j;
  j << -2.0 * q2, 2.0 * q3, -2.0 * q0, 2.0 * q1,
       2.0 * q1, 2.0 * q0, 2.0 * q3, 2.0 * q2,
       0.0, -4.0 * q1, -4.0 * q2, 0.0;
  return j.transpose() * f;
}

void AttitudeFilter::step(const ImuSample& sample, const Vec3& predicted, const Mat3& a_track,
                          double dt) {
  if (!(dt > 0.0)) throw InputError("fusion step needs dt > 0");
  Eigen::Quaterniond next = q_ * quaternion_exp(sample.gyro, dt);
  const Mat3 r = next.toRotationMatrix();
  const Vec3 corrected = sample.accel - r.transpose() * (a_track * predicted);
  const double norm = corrected.norm();
  free_fall_ = !(norm > options_.free_fall_tol);
  if (!free_fall_) {
    const Eigen::Vector4d grad = gravity_gradient(next, corrected / norm);
    const double gn = grad.norm();
    if (gn > 1e-15) {
      const Eigen::Vector4d step = options_.beta * dt * grad / gn;
      next.w() -= step(0);
      next.x() -= step(1);
      next.y() -= step(2);
      next.z() -= step(3);
    }
  }
  q_ = next.normalized();
}

Euler relative_euler(const Mat3& body_to_global, const Mat3& a_track) {
  return euler_from_rotation(a_track.transpose() * body_to_global, 1.4);
}

}  // namespace railgauge
