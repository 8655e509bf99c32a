#pragma once

#include "railgauge/common.hpp"

namespace railgauge {

/// Roll, pitch, yaw. The rotation they describe is Rz(yaw) * Ry(pitch) * Rx(roll),
/// which is the convention of the track-frame matrix and of its small-angle form.
struct Euler {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Vec3 as_vector() const { return {roll, pitch, yaw}; }
  static Euler from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

Mat3 rotation_from_euler(const Euler& e);

/// First-order form [[1,-yaw,pitch],[yaw,1,-roll],[-pitch,roll,1]].
Mat3 small_angle_rotation(const Euler& e);

/// Exact extraction; throws GeometryError when |pitch| exceeds `max_pitch`.
Euler euler_from_rotation(const Mat3& a, double max_pitch = 1.4);

Mat3 skew(const Vec3& v);

/// Rotation about the X axis by `angle` (right-handed).
Mat3 rotation_x(double angle);

/// Body-frame angular velocity of Rz(yaw)Ry(pitch)Rx(roll) given Euler rates.
Vec3 body_rate_from_euler_rates(const Euler& e, const Vec3& rates);

/// Time derivative of body_rate_from_euler_rates.
Vec3 body_accel_from_euler_rates(const Euler& e, const Vec3& rates, const Vec3& accels);

}  // namespace railgauge
