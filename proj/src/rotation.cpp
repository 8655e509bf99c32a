#include "railgauge/rotation.hpp"

#include <algorithm>
#include <cmath>

namespace railgauge {

Side side_from_string(const std::string& text) {
  if (text == "left" || text == "L" || text == "l") return Side::Left;
  if (text == "right" || text == "R" || text == "r") return Side::Right;
  throw InputError("unknown rail side '" + text + "'");
}

Mat3 rotation_from_euler(const Euler& e) {
  const double cf = std::cos(e.roll), sf = std::sin(e.roll);
  const double ct = std::cos(e.pitch), st = std::sin(e.pitch);
  const double cp = std::cos(e.yaw), sp = std::sin(e.yaw);
  Mat3 a;
  a << ct * cp, sf * st * cp - cf * sp, sf * sp + cf * st * cp,
       ct * sp, cf * cp + sf * st * sp, cf * st * sp - sf * cp,
       -st, sf * ct, cf * ct;
  return a;
}

Mat3 small_angle_rotation(const Euler& e) {
  Mat3 a;
  a << 1.0, -e.yaw, e.pitch,
       e.yaw, 1.0, -e.roll,
       -e.pitch, e.roll, 1.0;
  return a;
}

Euler euler_from_rotation(const Mat3& a, double max_pitch) {
  const double sp = std::clamp(-a(2, 0), -1.0, 1.0);
  const double pitch = std::asin(sp);
  if (std::abs(pitch) > max_pitch) {
    throw GeometryError("orientation too close to gimbal lock (pitch " + std::to_string(pitch) +
                        " rad)");
  }
  return {std::atan2(a(2, 1), a(2, 2)), pitch, std::atan2(a(1, 0), a(0, 0))};
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Mat3 rotation_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 a;
  a << 1.0, 0.0, 0.0,
       0.0, c, -s,
       0.0, s, c;
  return a;
}

Vec3 body_rate_from_euler_rates(const Euler& e, const Vec3& rates) {
  const double cf = std::cos(e.roll), sf = std::sin(e.roll);
  const double ct = std::cos(e.pitch), st = std::sin(e.pitch);
  const double droll = rates.x(), dpitch = rates.y(), dyaw = rates.z();
  return {droll - dyaw * st,
          dpitch * cf + dyaw * ct * sf,
          -dpitch * sf + dyaw * ct * cf};
}

Vec3 body_accel_from_euler_rates(const Euler& e, const Vec3& rates, const Vec3& accels) {
  const double cf = std::cos(e.roll), sf = std::sin(e.roll);
  const double ct = std::cos(e.pitch), st = std::sin(e.pitch);
  const double df = rates.x(), dt = rates.y(), dp = rates.z();
  const double ddf = accels.x(), ddt = accels.y(), ddp = accels.z();
  return {ddf - ddp * st - dp * dt * ct,
          ddt * cf - dt * df * sf + ddp * ct * sf - dp * dt * st * sf + dp * df * ct * cf,
          -ddt * sf - dt * df * cf + ddp * ct * cf - dp * dt * st * cf - dp * df * ct * sf};
}

}  // namespace railgauge
