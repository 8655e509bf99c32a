#pragma once

#include "railgauge/track_model.hpp"

#include <Eigen/Geometry>

namespace railgauge {

struct ImuSample {
  double t = 0.0;
  Vec3 accel = Vec3::Zero();  // specific force including gravity, body frame
  Vec3 gyro = Vec3::Zero();   // rad/s, body frame
};

/// (Vdot, rho_h V^2, -rho_v V^2): track-frame acceleration of a point moving
/// along the ideal track.
Vec3 predicted_body_acceleration(const TrackFrameState& state, double v, double v_dot);

struct FusionOptions {
  double beta = 0.05;
  double free_fall_tol = 1e-9;
};

/// Gradient-descent attitude filter (gyro + accelerometer, no magnetometer)
/// whose accelerometer reference is corrected by the expected track
/// acceleration. The quaternion maps body to global components.
class AttitudeFilter {
 public:
  explicit AttitudeFilter(FusionOptions options = {});

  void initialize(const Mat3& body_to_global);
  void initialize(const Eigen::Quaterniond& q);

  /// `predicted` is in track-frame components; `a_track` is A^t at the current s.
  void step(const ImuSample& sample, const Vec3& predicted, const Mat3& a_track, double dt);

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 orientation() const { return q_.toRotationMatrix(); }
  bool free_fall() const { return free_fall_; }
  const FusionOptions& options() const { return options_; }

 private:
  FusionOptions options_;
  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
  bool free_fall_ = false;
};

/// Orientation increment exp(omega dt / 2).
Eigen::Quaterniond quaternion_exp(const Vec3& omega, double dt);

/// Madgwick objective gradient for a unit gravity direction measured in the body.
Eigen::Vector4d gravity_gradient(const Eigen::Quaterniond& q, const Vec3& a_unit);

/// Euler angles of the body relative to the track frame, (A^t)^T A^{tgms}.
Euler relative_euler(const Mat3& body_to_global, const Mat3& a_track);

}  // namespace railgauge
