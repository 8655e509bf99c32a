#pragma once

#include "railgauge/common.hpp"
#include "railgauge/rotation.hpp"

#include <vector>

namespace railgauge {

enum class HorizontalKind { Straight, Circular, Transition };
enum class VerticalKind { ConstantSlope, Transition };

/// Curvatures are signed (positive turns left, i.e. increasing heading);
/// a straight end has curvature 0.
struct HorizontalSection {
  HorizontalKind kind = HorizontalKind::Straight;
  double length = 0.0;
  double curvature_start = 0.0;
  double curvature_end = 0.0;
  double cant_start = 0.0;
  double cant_end = 0.0;
};

/// Slopes are positive when the track descends in the forward direction,
/// the same sense as the track-frame pitch angle.
struct VerticalSection {
  VerticalKind kind = VerticalKind::ConstantSlope;
  double length = 0.0;
  double slope_start = 0.0;
  double slope_end = 0.0;
};

struct TrackLayout {
  std::vector<HorizontalSection> horizontal;
  std::vector<VerticalSection> vertical;
  double half_gauge = 0.75;        // distance from the centerline to each rail-profile origin
  double rail_inclination = 0.025;  // rail-profile cant towards the track centre

  double total_length() const;
};

/// Throws ValidationError describing the first violated layout invariant.
void validate(const TrackLayout& layout);

struct TrackFrameState {
  double s = 0.0;
  Vec3 position = Vec3::Zero();        // R^t, global
  Mat3 orientation = Mat3::Identity();  // A^t, track frame to global
  double psi = 0.0;    // heading
  double theta = 0.0;  // slope, positive downwards
  double phi = 0.0;    // cant
  double rho_h = 0.0;
  double rho_v = 0.0;
  double rho_tw = 0.0;
  double rho_h_prime = 0.0;
  double alpha_v = 0.0;

  Euler euler() const { return {phi, theta, psi}; }
};

/// Velocity, acceleration, angular velocity and angular acceleration of a body
/// moving with the track frame, all in track-frame components.
struct FrameKinematics {
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  Vec3 angular_acceleration = Vec3::Zero();
};

/// Curvature-based track-frame kinematics: (V,0,0), (Vdot, rho_h V^2, -rho_v V^2),
/// rho-scaled angular velocity and acceleration.
FrameKinematics frame_velocity(const TrackFrameState& state, double v, double v_dot);

/// Kinematics obtained by differentiating the full track-frame rotation. Agrees
/// with frame_velocity on flat, uncanted track; differs at first order in cant
/// and slope elsewhere.
FrameKinematics exact_frame_kinematics(const TrackFrameState& state, double v, double v_dot);

/// Ideal-track preprocessor. Immutable after construction.
class Track {
 public:
  explicit Track(TrackLayout layout, double node_spacing = 0.1);

  TrackFrameState frame_at(double s) const;
  Vec3 position_at(double s) const;
  double length() const { return length_; }
  const TrackLayout& layout() const { return layout_; }

  /// Start of every horizontal section plus the track end.
  std::vector<double> horizontal_breakpoints() const;

 private:
  void angles_at(double s, TrackFrameState& out) const;
  Vec3 tangent(double s) const;

  TrackLayout layout_;
  double length_ = 0.0;
  std::vector<double> h_start_;
  std::vector<double> h_psi0_;
  std::vector<double> v_start_;
  std::vector<double> node_s_;
  std::vector<Vec3> node_r_;
  std::vector<Vec3> node_t_;
};

/// Small-angle form of the track-frame rotation (azimuth exact).
Mat3 small_angle_track_rotation(double psi, double theta, double phi);

/// Rail displacements (y,z) of the left and right rail in the track frame.
struct RailOffsets {
  double y_left = 0.0;
  double z_left = 0.0;
  double y_right = 0.0;
  double z_right = 0.0;
};

struct IrregularityRecord {
  double s = 0.0;
  double al = 0.0;
  double vp = 0.0;
  double gv = 0.0;
  double cl = 0.0;
  double tw = 0.0;
};

IrregularityRecord irregularities_from_rails(double s, const RailOffsets& rails);
RailOffsets irregularities_to_rails(const IrregularityRecord& record);

/// Rail displacements sampled on a uniform grid with linear interpolation.
class IrregularityField {
 public:
  IrregularityField() = default;
  IrregularityField(double s0, double spacing, std::vector<RailOffsets> samples);

  /// Zero field covering [s0, s1].
  static IrregularityField zero(double s0, double s1, double spacing = 0.25);

  RailOffsets at(double s) const;
  double s0() const { return s0_; }
  double s1() const { return s0_ + spacing_ * static_cast<double>(samples_.size() - 1); }
  double spacing() const { return spacing_; }
  const std::vector<RailOffsets>& samples() const { return samples_; }

 private:
  double s0_ = 0.0;
  double spacing_ = 0.25;
  std::vector<RailOffsets> samples_;
};

struct RailProfileFrames {
  Mat3 left;
  Mat3 right;
};

/// Rail-profile orientations in the track frame: rotations about X by
/// (beta + delta) on the left and (-beta + delta) on the right, delta = cl / (2 L_r).
RailProfileFrames rail_profile_frames(double beta, double cl, double half_gauge);

/// Global position of the point with profile coordinates `u_hat` = (y, z) on the
/// given irregular rail at arc length s.
Vec3 rail_point_global(const Track& track, double s, Side side, const IrregularityField& irr,
                       const Vec2& u_hat);

enum class RotationModel { SmallAngle, Exact };

/// Motion of a body relative to the track frame: lateral/vertical offset and
/// roll/pitch/yaw with their first and second time derivatives.
struct RelativeMotion {
  Vec2 r = Vec2::Zero();
  Vec2 r_dot = Vec2::Zero();
  Vec2 r_ddot = Vec2::Zero();
  Euler angles;
  Vec3 angle_rates = Vec3::Zero();
  Vec3 angle_accels = Vec3::Zero();
};

struct BodyPointKinematics {
  Vec3 velocity;              // track-frame components
  Vec3 acceleration;          // track-frame components
  Vec3 angular_velocity;      // body components
  Vec3 angular_acceleration;  // body components
};

/// Rotation from body to track frame for the chosen model.
Mat3 relative_rotation(const Euler& angles, RotationModel model);

/// Body angular velocity relative to the track frame, body components.
Vec3 relative_body_rate(const RelativeMotion& m, RotationModel model);

/// Absolute velocity and acceleration of body point P (track-frame components)
/// together with the body's absolute angular velocity and acceleration.
BodyPointKinematics body_kinematics(const RelativeMotion& motion, const FrameKinematics& frame,
                                    const Vec3& u_hat_p, RotationModel model);

/// Convenience form using the curvature-based track kinematics and the
/// small-angle relative rotation.
BodyPointKinematics body_kinematics(const RelativeMotion& motion, const TrackFrameState& state,
                                    double v, double v_dot, const Vec3& u_hat_p);

/// Global position of body point P for the given relative pose.
Vec3 body_point_global(const TrackFrameState& state, const RelativeMotion& motion,
                       const Vec3& u_hat_p, RotationModel model);

}  // namespace railgauge
