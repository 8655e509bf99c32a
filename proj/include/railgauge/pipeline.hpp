#pragma once

#include "railgauge/fusion.hpp"
#include "railgauge/odometry.hpp"
#include "railgauge/profile_fit.hpp"
#include "railgauge/track_model.hpp"
#include "railgauge/vision.hpp"

#include <string>
#include <vector>

namespace railgauge {

enum Quality : int {
  kFitNotConverged = 1,
  kCalibrationWarning = 2,
  kFreeFall = 4,
  kNotAnchored = 8,
  kTwistUnavailable = 16,
};

/// SmallAngle: curvature-based track kinematics, small-angle rotations and
/// linearized gravity. Exact: full rotations and exact frame kinematics.
enum class KinematicsModel { SmallAngle, Exact };

struct PipelineConfig {
  double s_start = 0.0;  // ideal arc length at the first encoder sample
  bool odometry_enabled = false;
  OdometryOptions odometry;
  FusionOptions fusion;
  double gyro_bias_rest = 0.0;  // seconds of initial rest used to estimate gyro bias
  KinematicsModel kinematics = KinematicsModel::SmallAngle;
  double sg_window = 1.0;
  bool highpass = true;
  double highpass_cutoff = 70.0;
  double highpass_spacing = 0.25;
  double twist_base = 3.0;
  double gap_factor = 3.0;
  unsigned threads = 0;  // 0: hardware concurrency, capped by RAILGAUGE_THREADS
  FitOptions fit;
};

/// Overlay JSON values onto `cfg`; unknown keys are rejected.
void apply_config_json(PipelineConfig& cfg, const std::string& json_text, const std::string& source);
std::string config_to_json(const PipelineConfig& cfg);

struct FrameInput {
  long long id = 0;
  double t = 0.0;
  std::vector<PixelPoint> left;
  std::vector<PixelPoint> right;
};

struct RunInputs {
  std::vector<ImuSample> imu;
  std::vector<double> encoder_t;
  std::vector<double> encoder_s;
  std::vector<FrameInput> frames;
  CameraLaser left;
  CameraLaser right;
  TrackLayout layout;
  RailProfileTemplate profile = default_template();
};

struct FramePair {
  long long id = 0;
  double t = 0.0;
  Vec2 left_origin = Vec2::Zero();   // u_Olrp in TGMS (y, z)
  Vec2 right_origin = Vec2::Zero();  // u_Orrp in TGMS (y, z)
  double left_roll = 0.0;
  double right_roll = 0.0;
  double left_rms = 0.0;
  double right_rms = 0.0;
  bool converged = true;
};

/// Fit both rails of one frame.
FramePair fit_frame(const FrameInput& frame, const CameraLaser& left, const CameraLaser& right,
                    const RailProfileTemplate& t, const FitOptions& opt = {});

/// (gv, cl) from the rail-profile origins and the TGMS roll relative to the track.
Vec2 relative_irregularities(const FramePair& fp, double phi, double half_gauge);

/// (al, vp) from the rail-profile origins, roll and TGMS offset.
Vec2 absolute_irregularities(const FramePair& fp, double phi, double r_y, double r_z);

/// Inputs of the relative-motion equation at one instant.
struct OdeInput {
  TrackFrameState track;
  Vec3 accel = Vec3::Zero();
  Euler euler;
  double v = 0.0;
  double v_dot = 0.0;
};

/// Right-hand side for tangent track: small-angle rotated accelerometer
/// minus gravity.
Vec2 straight_track_rhs(const Vec3& accel, const Euler& euler);

/// Forcing term (everything that does not multiply r or rdot).
Vec2 relative_motion_forcing(const OdeInput& in, KinematicsModel model);
Mat2 relative_motion_damping(const OdeInput& in, KinematicsModel model);
Mat2 relative_motion_stiffness(const OdeInput& in, KinematicsModel model);

/// State (r_y, r_z, rdot_y, rdot_z).
using OdeState = Eigen::Vector4d;

OdeState relative_motion_derivative(const OdeState& x, const OdeInput& in, KinematicsModel model);

OdeState rk4_step(const OdeState& x, const OdeInput& in0, const OdeInput& mid, const OdeInput& in1,
                  double h, KinematicsModel model);

/// Fixed-step RK4 over the sample times; `midpoints[k]` holds the inputs at
/// (t[k] + t[k+1]) / 2.
std::vector<OdeState> integrate_relative_motion(const std::vector<double>& t,
                                                const std::vector<OdeInput>& inputs,
                                                const std::vector<OdeInput>& midpoints,
                                                KinematicsModel model, const OdeState& x0 = OdeState::Zero());

struct TwistSeries {
  std::vector<double> tw;
  std::vector<bool> available;
};

/// tw(s) = (cl(s) - cl(s - base)) / base with linear interpolation.
TwistSeries twist(const std::vector<double>& s, const std::vector<double>& cl, double base);

struct AttitudeRecord {
  double t;
  Euler euler;
};

struct MotionRecord {
  double t;
  double s_app;
  double s_ref;
  double v;
  double v_dot;
  double r_y;
  double r_z;
};

struct PipelineResult {
  std::vector<IrregularityRecord> records;
  std::vector<int> quality;
  std::vector<FramePair> frames;
  std::vector<AttitudeRecord> attitude;
  std::vector<MotionRecord> motion;
  std::vector<Anchor> anchors;
  std::vector<Ne2Sample> ne2;
  std::size_t quarantined = 0;
};

unsigned worker_count(unsigned requested);

/// Encoder arc length resampled to the IMU clock, with the odometry
/// correction applied when enabled.
struct OdometryOutput {
  std::size_t imu_first = 0;  // index of the first IMU sample inside the encoder span
  std::vector<double> t;
  std::vector<double> s_app;
  std::vector<double> s_ref;
  std::vector<double> v;
  std::vector<double> v_dot;
  std::vector<Anchor> anchors;
  std::vector<Ne2Sample> ne2;
};

OdometryOutput run_odometry(const RunInputs& in, const Track& track, const PipelineConfig& cfg);

PipelineResult run_pipeline(const RunInputs& in, const PipelineConfig& cfg);

}  // namespace railgauge
