#pragma once

#include "railgauge/calibration.hpp"
#include "railgauge/pipeline.hpp"
#include "railgauge/run_io.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace railgauge {

/// Piecewise-linear speed V(t) through (t, V) knots; constant after the last knot.
class SpeedProfile {
 public:
  SpeedProfile() : SpeedProfile({{0.0, 20.0}}) {}
  explicit SpeedProfile(std::vector<std::pair<double, double>> knots);

  double speed(double t) const;
  double accel(double t) const;
  /// Distance travelled since t = 0.
  double distance(double t) const;
  /// First time at which distance(t) reaches d; nothing if never.
  std::optional<double> time_at_distance(double d) const;

 private:
  std::vector<std::pair<double, double>> knots_;
  std::vector<double> dist_;  // distance at each knot
};

struct Sinusoid {
  double amplitude = 0.0;
  double frequency = 0.0;  // Hz
  double phase = 0.0;
  double offset = 0.0;

  double value(double t) const;
  double rate(double t) const;
  double accel(double t) const;
};

struct MotionSpec {
  Sinusoid r_y, r_z, roll, pitch, yaw;

  RelativeMotion at(double t) const;
};

struct SpatialSinusoid {
  std::string channel;  // al, vp, gv or cl
  double amplitude = 0.0;
  double wavelength = 1.0;
  double phase = 0.0;
};

struct ChannelStep {
  std::string channel;
  double s = 0.0;
  double value = 0.0;
};

struct IrregularitySpec {
  double spacing = 0.25;
  std::vector<SpatialSinusoid> sinusoids;
  std::vector<ChannelStep> steps;
};

IrregularityField make_irregularity_field(const IrregularitySpec& spec, double s0, double s1);

struct NoiseSpec {
  double accel = 0.0;
  double gyro = 0.0;
  double pixel = 0.0;
  double encoder = 0.0;
  double drift = 1.0;  // s_app / s scale
  Vec3 gyro_bias = Vec3::Zero();
};

struct ScenarioConfig {
  TrackLayout layout;
  IrregularityField field;
  bool field_given = false;
  IrregularitySpec irregularities;
  SpeedProfile speed;
  double s_start = 10.0;
  double duration = 0.0;  // 0: run until 10 m before the layout end
  MotionSpec motion;
  double imu_rate = 200.0;
  double encoder_rate = 100.0;
  double camera_rate = 50.0;
  NoiseSpec noise;
  CameraLaser left;
  CameraLaser right;
  RailProfileTemplate profile = default_template();
  int points_per_rail = 60;
  std::uint64_t seed = 1;
  double twist_base = 3.0;
  int image_width = 1280;
  int image_height = 1024;
};

/// Reference measuring head: camera inside the track looking at the rail
/// head, laser plane x = 0. The left head mirrors the right one.
CameraLaser default_camera_laser(Side side);

ScenarioConfig default_scenario(const TrackLayout& layout);

/// Relative paths inside the file are resolved against its directory.
ScenarioConfig load_scenario(const std::string& path);

struct MotionTruth {
  double t;
  double s;
  RelativeMotion motion;
};

struct Simulation {
  RunInputs inputs;
  RecordSet truth;
  std::vector<MotionTruth> motion;  // at IMU times
  std::vector<double> frame_s;      // true s of each frame
  IrregularityField field;
  double s_start = 0.0;
};

Simulation simulate(const ScenarioConfig& cfg);

/// Writes the run directory consumed by load_run.
void write_simulation(const Simulation& sim, const ScenarioConfig& cfg, const std::string& dir);

/// Laser-slice point of profile parameter alpha for the TGMS pose at
/// arc length s. Returns the point in TGMS coordinates.
std::optional<Vec3> laser_slice_point(const Track& track, const IrregularityField& field,
                                      const TrackFrameState& state, const RelativeMotion& motion,
                                      const LaserPlane& plane, Side side, const Vec2& u_hat);

/// Trihedral pattern (15 P points on three orthogonal planes, 6 Q points on the
/// laser line) observed by `head`; pixel noise sigma in px.
CalibrationSet synthetic_trihedral(const CameraLaser& head, Side side, double pixel_sigma,
                                   std::mt19937_64& rng);

}  // namespace railgauge
