#pragma once

#include "railgauge/common.hpp"
#include "railgauge/rotation.hpp"

#include <string>
#include <vector>

namespace railgauge {

/// Pixel coordinates relative to the principal point.
using PixelPoint = Vec2;

class CameraModel {
 public:
  CameraModel() : CameraModel(Mat3::Identity(), Vec3::Zero(), Euler{}) {}
  /// Throws ValidationError unless `intrinsics` is upper triangular with a positive diagonal.
  CameraModel(const Mat3& intrinsics, const Vec3& position, const Euler& euler);

  const Mat3& intrinsics() const { return m_int_; }
  const Vec3& position() const { return position_; }
  const Euler& euler() const { return euler_; }
  /// A^{tgms,cam}: camera frame to TGMS frame.
  const Mat3& orientation() const { return orientation_; }
  const Mat34& extrinsics() const { return m_ext_; }
  const Mat34& projection() const { return p_; }

 private:
  Mat3 m_int_;
  Vec3 position_;
  Euler euler_;
  Mat3 orientation_;
  Mat34 m_ext_;
  Mat34 p_;
};

/// A x + B y + C z + D = 0 in the TGMS frame, stored with a unit normal.
class LaserPlane {
 public:
  LaserPlane() : LaserPlane(1.0, 0.0, 0.0, 0.0) {}
  LaserPlane(double a, double b, double c, double d);

  const Vec3& normal() const { return normal_; }
  double d() const { return d_; }
  double residual(const Vec3& p) const { return normal_.dot(p) + d_; }
  Vec4 coefficients() const { return {normal_.x(), normal_.y(), normal_.z(), d_}; }

 private:
  Vec3 normal_;
  double d_;
};

struct Projection {
  PixelPoint pixel;
  double scale;  // the homogeneous factor c (depth along the optical axis)
};

Projection project_with_scale(const CameraModel& cam, const Vec3& u_tgms);
PixelPoint project(const CameraModel& cam, const Vec3& u_tgms);

Vec3 triangulate_on_plane(const CameraModel& cam, const LaserPlane& plane, const PixelPoint& n);

struct TriangulatedCloud {
  std::vector<Vec3> points;
  std::size_t dropped = 0;
};

TriangulatedCloud triangulate_cloud(const CameraModel& cam, const LaserPlane& plane,
                                    const std::vector<PixelPoint>& pixels);

/// Camera and laser parameters of one rail's measuring head, as written by
/// calibration and read by the estimator.
struct CameraLaser {
  CameraModel camera;
  LaserPlane plane;
  double reprojection_rms = 0.0;
  bool quality_warning = false;
};

CameraLaser load_camera_file(const std::string& path);
void save_camera_file(const CameraLaser& params, const std::string& path);

}  // namespace railgauge
