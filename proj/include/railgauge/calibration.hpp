#pragma once

#include "railgauge/vision.hpp"

#include <string>
#include <vector>

namespace railgauge {

/// Trihedral-pattern correspondences in the TGMS frame. P points carry their
/// pixel observations; Q points lie on the laser line and only their 3D
/// positions are needed.
struct CalibrationSet {
  std::vector<Vec3> pattern_points;
  std::vector<PixelPoint> pattern_pixels;
  std::vector<Vec3> laser_points;
};

/// CSV with columns tag,X,Y,Z,px,py; tag is P or Q, pixel cells of Q rows may be empty.
CalibrationSet load_correspondences(const std::string& path);
void save_correspondences(const CalibrationSet& set, const std::string& path);

struct CameraCalibrationOptions {
  bool refine = false;       // Gauss-Newton reprojection refinement
  int refine_iterations = 10;
  double warn_rms = 2.0;     // px
};

struct CameraCalibration {
  CameraModel camera;
  Mat34 projection;
  double reprojection_rms = 0.0;
  bool quality_warning = false;
};

/// Normalised DLT followed by RQ decomposition of the projection matrix.
CameraCalibration calibrate_camera(const CalibrationSet& set,
                                   const CameraCalibrationOptions& opt = {});

/// Direct linear transform only: projection matrix scaled so that ||P|| = 1.
Mat34 estimate_projection(const std::vector<Vec3>& points, const std::vector<PixelPoint>& pixels);

struct Decomposition {
  Mat3 intrinsics;  // K(2,2) = 1
  Mat3 orientation; // A^{tgms,cam}
  Vec3 position;    // u_cam^{tgms}
};

Decomposition decompose_projection(const Mat34& p);

double reprojection_rms(const CameraModel& cam, const std::vector<Vec3>& points,
                        const std::vector<PixelPoint>& pixels);

struct PlaneFit {
  LaserPlane plane;
  double rms = 0.0;
};

/// Total least-squares plane through the points.
PlaneFit fit_laser_plane(const std::vector<Vec3>& points);

CameraLaser calibrate(const CalibrationSet& set, const CameraCalibrationOptions& opt = {});

}  // namespace railgauge
