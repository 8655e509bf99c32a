#include "railgauge/calibration.hpp"

#include "railgauge/csv.hpp"

#include <cmath>

namespace railgauge {

namespace {

using Mat4 = Eigen::Matrix4d;

// Isotropic normalisation: centroid to the origin, mean distance sqrt(dim).
template <int N>
Eigen::Matrix<double, N + 1, N + 1> normaliser(const std::vector<Eigen::Matrix<double, N, 1>>& pts) {
  Eigen::Matrix<double, N, 1> c = Eigen::Matrix<double, N, 1>::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  const double s = std::sqrt(static_cast<double>(N)) / mean;
  Eigen::Matrix<double, N + 1, N + 1> t = Eigen::Matrix<double, N + 1, N + 1>::Identity();
  t.template topLeftCorner<N, N>() *= s;
  t.template topRightCorner<N, 1>() = -s * c;
  return t;
}

void check_configuration(const std::vector<Vec3>& points) {
  if (points.size() < 6) {
    throw DegenerateError("camera calibration needs at least 6 correspondences, got " +
                          std::to_string(points.size()));
  }
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  Eigen::MatrixXd m(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = (points[i] - c).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto sv = svd.singularValues();
  if (sv(2) < 1e-6 * sv(0)) throw DegenerateError("calibration points are coplanar");
}

CameraModel model_from(const Eigen::Matrix<double, 11, 1>& v) {
  Mat3 k;
  k << v(0), v(1), v(2), 0.0, v(3), v(4), 0.0, 0.0, 1.0;
  return CameraModel(k, v.segment<3>(8), Euler{v(5), v(6), v(7)});
}

Eigen::Matrix<double, 11, 1> params_from(const CameraModel& cam) {
  Eigen::Matrix<double, 11, 1> v;
  const Mat3& k = cam.intrinsics();
  v << k(0, 0), k(0, 1), k(0, 2), k(1, 1), k(1, 2), cam.euler().roll, cam.euler().pitch,
      cam.euler().yaw, cam.position();
  return v;
}

Eigen::VectorXd residuals(const CameraModel& cam, const std::vector<Vec3>& pts,
                          const std::vector<PixelPoint>& px) {
  Eigen::VectorXd r(2 * pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    r.segment<2>(2 * static_cast<Eigen::Index>(i)) = project(cam, pts[i]) - px[i];
  }
  return r;
}

CameraModel refine(const CameraModel& start, const std::vector<Vec3>& pts,
                   const std::vector<PixelPoint>& px, int iterations) {
  Eigen::Matrix<double, 11, 1> v = params_from(start);
  Eigen::VectorXd r = residuals(start, pts, px);
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd j(r.size(), 11);
    for (int k = 0; k < 11; ++k) {
      const double h = 1e-7 * std::max(1.0, std::abs(v(k)));
      Eigen::Matrix<double, 11, 1> vp = v, vm = v;
      vp(k) += h;
      vm(k) -= h;
      j.col(k) = (residuals(model_from(vp), pts, px) - residuals(model_from(vm), pts, px)) / (2 * h);
    }
    const Eigen::Matrix<double, 11, 1> dv = j.colPivHouseholderQr().solve(-r);
    const Eigen::Matrix<double, 11, 1> vn = v + dv;
    Eigen::VectorXd rn;
    try {
      rn = residuals(model_from(vn), pts, px);
    } catch (const NumericalError&) {
      break;
    } catch (const ValidationError&) {
      break;
    }
    if (rn.squaredNorm() >= r.squaredNorm()) break;
    v = vn;
    r = rn;
  }
  return model_from(v);
}

}  // namespace

CalibrationSet load_correspondences(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::size_t tag = t.column("tag"), cx = t.column("X"), cy = t.column("Y"),
                    cz = t.column("Z"), px = t.column("px"), py = t.column("py");
  CalibrationSet set;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const Vec3 u{t.number(r, cx), t.number(r, cy), t.number(r, cz)};
    const std::string& kind = t.rows[r][tag];
    if (kind == "P") {
      set.pattern_points.push_back(u);
      set.pattern_pixels.push_back({t.number(r, px), t.number(r, py)});
    } else if (kind == "Q") {
      set.laser_points.push_back(u);
    } else {
      throw InputError(path + ": unknown tag '" + kind + "' (expected P or Q)");
    }
  }
  return set;
}

void save_correspondences(const CalibrationSet& set, const std::string& path) {
  CsvWriter w(path, {"tag", "X", "Y", "Z", "px", "py"});
  for (std::size_t i = 0; i < set.pattern_points.size(); ++i) {
    const auto& u = set.pattern_points[i];
    w.cell(std::string("P")).cell(u.x()).cell(u.y()).cell(u.z());
    w.cell(set.pattern_pixels[i].x()).cell(set.pattern_pixels[i].y());
    w.end_row();
  }
  for (const auto& u : set.laser_points) {
    w.cell(std::string("Q")).cell(u.x()).cell(u.y()).cell(u.z()).cell(std::string()).cell(std::string());
    w.end_row();
  }
}

Mat34 estimate_projection(const std::vector<Vec3>& points, const std::vector<PixelPoint>& pixels) {
  if (points.size() != pixels.size()) throw InputError("point and pixel counts differ");
  check_configuration(points);
  const Mat4 t3 = normaliser<3>(points);
  const Mat3 t2 = normaliser<2>(pixels);
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec4 x = t3 * points[i].homogeneous();
    const Vec3 m = t2 * pixels[i].homogeneous();
    const double u = m.x() / m.z(), v = m.y() / m.z();
    a.block<1, 4>(2 * i, 0) = x.transpose();
    a.block<1, 4>(2 * i, 8) = -u * x.transpose();
    a.block<1, 4>(2 * i + 1, 4) = x.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -v * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  if (sv(10) < 1e-12 * sv(0)) throw DegenerateError("correspondence matrix is rank deficient");
  const Eigen::VectorXd h = svd.matrixV().col(11);
  Mat34 pn;
  pn << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(), h.segment<4>(8).transpose();
  Mat34 p = t2.inverse() * pn * t3;
  return p / p.norm();
}

Decomposition decompose_projection(const Mat34& p_in) {
  Mat34 p = p_in;
  Mat3 m = p.leftCols<3>();
  if (m.determinant() < 0.0) {
    p = -p;
    m = -m;
  }
  // RQ through QR of the row-reversed transpose.
  Mat3 j = Mat3::Zero();
  j(0, 2) = j(1, 1) = j(2, 0) = 1.0;
  Eigen::HouseholderQR<Mat3> qr((j * m).transpose());
  const Mat3 q = qr.householderQ();
  const Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();
  Mat3 k = j * r.transpose() * j;
  Mat3 rot = j * q.transpose();
  const Mat3 d = k.diagonal().cwiseSign().asDiagonal();
  k = k * d;
  rot = d * rot;
  if (rot.determinant() < 0.0) throw DegenerateError("projection matrix decomposition failed");
  const Vec3 t = k.triangularView<Eigen::Upper>().solve(Vec3(p.col(3)));
  Decomposition out;
  out.intrinsics = k / k(2, 2);
  out.intrinsics(1, 0) = out.intrinsics(2, 0) = out.intrinsics(2, 1) = 0.0;
  out.orientation = rot.transpose();
  out.position = -rot.transpose() * t;
  return out;
}

double reprojection_rms(const CameraModel& cam, const std::vector<Vec3>& points,
                        const std::vector<PixelPoint>& pixels) {
  if (points.empty()) return 0.0;
  return std::sqrt(residuals(cam, points, pixels).squaredNorm() / static_cast<double>(points.size()));
}

CameraCalibration calibrate_camera(const CalibrationSet& set, const CameraCalibrationOptions& opt) {
  const Mat34 p = estimate_projection(set.pattern_points, set.pattern_pixels);
  const Decomposition d = decompose_projection(p);
  CameraCalibration out;
  out.camera = CameraModel(d.intrinsics, d.position, euler_from_rotation(d.orientation));
  if (opt.refine) {
    out.camera = refine(out.camera, set.pattern_points, set.pattern_pixels, opt.refine_iterations);
  }
  out.projection = out.camera.projection();
  out.reprojection_rms = reprojection_rms(out.camera, set.pattern_points, set.pattern_pixels);
  out.quality_warning = out.reprojection_rms > opt.warn_rms;
  return out;
}

PlaneFit fit_laser_plane(const std::vector<Vec3>& points) {
  if (points.size() < 3) throw DegenerateError("laser plane fit needs at least 3 points");
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  Eigen::MatrixXd m(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = (points[i] - c).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  if (sv(1) < 1e-9 * std::max(sv(0), 1e-300)) throw DegenerateError("laser points are collinear");
  const Vec3 n = svd.matrixV().col(2);
  PlaneFit out{LaserPlane(n.x(), n.y(), n.z(), -n.dot(c)), 0.0};
  double ss = 0.0;
  for (const auto& p : points) ss += out.plane.residual(p) * out.plane.residual(p);
  out.rms = std::sqrt(ss / static_cast<double>(points.size()));
  return out;
}

CameraLaser calibrate(const CalibrationSet& set, const CameraCalibrationOptions& opt) {
  const CameraCalibration cam = calibrate_camera(set, opt);
  const PlaneFit plane = fit_laser_plane(set.laser_points);
  return {cam.camera, plane.plane, cam.reprojection_rms, cam.quality_warning};
}

}  // namespace railgauge
