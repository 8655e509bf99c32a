#include "railgauge/vision.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace railgauge {

namespace {
constexpr double kMinDepth = 1e-9;
constexpr double kParallelTol = 1e-10;
}  // namespace

CameraModel::CameraModel(const Mat3& intrinsics, const Vec3& position, const Euler& euler)
    : m_int_(intrinsics), position_(position), euler_(euler) {
  if (m_int_(1, 0) != 0.0 || m_int_(2, 0) != 0.0 || m_int_(2, 1) != 0.0) {
    throw ValidationError("intrinsic matrix must be upper triangular");
  }
  if (!(m_int_(0, 0) > 0.0 && m_int_(1, 1) > 0.0 && m_int_(2, 2) > 0.0)) {
    throw ValidationError("intrinsic matrix must have a positive diagonal");
  }
  orientation_ = rotation_from_euler(euler_);
  m_ext_.leftCols<3>() = orientation_.transpose();
  m_ext_.col(3) = -orientation_.transpose() * position_;
  p_ = m_int_ * m_ext_;
}

LaserPlane::LaserPlane(double a, double b, double c, double d) {
  Vec3 n{a, b, c};
  const double norm = n.norm();
  if (!(norm > 0.0) || !std::isfinite(norm) || !std::isfinite(d)) {
    throw ValidationError("laser plane normal must be finite and nonzero");
  }
  n /= norm;
  d /= norm;
  // Canonical sign: D <= 0, or first nonzero normal component positive when D = 0.
  bool flip = d > 0.0;
  if (d == 0.0) {
    for (int i = 0; i < 3; ++i) {
      if (n[i] != 0.0) {
        flip = n[i] < 0.0;
        break;
      }
    }
  }
  if (flip) {
    n = -n;
    d = -d;
  }
  normal_ = n;
  d_ = d;
}

Projection project_with_scale(const CameraModel& cam, const Vec3& u) {
  const Vec3 h = cam.projection().leftCols<3>() * u + cam.projection().col(3);
  if (!(h.z() > kMinDepth)) {
    throw BehindCameraError("point is behind the camera (c = " + std::to_string(h.z()) + ")");
  }
  return {{h.x() / h.z(), h.y() / h.z()}, h.z()};
}

PixelPoint project(const CameraModel& cam, const Vec3& u) { return project_with_scale(cam, u).pixel; }

Vec3 triangulate_on_plane(const CameraModel& cam, const LaserPlane& plane, const PixelPoint& n) {
  const Vec3 nh{n.x(), n.y(), 1.0};
  const Vec3 ray = cam.orientation() * cam.intrinsics().triangularView<Eigen::Upper>().solve(nh);
  if (std::abs(ray.normalized().dot(plane.normal())) <= kParallelTol) {
    throw GeometryError("pixel ray is parallel to the laser plane");
  }
  Eigen::Matrix4d m;
  m.topLeftCorner<3, 3>() = cam.projection().leftCols<3>();
  m.topRightCorner<3, 1>() = -nh;
  m.bottomLeftCorner<1, 3>() = plane.normal().transpose();
  m(3, 3) = 0.0;
  Vec4 rhs;
  rhs.head<3>() = -cam.projection().col(3);
  rhs(3) = -plane.d();
  const Vec4 x = m.partialPivLu().solve(rhs);
  if (!(x(3) > 0.0)) throw BehindCameraError("laser point lies behind the camera");
  return x.head<3>();
}

TriangulatedCloud triangulate_cloud(const CameraModel& cam, const LaserPlane& plane,
                                    const std::vector<PixelPoint>& pixels) {
  if (pixels.empty()) throw InputError("empty pixel list");
  TriangulatedCloud out;
  out.points.reserve(pixels.size());
  for (const auto& px : pixels) {
    try {
      out.points.push_back(triangulate_on_plane(cam, plane, px));
    } catch (const GeometryError&) {
      ++out.dropped;
    }
  }
  if (out.points.empty()) throw GeometryError("every pixel of the cloud failed triangulation");
  return out;
}

CameraLaser load_camera_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open camera file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
    const auto k = j.at("intrinsics").get<std::vector<double>>();
    const auto u = j.at("position").get<std::vector<double>>();
    const auto e = j.at("euler").get<std::vector<double>>();
    const auto p = j.at("laser_plane").get<std::vector<double>>();
    if (k.size() != 9 || u.size() != 3 || e.size() != 3 || p.size() != 4) {
      throw InputError("wrong array sizes");
    }
    Mat3 m;
    m << k[0], k[1], k[2], k[3], k[4], k[5], k[6], k[7], k[8];
    CameraLaser cl{CameraModel(m, {u[0], u[1], u[2]}, {e[0], e[1], e[2]}),
                   LaserPlane(p[0], p[1], p[2], p[3]), j.value("reprojection_rms", 0.0),
                   j.value("quality_warning", false)};
    return cl;
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(path + ": " + ex.what());
  } catch (const InputError& ex) {
    throw InputError(path + ": " + ex.what());
  }
}

void save_camera_file(const CameraLaser& p, const std::string& path) {
  nlohmann::json j;
  j["format"] = "railgauge camera/laser parameters";
  j["conventions"] =
      "pixels relative to the principal point; euler = roll, pitch, yaw of the camera frame in "
      "the TGMS frame, A = Rz(yaw) Ry(pitch) Rx(roll); plane A x + B y + C z + D = 0 in the "
      "TGMS frame";
  const Mat3& k = p.camera.intrinsics();
  j["intrinsics"] = {k(0, 0), k(0, 1), k(0, 2), k(1, 0), k(1, 1), k(1, 2), k(2, 0), k(2, 1), k(2, 2)};
  const Vec3& u = p.camera.position();
  j["position"] = {u.x(), u.y(), u.z()};
  const Euler& e = p.camera.euler();
  j["euler"] = {e.roll, e.pitch, e.yaw};
  const Vec4 c = p.plane.coefficients();
  j["laser_plane"] = {c(0), c(1), c(2), c(3)};
  j["reprojection_rms"] = p.reprojection_rms;
  j["quality_warning"] = p.quality_warning;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace railgauge
