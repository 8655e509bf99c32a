#include "railgauge/vision.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace railgauge;

namespace {

CameraModel oracle_camera() {
  Mat3 k;
  k << 2100.0, 3.0, 0.0, 0.0, 1980.0, 0.0, 0.0, 0.0, 1.0;
  return CameraModel(k, {-0.35, -0.4, 0.45}, {-1.9, 0.6, -2.0});
}

}  // namespace

TEST_CASE("projection matches an independent pinhole evaluation") {
  // numpy: K A^T (u - c) with A from scipy Rotation.from_euler('ZYX')
  const CameraModel cam = oracle_camera();
  const auto a = project_with_scale(cam, {0.0, -0.75, 0.0});
  CHECK(a.pixel.x() == doctest::Approx(1579.1119946650883).epsilon(1e-12));
  CHECK(a.pixel.y() == doctest::Approx(410.0534413065013).epsilon(1e-12));
  CHECK(a.scale == doctest::Approx(0.5275564655507834).epsilon(1e-12));
  const auto b = project(cam, {0.01, -0.7, -0.03});
  CHECK(b.x() == doctest::Approx(1467.1804938777284).epsilon(1e-12));
  CHECK(b.y() == doctest::Approx(604.8708904281007).epsilon(1e-12));
}

TEST_CASE("triangulation inverts projection on the laser plane") {
  const CameraModel cam = oracle_camera();
  const LaserPlane plane(1.0, 0.02, -0.01, -0.003);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> y(-0.85, -0.65), z(-0.08, 0.05);
  for (int i = 0; i < 200; ++i) {
    Vec3 u{0.0, y(rng), z(rng)};
    u.x() = -(plane.d() + plane.normal().y() * u.y() + plane.normal().z() * u.z()) / plane.normal().x();
    const Vec3 back = triangulate_on_plane(cam, plane, project(cam, u));
    CHECK((back - u).norm() < 1e-12);
    CHECK(std::abs(plane.residual(back)) < 1e-14);
  }
}

TEST_CASE("geometric failures are reported") {
  const Mat3 k = Vec3(1000.0, 1000.0, 1.0).asDiagonal();
  const CameraModel cam(k, Vec3::Zero(), {});
  CHECK_THROWS_AS(project(cam, {0.0, 0.0, -1.0}), BehindCameraError);
  const LaserPlane parallel(1.0, 0.0, 0.0, -0.5);
  CHECK_THROWS_AS(triangulate_on_plane(cam, parallel, {0.0, 0.0}), GeometryError);
  const LaserPlane behind(0.0, 0.0, 1.0, 1.0);
  CHECK_THROWS_AS(triangulate_on_plane(cam, behind, {0.0, 0.0}), BehindCameraError);
  Mat3 lower = k;
  lower(1, 0) = 0.5;
  CHECK_THROWS_AS(CameraModel(lower, Vec3::Zero(), {}), ValidationError);
}

TEST_CASE("laser plane coefficients are canonical") {
  const LaserPlane a(2.0, 0.0, 0.0, 1.0);
  CHECK(a.normal().x() == doctest::Approx(-1.0));
  CHECK(a.d() == doctest::Approx(-0.5));
  const LaserPlane b(0.0, -3.0, 0.0, 0.0);
  CHECK(b.normal().y() == doctest::Approx(1.0));
  CHECK_THROWS_AS(LaserPlane(0.0, 0.0, 0.0, 1.0), ValidationError);
}

TEST_CASE("camera file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "railgauge_camera_test.json";
  CameraLaser c{oracle_camera(), LaserPlane(1.0, 0.01, 0.0, -0.002), 0.25, false};
  save_camera_file(c, path.string());
  const CameraLaser r = load_camera_file(path.string());
  CHECK((r.camera.projection() - c.camera.projection()).norm() < 1e-12);
  CHECK((r.plane.coefficients() - c.plane.coefficients()).norm() < 1e-15);
  CHECK(r.reprojection_rms == 0.25);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_camera_file(path.string()), InputError);
}
