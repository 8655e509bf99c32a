#include "railgauge/layout_io.hpp"
#include "railgauge/track_model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace railgauge;

namespace {

TrackLayout spiral_layout() {
  TrackLayout l;
  l.half_gauge = 0.7525;
  l.horizontal = {{HorizontalKind::Straight, 50.0, 0.0, 0.0, 0.0, 0.0},
                  {HorizontalKind::Transition, 100.0, 0.0, 1.0 / 300.0, 0.0, 0.0},
                  {HorizontalKind::Circular, 150.0, 1.0 / 300.0, 1.0 / 300.0, 0.0, 0.0}};
  l.vertical = {{VerticalKind::ConstantSlope, 300.0, 0.0, 0.0}};
  return l;
}

TrackLayout canted_crest_layout() {
  TrackLayout l;
  l.half_gauge = 0.7525;
  l.horizontal = {{HorizontalKind::Straight, 40.0, 0.0, 0.0, 0.0, 0.0},
                  {HorizontalKind::Transition, 80.0, 0.0, -1.0 / 400.0, 0.0, -0.08},
                  {HorizontalKind::Circular, 80.0, -1.0 / 400.0, -1.0 / 400.0, -0.08, -0.08}};
  l.vertical = {{VerticalKind::ConstantSlope, 30.0, 0.004, 0.004},
                {VerticalKind::Transition, 120.0, 0.004, -0.006},
                {VerticalKind::ConstantSlope, 50.0, -0.006, -0.006}};
  return l;
}

}  // namespace

TEST_CASE("positions match quadrature of the heading") {
  // scipy.integrate.quad of (cos psi, sin psi) along the clothoid and arc
  const Track track(spiral_layout());
  const Vec3 p120 = track.position_at(120.0);
  CHECK(p120.x() == doctest::Approx(119.95332830196784).epsilon(1e-11));
  CHECK(p120.y() == doctest::Approx(1.9046479626800896).epsilon(1e-11));
  const Vec3 p250 = track.position_at(250.0);
  CHECK(p250.x() == doctest::Approx(243.78140099106383).epsilon(1e-11));
  CHECK(p250.y() == doctest::Approx(38.11274326739451).epsilon(1e-11));
  CHECK(track.frame_at(250.0).psi == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p250.z() == 0.0);
}

TEST_CASE("vertical transition descends with positive slope") {
  TrackLayout l;
  l.half_gauge = 0.75;
  l.horizontal = {{HorizontalKind::Straight, 200.0, 0.0, 0.0, 0.0, 0.0}};
  l.vertical = {{VerticalKind::Transition, 200.0, 0.0, 0.01}};
  const Track track(l);
  const Vec3 p = track.position_at(200.0);
  CHECK(p.x() == doctest::Approx(199.99666668333327).epsilon(1e-12));
  CHECK(p.z() == doctest::Approx(-0.9999916666944445).epsilon(1e-10));
  const auto st = track.frame_at(100.0);
  CHECK(st.rho_v == doctest::Approx(0.01 / 200.0));
  CHECK(st.theta == doctest::Approx(0.005));
}

TEST_CASE("frame is tangent to the centerline and curvatures are derivatives") {
  const Track track(canted_crest_layout());
  const double h = 1e-4;
  for (double s = 1.0; s < 199.0; s += 7.3) {
    const auto st = track.frame_at(s);
    const Vec3 d = (track.position_at(s + h) - track.position_at(s - h)) / (2 * h);
    CHECK((d - st.orientation.col(0)).norm() < 1e-7);
    CHECK((st.orientation.transpose() * st.orientation - Mat3::Identity()).norm() < 1e-14);
    const auto a = track.frame_at(s - h), b = track.frame_at(s + h);
    CHECK((b.psi - a.psi) / (2 * h) == doctest::Approx(st.rho_h).epsilon(1e-6));
    CHECK((b.theta - a.theta) / (2 * h) == doctest::Approx(st.rho_v).epsilon(1e-6));
    CHECK((b.phi - a.phi) / (2 * h) == doctest::Approx(st.rho_tw).epsilon(1e-6));
  }
}

TEST_CASE("small-angle track rotation agrees to second order") {
  const Mat3 exact = rotation_from_euler({0.002, -0.003, 1.1});
  const Mat3 small = small_angle_track_rotation(1.1, -0.003, 0.002);
  CHECK((exact - small).cwiseAbs().maxCoeff() < 2e-5);
  CHECK((exact - small).cwiseAbs().maxCoeff() > 1e-7);
}

TEST_CASE("exact and curvature kinematics coincide on flat track") {
  const Track track(spiral_layout());
  for (double s : {10.0, 80.0, 200.0}) {
    const auto st = track.frame_at(s);
    const auto a = frame_velocity(st, 25.0, 0.4), b = exact_frame_kinematics(st, 25.0, 0.4);
    CHECK((a.acceleration - b.acceleration).norm() < 1e-12);
    CHECK((a.angular_velocity - b.angular_velocity).norm() < 1e-15);
    CHECK((a.angular_acceleration - b.angular_acceleration).norm() < 1e-15);
  }
}

TEST_CASE("body kinematics match differentiated global positions") {
  const Track track(canted_crest_layout());
  const double v = 20.0, a = 0.5, s0 = 60.0;
  RelativeMotion m0;
  m0.r = {0.01, -0.02};
  m0.r_dot = {0.03, 0.01};
  m0.r_ddot = {-0.2, 0.1};
  m0.angles = {0.01, -0.02, 0.015};
  m0.angle_rates = {0.1, -0.05, 0.02};
  m0.angle_accels = {-0.3, 0.2, 0.1};
  auto motion = [&](double t) {
    RelativeMotion m = m0;
    m.r = m0.r + m0.r_dot * t + 0.5 * m0.r_ddot * t * t;
    m.r_dot = m0.r_dot + m0.r_ddot * t;
    m.angles = Euler::from_vector(m0.angles.as_vector() + m0.angle_rates * t + 0.5 * m0.angle_accels * t * t);
    m.angle_rates = m0.angle_rates + m0.angle_accels * t;
    return m;
  };
  auto s_of = [&](double t) { return s0 + v * t + 0.5 * a * t * t; };
  const Vec3 u{0.2, -0.5, 0.3};
  auto p = [&](double t) {
    return body_point_global(track.frame_at(s_of(t)), motion(t), u, RotationModel::Exact);
  };
  const double h = 1e-3;
  const Vec3 vel = (p(h) - p(-h)) / (2 * h);
  const Vec3 acc = (p(h) - 2 * p(0.0) + p(-h)) / (h * h);
  const auto st = track.frame_at(s0);
  const auto k = body_kinematics(m0, exact_frame_kinematics(st, v, a), u, RotationModel::Exact);
  CHECK((st.orientation * k.velocity - vel).norm() < 1e-6);
  CHECK((st.orientation * k.acceleration - acc).norm() < 1e-4);
}

TEST_CASE("irregularity channels invert") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.005);
  for (int i = 0; i < 100; ++i) {
    const RailOffsets r{n(rng), n(rng), n(rng), n(rng)};
    const auto rec = irregularities_from_rails(1.0, r);
    const auto back = irregularities_to_rails(rec);
    CHECK(back.y_left == doctest::Approx(r.y_left).epsilon(1e-15));
    CHECK(back.z_right == doctest::Approx(r.z_right).epsilon(1e-15));
  }
  const auto rec = irregularities_from_rails(0.0, {0.003, 0.002, -0.001, 0.004});
  CHECK(rec.al == doctest::Approx(0.001));
  CHECK(rec.vp == doctest::Approx(0.003));
  CHECK(rec.gv == doctest::Approx(0.004));
  CHECK(rec.cl == doctest::Approx(-0.002));
}

TEST_CASE("layout validation and range errors") {
  auto l = spiral_layout();
  l.horizontal[2].curvature_start = 1.0 / 310.0;
  CHECK_THROWS_AS(validate(l), ValidationError);
  l = spiral_layout();
  l.vertical[0].length = 299.0;
  CHECK_THROWS_AS(validate(l), ValidationError);
  const Track track(spiral_layout());
  CHECK_THROWS_AS(track.frame_at(300.5), RangeError);
  CHECK_THROWS_AS(track.frame_at(-0.1), RangeError);
}

TEST_CASE("layout text round trip") {
  std::istringstream in(
      "half_gauge 0.7525\nrail_inclination 0.025\n"
      "H straight 50 inf inf 0 0\nH transition 100 inf -300 0 0.1\n"
      "H circular 20 -300 -300 0.1 0.1  # comment\nV slope 170 0.002 0.002\n");
  const TrackLayout l = parse_layout(in, "inline");
  REQUIRE(l.horizontal.size() == 3);
  CHECK(l.horizontal[1].curvature_end == doctest::Approx(-1.0 / 300.0));
  std::istringstream bad("half_gauge 0.75\nH wiggly 1 inf inf 0 0\n");
  CHECK_THROWS_AS(parse_layout(bad, "bad"), InputError);
}

TEST_CASE("rail-profile frames include the cross-level rotation") {
  const auto f = rail_profile_frames(0.025, 0.0, 0.75);
  CHECK((f.left - rotation_x(0.025)).norm() < 1e-16);
  CHECK((f.right - rotation_x(-0.025)).norm() < 1e-16);
  const auto g = rail_profile_frames(0.0, 0.015, 0.75);
  CHECK((g.left - rotation_x(0.01)).norm() < 1e-16);
}
