#include "railgauge/layout_io.hpp"
#include "railgauge/sensor_sim.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace railgauge;

namespace {

TrackLayout straight(double length) {
  std::istringstream in("half_gauge 0.7525\nH straight " + std::to_string(length) +
                        " inf inf 0 0\nV slope " + std::to_string(length) + " 0 0\n");
  return parse_layout(in, "straight");
}

}  // namespace

TEST_CASE("speed profile integrates piecewise-linear knots") {
  const SpeedProfile p({{0.0, 10.0}, {10.0, 20.0}, {15.0, 20.0}});
  CHECK(p.speed(5.0) == doctest::Approx(15.0));
  CHECK(p.accel(5.0) == doctest::Approx(1.0));
  CHECK(p.accel(12.0) == 0.0);
  CHECK(p.distance(10.0) == doctest::Approx(150.0));
  CHECK(p.distance(20.0) == doctest::Approx(350.0));
  CHECK(*p.time_at_distance(150.0) == doctest::Approx(10.0));
  CHECK(*p.time_at_distance(52.5) == doctest::Approx(-10.0 + std::sqrt(205.0)).epsilon(1e-12));
  const SpeedProfile stop({{0.0, 2.0}, {1.0, 0.0}});
  CHECK_FALSE(stop.time_at_distance(5.0).has_value());
}

TEST_CASE("sinusoid derivatives") {
  const Sinusoid s{0.01, 1.3, 0.4, 0.002};
  const double h = 1e-5;
  for (double t : {0.0, 0.37, 1.9}) {
    CHECK(s.rate(t) == doctest::Approx((s.value(t + h) - s.value(t - h)) / (2 * h)).epsilon(1e-8));
    CHECK(s.accel(t) == doctest::Approx((s.rate(t + h) - s.rate(t - h)) / (2 * h)).epsilon(1e-8));
  }
}

TEST_CASE("irregularity field channels") {
  IrregularitySpec spec;
  spec.sinusoids = {{"gv", 0.002, 20.0, 0.0}, {"vp", 0.003, 40.0, 0.5}};
  spec.steps = {{"cl", 50.0, 0.001}};
  const IrregularityField f = make_irregularity_field(spec, 0.0, 100.0);
  for (double s : {10.0, 33.0, 75.25}) {
    const auto rec = irregularities_from_rails(s, f.at(s));
    CHECK(rec.gv == doctest::Approx(0.002 * std::sin(2 * 3.141592653589793 * s / 20.0)).epsilon(1e-12));
    CHECK(rec.vp == doctest::Approx(0.003 * std::sin(2 * 3.141592653589793 * s / 40.0 + 0.5)).epsilon(1e-12));
    CHECK(rec.al == doctest::Approx(0.0));
    CHECK(rec.cl == doctest::Approx(s >= 50.0 ? 0.001 : 0.0));
  }
  spec.sinusoids = {{"xx", 0.1, 1.0, 0.0}};
  CHECK_THROWS_AS(make_irregularity_field(spec, 0.0, 10.0), InputError);
}

TEST_CASE("IMU at constant speed on level straight track") {
  ScenarioConfig sc = default_scenario(straight(200.0));
  sc.duration = 2.0;
  const Simulation sim = simulate(sc);
  REQUIRE(sim.inputs.imu.size() > 300);
  for (const auto& m : sim.inputs.imu) {
    CHECK((m.accel - Vec3(0.0, 0.0, kGravity)).norm() < 1e-12);
    CHECK(m.gyro.norm() < 1e-15);
  }
  CHECK(sim.inputs.encoder_s.back() - sim.inputs.encoder_s.front() ==
        doctest::Approx(20.0 * (sim.inputs.encoder_t.back() - sim.inputs.encoder_t.front())));
}

TEST_CASE("laser slice points lie on the laser plane") {
  ScenarioConfig sc = default_scenario(straight(200.0));
  const Track track(sc.layout);
  IrregularitySpec spec;
  spec.sinusoids = {{"al", 0.004, 7.0, 0.0}, {"cl", 0.003, 5.0, 0.0}};
  const IrregularityField field = make_irregularity_field(spec, 0.0, 200.0);
  MotionSpec motion;
  motion.yaw = {0.01, 0.5, 0.0, 0.0};
  motion.roll = {0.005, 0.7, 0.3, 0.0};
  const RelativeMotion m = motion.at(0.4);
  const auto state = track.frame_at(100.0);
  const auto t = default_template();
  for (Side side : {Side::Left, Side::Right}) {
    const LaserPlane& plane = side == Side::Left ? sc.left.plane : sc.right.plane;
    for (double alpha : {0.2, 1.0, 1.8}) {
      const auto p = laser_slice_point(track, field, state, m, plane, side, profile_point(t, alpha));
      REQUIRE(p.has_value());
      CHECK(std::abs(plane.residual(*p)) < 1e-10);
      CHECK(std::abs(std::abs(p->y()) - 0.75) < 0.05);
    }
  }
}

TEST_CASE("simulation is deterministic in its seed") {
  ScenarioConfig sc = default_scenario(straight(200.0));
  sc.duration = 0.5;
  sc.noise.pixel = 0.2;
  sc.noise.accel = 0.01;
  const Simulation a = simulate(sc), b = simulate(sc);
  sc.seed = 99;
  const Simulation c = simulate(sc);
  REQUIRE(a.inputs.frames.size() == b.inputs.frames.size());
  CHECK(a.inputs.frames[3].left[5] == b.inputs.frames[3].left[5]);
  CHECK(a.inputs.imu[7].accel == b.inputs.imu[7].accel);
  CHECK(a.inputs.imu[7].accel != c.inputs.imu[7].accel);
}

TEST_CASE("frames project inside the image") {
  ScenarioConfig sc = default_scenario(straight(200.0));
  sc.duration = 0.2;
  const Simulation sim = simulate(sc);
  for (const auto& f : sim.inputs.frames) {
    CHECK(f.left.size() == static_cast<std::size_t>(sc.points_per_rail));
    for (const auto& p : f.right) {
      CHECK(std::abs(p.x()) <= 0.5 * sc.image_width);
      CHECK(std::abs(p.y()) <= 0.5 * sc.image_height);
    }
  }
}

TEST_CASE("scenarios outside the layout are rejected") {
  ScenarioConfig sc = default_scenario(straight(100.0));
  sc.s_start = 150.0;
  CHECK_THROWS_AS(simulate(sc), InputError);
  sc.s_start = 10.0;
  sc.duration = 10.0;
  CHECK_THROWS_AS(simulate(sc), InputError);
}
