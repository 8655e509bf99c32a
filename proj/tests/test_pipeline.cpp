#include "railgauge/layout_io.hpp"
#include "railgauge/pipeline.hpp"
#include "railgauge/sensor_sim.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace railgauge;

namespace {

TrackLayout short_curve() {
  std::istringstream in(
      "half_gauge 0.7525\nH straight 60 inf inf 0 0\nH transition 40 inf 250 0 0.06\n"
      "H circular 60 250 250 0.06 0.06\nV slope 40 0 0\nV transition 60 0 0.004\nV slope 60 0.004 0.004\n");
  return parse_layout(in, "inline");
}

OdeInput input_at(const Track& track, double s, const Vec3& accel, const Euler& e, double v) {
  return {track.frame_at(s), accel, e, v, 0.0};
}

}  // namespace

TEST_CASE("relative irregularities from hand-computed origins") {
  FramePair fp;
  fp.left_origin = {0.76, 0.002};
  fp.right_origin = {-0.75, -0.001};
  const Vec2 rel = relative_irregularities(fp, 0.01, 0.7525);
  CHECK(rel.x() == doctest::Approx(0.00497).epsilon(1e-12));
  CHECK(rel.y() == doctest::Approx(0.0181).epsilon(1e-12));
  const Vec2 abs = absolute_irregularities(fp, 0.01, 0.003, -0.002);
  CHECK(abs.x() == doctest::Approx(0.005 - 0.000005 + 0.003).epsilon(1e-12));
  CHECK(abs.y() == doctest::Approx(0.00005 + 0.0005 - 0.002).epsilon(1e-12));
  std::swap(fp.left_origin, fp.right_origin);
  CHECK_THROWS_AS(relative_irregularities(fp, 0.0, 0.7525), InputError);
}

TEST_CASE("relative irregularities ignore a common translation") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 0.01);
  for (int i = 0; i < 100; ++i) {
    FramePair fp;
    fp.left_origin = {0.75 + n(rng), n(rng)};
    fp.right_origin = {-0.75 + n(rng), n(rng)};
    const double phi = n(rng);
    const Vec2 shift{n(rng), n(rng)};
    FramePair moved = fp;
    moved.left_origin += shift;
    moved.right_origin += shift;
    CHECK(relative_irregularities(moved, phi, 0.7525).isApprox(relative_irregularities(fp, phi, 0.7525), 1e-12));
  }
}

TEST_CASE("forcing reduces to the straight-track form bit for bit") {
  std::istringstream in("half_gauge 0.75\nH straight 100 inf inf 0 0\nV slope 100 0 0\n");
  const Track track(parse_layout(in, "flat"));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    const Vec3 a{n(rng), n(rng), 9.81 + n(rng)};
    const Euler e{0.01 * n(rng), 0.01 * n(rng), 0.01 * n(rng)};
    const OdeInput inp = input_at(track, 50.0, a, e, 20.0);
    const Vec2 f = relative_motion_forcing(inp, KinematicsModel::SmallAngle);
    const Vec2 g = straight_track_rhs(a, e);
    CHECK(f.x() == g.x());
    CHECK(f.y() == g.y());
    CHECK(relative_motion_stiffness(inp, KinematicsModel::SmallAngle).isZero(0.0));
  }
}

TEST_CASE("small-angle and exact forcing agree on flat uncanted track") {
  std::istringstream in("half_gauge 0.75\nH straight 50 inf inf 0 0\nH transition 50 inf 300 0 0\n"
                        "H circular 100 300 300 0 0\nV slope 200 0 0\n");
  const Track track(parse_layout(in, "flat"));
  const Vec3 a{0.1, 1.3, 9.8};
  const Euler e{0.0, 0.0, 0.0};
  for (double s : {20.0, 80.0, 150.0}) {
    const OdeInput inp = input_at(track, s, a, e, 20.0);
    CHECK((relative_motion_forcing(inp, KinematicsModel::SmallAngle) -
           relative_motion_forcing(inp, KinematicsModel::Exact)).norm() < 1e-12);
  }
}

TEST_CASE("damping and stiffness entries") {
  const Track track(short_curve());
  OdeInput inp = input_at(track, 80.0, Vec3::Zero(), {}, 25.0);
  inp.v_dot = 0.3;
  const FrameKinematics k = frame_velocity(inp.track, inp.v, inp.v_dot);
  const Vec3 w = k.angular_velocity, al = k.angular_acceleration;
  const Mat2 c = relative_motion_damping(inp, KinematicsModel::SmallAngle);
  const Mat2 st = relative_motion_stiffness(inp, KinematicsModel::SmallAngle);
  CHECK(c(0, 0) == 0.0);
  CHECK(c(0, 1) == doctest::Approx(-2.0 * w.x()));
  CHECK(c(1, 0) == doctest::Approx(2.0 * w.x()));
  CHECK(st(0, 0) == doctest::Approx(-(w.x() * w.x() + w.z() * w.z())));
  CHECK(st(0, 1) == doctest::Approx(w.y() * w.z() - al.x()));
  CHECK(st(1, 0) == doctest::Approx(w.y() * w.z() + al.x()));
  CHECK(st(1, 1) == doctest::Approx(-(w.x() * w.x() + w.y() * w.y())));
}

TEST_CASE("RK4 integrates constant forcing exactly") {
  std::istringstream in("half_gauge 0.75\nH straight 100 inf inf 0 0\nV slope 100 0 0\n");
  const Track track(parse_layout(in, "flat"));
  const Vec3 a{0.0, 0.2, kGravity - 0.1};
  std::vector<double> t;
  std::vector<OdeInput> inputs, mids;
  for (int i = 0; i <= 50; ++i) {
    t.push_back(0.02 * i);
    inputs.push_back(input_at(track, 10.0, a, {}, 0.0));
    mids.push_back(inputs.back());
  }
  mids.pop_back();
  const auto x = integrate_relative_motion(t, inputs, mids, KinematicsModel::SmallAngle);
  CHECK(x.back()(0) == doctest::Approx(0.5 * 0.2).epsilon(1e-13));
  CHECK(x.back()(1) == doctest::Approx(-0.5 * 0.1).epsilon(1e-13));
  CHECK(x.back()(3) == doctest::Approx(-0.1).epsilon(1e-13));
}

TEST_CASE("RK4 is fourth order on a rotating frame") {
  const Track track(short_curve());
  const Vec3 a{0.0, 0.5, kGravity};
  auto run = [&](int n) {
    std::vector<double> t;
    std::vector<OdeInput> inputs, mids;
    const double h = 2.0 / n;
    for (int i = 0; i <= n; ++i) {
      t.push_back(h * i);
      inputs.push_back(input_at(track, 65.0 + 15.0 * t.back(), a, {}, 15.0));
      if (i < n) mids.push_back(input_at(track, 65.0 + 15.0 * (t.back() + 0.5 * h), a, {}, 15.0));
    }
    return integrate_relative_motion(t, inputs, mids, KinematicsModel::SmallAngle).back();
  };
  const OdeState ref = run(3200);
  const double e1 = (run(100) - ref).norm(), e2 = (run(200) - ref).norm();
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("twist of a linear cross level is its slope") {
  std::vector<double> s, cl;
  for (int i = 0; i <= 100; ++i) {
    s.push_back(0.25 * i);
    cl.push_back(0.001 + 2e-4 * s.back());
  }
  const TwistSeries tw = twist(s, cl, 3.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(tw.available[i] == (s[i] >= 3.0));
    if (tw.available[i]) CHECK(tw.tw[i] == doctest::Approx(2e-4).epsilon(1e-10));
  }
  CHECK_THROWS_AS(twist(s, cl, 30.0), InputError);
}

TEST_CASE("configuration JSON") {
  PipelineConfig cfg;
  apply_config_json(cfg, R"({"odometry": {"enabled": true, "tau": 0.3}, "kinematics": "exact",
                              "highpass": {"cutoff": 50}})", "inline");
  CHECK(cfg.odometry_enabled);
  CHECK(cfg.odometry.tau == 0.3);
  CHECK(cfg.kinematics == KinematicsModel::Exact);
  CHECK(cfg.highpass_cutoff == 50.0);
  PipelineConfig back;
  apply_config_json(back, config_to_json(cfg), "roundtrip");
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"odometry": {"tua": 1}})", "typo"), InputError);
  CHECK_THROWS_AS(apply_config_json(cfg, "{not json", "bad"), InputError);
}

TEST_CASE("noiseless simulation on a canted curve is reconstructed") {
  ScenarioConfig sc = default_scenario(short_curve());
  sc.irregularities.sinusoids = {{"gv", 0.002, 11.0, 0.0}, {"cl", 0.003, 17.0, 0.4},
                                 {"al", 0.002, 9.0, 0.0}, {"vp", 0.001, 13.0, 1.0}};
  sc.s_start = 5.0;
  sc.speed = SpeedProfile({{0.0, 18.0}});
  const Simulation sim = simulate(sc);
  for (auto model : {KinematicsModel::Exact, KinematicsModel::SmallAngle}) {
    PipelineConfig cfg;
    cfg.s_start = sim.s_start;
    cfg.highpass = false;
    cfg.kinematics = model;
    const PipelineResult res = run_pipeline(sim.inputs, cfg);
    REQUIRE(res.records.size() == sim.truth.records.size());
    double gv = 0.0, cl = 0.0;
    for (std::size_t i = 0; i < res.records.size(); ++i) {
      CHECK(res.records[i].s == doctest::Approx(sim.truth.records[i].s).epsilon(1e-9));
      gv = std::max(gv, std::abs(res.records[i].gv - sim.truth.records[i].gv));
      cl = std::max(cl, std::abs(res.records[i].cl - sim.truth.records[i].cl));
      CHECK((res.quality[i] & kFitNotConverged) == 0);
    }
    // Small-angle cant terms cost about 0.1 mm of cross level at 0.06 rad.
    const bool exact = model == KinematicsModel::Exact;
    CHECK(gv < (exact ? 1e-8 : 1e-6));
    CHECK(cl < (exact ? 5e-6 : 2e-4));
    CHECK(res.quarantined == 0);
  }
}

TEST_CASE("worker count honours the request") {
  CHECK(worker_count(3) == 3);
  CHECK(worker_count(0) >= 1);
}
