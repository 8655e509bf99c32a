#include "railgauge/layout_io.hpp"
#include "railgauge/odometry.hpp"

#include <doctest.h>

#include <sstream>

using namespace railgauge;

namespace {

Track layout_from(const std::string& text) {
  std::istringstream in(text);
  return Track(parse_layout(in, "inline"));
}

const char* kSingleCurve =
    "half_gauge 0.7525\n"
    "H straight 500 inf inf 0 0\nH transition 100 inf 300 0 0\nH circular 800 300 300 0 0\n"
    "H transition 100 300 inf 0 0\nH straight 500 inf inf 0 0\nV slope 2000 0 0\n";

const char* kShort =
    "half_gauge 0.7525\n"
    "H straight 300 inf inf 0 0\nH transition 50 inf 200 0 0\nH circular 100 200 200 0 0\n"
    "H transition 50 200 inf 0 0\nH straight 400 inf inf 0 0\nV slope 900 0 0\n";

}  // namespace

TEST_CASE("curvature function of a single curve") {
  const auto fns = curvature_functions(layout_from(kSingleCurve));
  REQUIRE(fns.size() == 1);
  CHECK(fns[0].s_start == 500.0);
  CHECK(fns[0].s_exit == 1500.0);
  CHECK(fns[0].spacing == 0.5);
  CHECK(fns[0].rho.size() == 2001);
  // trapezoidal sum of the ramp squares plus the arc: (2 * 33.33375 + 800) / 300^2
  CHECK(fns[0].i2 == doctest::Approx(866.6675 / 90000.0).epsilon(1e-12));
}

TEST_CASE("reverse curves form one function") {
  const auto fns = curvature_functions(layout_from(
      "half_gauge 0.75\nH straight 100 inf inf 0 0\nH transition 40 inf 500 0 0\n"
      "H transition 80 500 -500 0 0\nH transition 40 -500 inf 0 0\nH straight 100.3 inf inf 0 0\n"
      "H transition 30.7 inf 900 0 0\nV slope 391 0 0\n"));
  REQUIRE(fns.size() == 2);
  CHECK(fns[0].width() == doctest::Approx(160.0));
  CHECK(fns[1].s_exit == doctest::Approx(391.0));
  CHECK(fns[1].spacing <= 0.5);
  CHECK(fns[1].node(fns[1].rho.size() - 1) == fns[1].s_exit);
}

TEST_CASE("normalized error is 1 for zero curvature and 0 for a perfect match") {
  const auto fns = curvature_functions(layout_from(kShort));
  REQUIRE(fns.size() == 1);
  const auto& fn = fns[0];
  CurvatureBuffer zero(0.5), exact(0.5);
  const Track track = layout_from(kShort);
  for (double s = 0.0; s <= 880.0; s += 0.1) {
    zero.push(s, 0.0);
    exact.push(s, track.frame_at(s).rho_h);
  }
  CHECK(*normalized_squared_error(zero, fn, 700.0) == 1.0);
  CHECK(*normalized_squared_error(exact, fn, fn.s_exit) < 1e-6);
  CHECK(*normalized_squared_error(exact, fn, fn.s_exit + 20.0) >
        *normalized_squared_error(exact, fn, fn.s_exit + 5.0));
  CHECK(*normalized_squared_error(exact, fn, fn.s_exit + 100.0) > 0.5);
  CHECK_FALSE(normalized_squared_error(exact, fn, 100.0).has_value());
}

TEST_CASE("curvature buffer interpolates onto its grid") {
  CurvatureBuffer b(0.5);
  b.push(0.2, 1.0);
  b.push(1.7, 4.0);
  CHECK(b.s0() == 0.5);
  REQUIRE(b.size() == 3);
  CHECK(*b.at(0.5) == doctest::Approx(1.6));
  CHECK(*b.at(1.5) == doctest::Approx(3.6));
  CHECK(*b.at(1.25) == doctest::Approx(3.1));
  CHECK_FALSE(b.at(0.2).has_value());
  CHECK_FALSE(estimate_curvature(0.01, 0.3).has_value());
  CHECK(*estimate_curvature(0.01, 20.0) == doctest::Approx(5e-4));
}

TEST_CASE("arc-length correction through anchors") {
  const std::vector<Anchor> one{{100.0, 98.0, 0.01}};
  CHECK(correct_s(one, 50.0) == doctest::Approx(48.0));
  CHECK(correct_s(one, 500.0) == doctest::Approx(498.0));
  const std::vector<Anchor> two{{0.0, 0.0, 0.0}, {102.0, 100.0, 0.0}, {204.0, 200.0, 0.0}};
  CHECK(correct_s(two, 51.0) == doctest::Approx(50.0));
  CHECK(correct_s(two, 153.0) == doctest::Approx(150.0));
  CHECK(correct_s(two, 306.0) == doctest::Approx(300.0));
  CHECK(correct_s(two, -10.0) == doctest::Approx(-10.0));
  const std::vector<Anchor> bad{{0.0, 0.0, 0.0}, {100.0, 100.0, 0.0}, {90.0, 120.0, 0.0}};
  CHECK_THROWS_AS(correct_s(bad, 10.0), AnchorConflictError);
  CHECK_THROWS_AS(correct_s({}, 10.0), InputError);
}

TEST_CASE("odometry anchors a scaled encoder at the curve exit") {
  const Track track = layout_from(kShort);
  for (double k : {0.97, 1.0, 1.04}) {
    Odometry odo(curvature_functions(track), {}, 5.0 * k, 5.0);
    for (double s = 5.0; s <= 880.0; s += 0.05) odo.push(k * s, track.frame_at(s).rho_h / k);
    REQUIRE(odo.anchors().size() == 1);
    CHECK(odo.anchors()[0].s_ideal == 500.0);
    CHECK(odo.anchors()[0].s_app == doctest::Approx(500.0 * k).epsilon(1e-3));
    CHECK(odo.anchors()[0].ne2_min < 1e-3);
    for (double s : {50.0, 420.0, 700.0}) CHECK(odo.correct(k * s) == doctest::Approx(s).epsilon(2e-3));
  }
}

TEST_CASE("scale beyond the search range is skipped") {
  const Track track = layout_from(kShort);
  Odometry odo(curvature_functions(track), {}, 0.0, 0.0);
  for (double s = 0.0; s <= 880.0; s += 0.05) odo.push(1.3 * s, track.frame_at(s).rho_h / 1.3);
  CHECK(odo.anchors().empty());
  CHECK(odo.next_function() == 1);
}
