#include "railgauge/common.hpp"
#include "railgauge/signal.hpp"

#include <doctest.h>

#include <cmath>

using namespace railgauge;

TEST_CASE("Butterworth coefficients match scipy") {
  // scipy.signal.butter(2, (1/70) / (0.5/0.25), 'highpass')
  const Biquad f = butterworth_highpass(70.0, 0.25);
  CHECK(f.b0 == doctest::Approx(0.9842577778388325).epsilon(1e-14));
  CHECK(f.b1 == doctest::Approx(-1.968515555677665).epsilon(1e-14));
  CHECK(f.b2 == doctest::Approx(0.9842577778388325).epsilon(1e-14));
  CHECK(f.a1 == doctest::Approx(-1.9682677227638052).epsilon(1e-14));
  CHECK(f.a2 == doctest::Approx(0.9687633885915249).epsilon(1e-14));
  CHECK_THROWS_AS(butterworth_highpass(0.4, 0.25), InputError);
}

TEST_CASE("filtfilt matches scipy with odd padding") {
  // scipy.signal.filtfilt(b, a, x, padtype='odd', padlen=280)
  std::vector<double> x(400);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double k = static_cast<double>(i);
    x[i] = std::sin(0.05 * k) + 0.002 * k + 0.3 * std::cos(0.7 * k);
  }
  const auto y = filtfilt(butterworth_highpass(70.0, 0.25), x, 280);
  CHECK(y[0] == doctest::Approx(-0.00161381729988908).epsilon(1e-9));
  CHECK(y[57] == doctest::Approx(0.02396756690855967).epsilon(1e-9));
  CHECK(y[200] == doctest::Approx(-0.5450784436242402).epsilon(1e-9));
  CHECK(y[399] == doctest::Approx(-0.00970218527058009).epsilon(1e-9));
}

TEST_CASE("high-pass removes constants and attenuates ramps") {
  std::vector<double> s, c, r;
  for (int i = 0; i <= 2000; ++i) {
    s.push_back(3.0 + 0.25 * i);
    c.push_back(0.01);
    r.push_back(2e-5 * i);
  }
  for (double v : highpass_on_grid(s, c, 70.0, 0.25)) CHECK(std::abs(v) < 1e-15);
  for (double v : highpass_on_grid(s, r, 70.0, 0.25)) CHECK(std::abs(v) < 1e-4 * r.back());
}

TEST_CASE("local quadratic equals Savitzky-Golay on a uniform grid") {
  // scipy.signal.savgol_filter(v, 21, 2, deriv=d, delta=0.01)
  std::vector<double> t, v;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.01 * i);
    v.push_back(std::exp(0.3 * t.back()) * std::sin(4.0 * t.back()));
  }
  const auto q = local_quadratic(t, v, 0.2, {t[10], t[50], t[90]});
  CHECK(q.value[0] == doctest::Approx(0.40126649784911816).epsilon(1e-11));
  CHECK(q.value[1] == doctest::Approx(1.0563271640558676).epsilon(1e-11));
  CHECK(q.value[2] == doctest::Approx(-0.5796632807794113).epsilon(1e-11));
  CHECK(q.first[0] == doctest::Approx(3.84546994999246).epsilon(1e-10));
  CHECK(q.first[1] == doctest::Approx(-1.6003572885571256).epsilon(1e-10));
  CHECK(q.first[2] == doctest::Approx(-4.783175298663204).epsilon(1e-10));
  CHECK(q.second[0] == doctest::Approx(-4.0855313147107175).epsilon(1e-9));
  CHECK(q.second[1] == doctest::Approx(-17.73711908017365).epsilon(1e-9));
  CHECK(q.second[2] == doctest::Approx(6.361624187546923).epsilon(1e-9));
}

TEST_CASE("local quadratic is exact for quadratics on irregular grids") {
  std::vector<double> t, y;
  double tt = 0.0;
  for (int i = 0; i < 80; ++i) {
    tt += 0.01 + 0.004 * std::sin(1.1 * i);
    t.push_back(tt);
    y.push_back(1.5 - 2.0 * tt + 0.75 * tt * tt);
  }
  const auto q = local_quadratic(t, y, 0.1, {t.front(), t[40], t.back()});
  for (std::size_t k = 0; k < 3; ++k) {
    const double x = k == 0 ? t.front() : k == 1 ? t[40] : t.back();
    CHECK(q.value[k] == doctest::Approx(1.5 - 2.0 * x + 0.75 * x * x).epsilon(1e-12));
    CHECK(q.first[k] == doctest::Approx(-2.0 + 1.5 * x).epsilon(1e-10));
    CHECK(q.second[k] == doctest::Approx(1.5).epsilon(1e-8));
  }
}

TEST_CASE("interpolation and stream checks") {
  const std::vector<double> x{0.0, 1.0, 3.0}, y{1.0, 3.0, -1.0};
  CHECK(interpolate_linear(x, y, 0.5) == doctest::Approx(2.0));
  CHECK(interpolate_linear(x, y, 2.0) == doctest::Approx(1.0));
  CHECK(interpolate_linear(x, y, 3.0) == -1.0);
  CHECK_THROWS_AS(interpolate_linear(x, y, 3.1), RangeError);
  CHECK_NOTHROW(check_stream({0.0, 0.1, 0.2, 0.3}, 3.0, "imu"));
  CHECK_THROWS_AS(check_stream({0.0, 0.1, 0.1, 0.2}, 3.0, "imu"), InputError);
  CHECK_THROWS_AS(check_stream({0.0, 0.1, 0.2, 0.6, 0.7}, 3.0, "imu"), InputError);
}
