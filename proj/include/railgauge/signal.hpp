#pragma once

#include <vector>

namespace railgauge {

/// Linear interpolation on a strictly increasing grid. Throws RangeError
/// outside [x.front(), x.back()] beyond `tol`.
double interpolate_linear(const std::vector<double>& x, const std::vector<double>& y, double xq,
                          double tol = 1e-9);

std::vector<double> interpolate_linear(const std::vector<double>& x, const std::vector<double>& y,
                                       const std::vector<double>& xq, double tol = 1e-9);

/// Throws InputError when consecutive samples are more than `factor` nominal
/// intervals apart or time does not increase.
void check_stream(const std::vector<double>& t, double factor, const char* name);

struct LocalQuadratic {
  std::vector<double> value;
  std::vector<double> first;
  std::vector<double> second;
};

/// Savitzky-Golay style smoothing differentiator: a least-squares quadratic in
/// (t - tq) over the samples within +-window/2 of each query time. Near the
/// ends the window is shifted to stay inside the data.
LocalQuadratic local_quadratic(const std::vector<double>& t, const std::vector<double>& y,
                               double window, const std::vector<double>& tq);

struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Second-order Butterworth high-pass for a signal sampled every `spacing`
/// with the cutoff given as a wavelength in the same units.
Biquad butterworth_highpass(double cutoff_wavelength, double spacing);

/// Zero-phase forward-backward filtering with odd reflection padding and
/// steady-state initial conditions.
std::vector<double> filtfilt(const Biquad& f, const std::vector<double>& x, std::size_t padlen);

/// High-pass y(s) on a uniform grid and map the result back to the original
/// abscissae. `s` must be non-decreasing.
std::vector<double> highpass_on_grid(const std::vector<double>& s, const std::vector<double>& y,
                                     double cutoff_wavelength, double spacing);

}  // namespace railgauge
