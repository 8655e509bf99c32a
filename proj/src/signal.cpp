#include "railgauge/signal.hpp"

#include "railgauge/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace railgauge {

double interpolate_linear(const std::vector<double>& x, const std::vector<double>& y, double xq,
                          double tol) {
  if (x.empty() || x.size() != y.size()) throw InputError("interpolation table is empty");
  if (xq < x.front() - tol || xq > x.back() + tol) {
    throw RangeError("interpolation abscissa " + std::to_string(xq) + " outside [" +
                     std::to_string(x.front()) + ", " + std::to_string(x.back()) + "]");
  }
  if (x.size() == 1) return y.front();
  auto it = std::upper_bound(x.begin(), x.end(), xq);
  std::size_t i = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
  if (i + 1 >= x.size()) i = x.size() - 2;
  const double w = (xq - x[i]) / (x[i + 1] - x[i]);
  return y[i] + w * (y[i + 1] - y[i]);
}

std::vector<double> interpolate_linear(const std::vector<double>& x, const std::vector<double>& y,
                                       const std::vector<double>& xq, double tol) {
  std::vector<double> out(xq.size());
  for (std::size_t i = 0; i < xq.size(); ++i) out[i] = interpolate_linear(x, y, xq[i], tol);
  return out;
}

void check_stream(const std::vector<double>& t, double factor, const char* name) {
  if (t.size() < 2) throw InputError(std::string(name) + " stream has fewer than two samples");
  std::vector<double> dt(t.size() - 1);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    dt[i] = t[i + 1] - t[i];
    if (!(dt[i] > 0.0)) {
      throw InputError(std::string(name) + " timestamps do not increase at sample " +
                       std::to_string(i + 1));
    }
  }
  std::vector<double> sorted = dt;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double nominal = sorted[sorted.size() / 2];
  for (std::size_t i = 0; i < dt.size(); ++i) {
    if (dt[i] > factor * nominal) {
      throw InputError(std::string(name) + " stream gap of " + std::to_string(dt[i]) + " s at t=" +
                       std::to_string(t[i]));
    }
  }
}

LocalQuadratic local_quadratic(const std::vector<double>& t, const std::vector<double>& y,
                               double window, const std::vector<double>& tq) {
  if (t.size() != y.size() || t.size() < 3) throw InputError("need at least 3 samples to differentiate");
  LocalQuadratic out;
  out.value.resize(tq.size());
  out.first.resize(tq.size());
  out.second.resize(tq.size());
  const double half = 0.5 * window;
  for (std::size_t q = 0; q < tq.size(); ++q) {
    double lo = tq[q] - half, hi = tq[q] + half;
    if (lo < t.front()) {
      hi += t.front() - lo;
      lo = t.front();
    }
    if (hi > t.back()) {
      lo -= hi - t.back();
      hi = t.back();
    }
    auto b = std::lower_bound(t.begin(), t.end(), lo - 1e-12);
    auto e = std::upper_bound(t.begin(), t.end(), hi + 1e-12);
    if (e - b < 3) {
      b = std::max(t.begin(), std::min(b, t.end() - 3));
      e = b + 3;
    }
    // Normal equations in the centred, scaled abscissa for conditioning.
    const double scale = std::max(half, 1e-12);
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d aty = Eigen::Vector3d::Zero();
    for (auto it = b; it != e; ++it) {
      const std::size_t i = static_cast<std::size_t>(it - t.begin());
      const double u = (t[i] - tq[q]) / scale;
      const Eigen::Vector3d row{1.0, u, u * u};
      ata += row * row.transpose();
      aty += row * y[i];
    }
    const Eigen::Vector3d c = ata.ldlt().solve(aty);
    out.value[q] = c(0);
    out.first[q] = c(1) / scale;
    out.second[q] = 2.0 * c(2) / (scale * scale);
  }
  return out;
}

Biquad butterworth_highpass(double cutoff_wavelength, double spacing) {
  if (!(cutoff_wavelength > 2.0 * spacing) || !(spacing > 0.0)) {
    throw InputError("high-pass cutoff wavelength must exceed twice the grid spacing");
  }
  const double pi = 3.14159265358979323846;
  const double k = std::tan(pi * spacing / cutoff_wavelength);
  const double r2 = std::sqrt(2.0);
  const double norm = 1.0 / (1.0 + r2 * k + k * k);
  return {norm, -2.0 * norm, norm, 2.0 * (k * k - 1.0) * norm, (1.0 - r2 * k + k * k) * norm};
}

namespace {

std::vector<double> lfilter(const Biquad& f, const std::vector<double>& x) {
  // Steady-state state for a constant input equal to x[0].
  Eigen::Matrix2d m;
  m << 1.0 + f.a1, -1.0, f.a2, 1.0;
  const Eigen::Vector2d zi = m.partialPivLu().solve(Eigen::Vector2d(f.b1 - f.a1 * f.b0, f.b2 - f.a2 * f.b0));
  double z0 = zi(0) * x.front(), z1 = zi(1) * x.front();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double yi = f.b0 * x[i] + z0;
    z0 = f.b1 * x[i] - f.a1 * yi + z1;
    z1 = f.b2 * x[i] - f.a2 * yi;
    y[i] = yi;
  }
  return y;
}

}  // namespace

std::vector<double> filtfilt(const Biquad& f, const std::vector<double>& x, std::size_t padlen) {
  if (x.size() < 2) return x;
  padlen = std::min(padlen, x.size() - 1);
  std::vector<double> ext;
  ext.reserve(x.size() + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x.back() - x[x.size() - 1 - i]);
  std::vector<double> y = lfilter(f, ext);
  std::reverse(y.begin(), y.end());
  y = lfilter(f, y);
  std::reverse(y.begin(), y.end());
  return std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(padlen),
                             y.begin() + static_cast<std::ptrdiff_t>(padlen + x.size()));
}

std::vector<double> highpass_on_grid(const std::vector<double>& s, const std::vector<double>& y,
                                     double cutoff_wavelength, double spacing) {
  if (s.size() != y.size()) throw InputError("high-pass input sizes differ");
  if (s.size() < 2) return y;
  // Collapse repeated abscissae (vehicle at rest) by keeping the last value.
  std::vector<double> su, yu;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!su.empty() && s[i] < su.back()) throw InputError("high-pass abscissa is not monotone");
    if (!su.empty() && s[i] == su.back()) {
      yu.back() = y[i];
      continue;
    }
    su.push_back(s[i]);
    yu.push_back(y[i]);
  }
  if (su.size() < 2) return y;
  const auto n = static_cast<std::size_t>(std::floor((su.back() - su.front()) / spacing)) + 1;
  std::vector<double> grid(n), gy(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = su.front() + spacing * static_cast<double>(i);
    gy[i] = interpolate_linear(su, yu, std::min(grid[i], su.back()));
  }
  if (grid.back() < su.back()) {
    grid.push_back(grid.back() + spacing);
    gy.push_back(yu.back());
  }
  const auto pad = static_cast<std::size_t>(std::ceil(cutoff_wavelength / spacing));
  const std::vector<double> f = filtfilt(butterworth_highpass(cutoff_wavelength, spacing), gy, pad);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = interpolate_linear(grid, f, s[i]);
  return out;
}

}  // namespace railgauge
