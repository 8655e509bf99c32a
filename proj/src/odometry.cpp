#include "railgauge/odometry.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace railgauge {

double CurvatureFunction::node(std::size_t j) const {
  return j + 1 == rho.size() ? s_exit : s_start + spacing * static_cast<double>(j);
}

namespace {

bool is_straight(const HorizontalSection& h) {
  return h.curvature_start == 0.0 && h.curvature_end == 0.0;
}

double trapezoid_weight(std::size_t j, std::size_t n) { return (j == 0 || j + 1 == n) ? 0.5 : 1.0; }

// Shared by I2 and the error integral so that a zero measurement yields exactly 1.
double squared_error_sum(const CurvatureFunction& fn, const std::vector<double>& measured) {
  double sum = 0.0;
  const std::size_t n = fn.rho.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double d = measured[j] - fn.rho[j];
    sum += trapezoid_weight(j, n) * (d * d);
  }
  return sum * fn.spacing;
}

}  // namespace

std::vector<CurvatureFunction> curvature_functions(const Track& track, double spacing) {
  if (!(spacing > 0.0)) throw InputError("curvature grid spacing must be positive");
  const auto& hs = track.layout().horizontal;
  std::vector<CurvatureFunction> out;
  double s = 0.0;
  std::size_t i = 0;
  while (i < hs.size()) {
    if (is_straight(hs[i])) {
      s += hs[i].length;
      ++i;
      continue;
    }
    CurvatureFunction fn;
    fn.s_start = s;
    while (i < hs.size() && !is_straight(hs[i])) {
      s += hs[i].length;
      ++i;
    }
    fn.s_exit = s;
    const auto n = static_cast<std::size_t>(std::ceil(fn.width() / spacing - 1e-9));
    fn.spacing = fn.width() / static_cast<double>(std::max<std::size_t>(n, 1));
    fn.rho.resize(std::max<std::size_t>(n, 1) + 1);
    for (std::size_t j = 0; j < fn.rho.size(); ++j) {
      fn.rho[j] = track.frame_at(std::clamp(fn.node(j), 0.0, track.length())).rho_h;
    }
    fn.i2 = squared_error_sum(fn, std::vector<double>(fn.rho.size(), 0.0));
    if (!(fn.i2 > 0.0)) throw ValidationError("curvature function with zero energy");
    out.push_back(std::move(fn));
  }
  return out;
}

std::optional<double> estimate_curvature(double omega_z, double v, double v_min) {
  if (!(v > v_min)) return std::nullopt;
  return omega_z / v;
}

void CurvatureBuffer::push(double s_app, double rho) {
  if (!have_last_) {
    have_last_ = true;
    last_s_ = s_app;
    last_rho_ = rho;
    s0_ = std::ceil(s_app / spacing_) * spacing_;
    if (s0_ == s_app) values_.push_back(rho);
    return;
  }
  if (!(s_app > last_s_)) return;
  for (;;) {
    const double next = s0_ + spacing_ * static_cast<double>(values_.size());
    if (next > s_app) break;
    if (next >= last_s_) {
      const double w = (next - last_s_) / (s_app - last_s_);
      values_.push_back(last_rho_ + w * (rho - last_rho_));
    } else {
      values_.push_back(last_rho_);
    }
  }
  last_s_ = s_app;
  last_rho_ = rho;
}

std::optional<double> CurvatureBuffer::at(double s_app) const {
  if (values_.empty()) return std::nullopt;
  const double u = (s_app - s0_) / spacing_;
  const double last = static_cast<double>(values_.size() - 1);
  if (u < -1e-9 || u > last + 1e-9) return std::nullopt;
  const double uc = std::clamp(u, 0.0, last);
  const auto i = std::min(static_cast<std::size_t>(uc), values_.size() - 1);
  if (i + 1 >= values_.size()) return values_[i];
  const double w = uc - static_cast<double>(i);
  return values_[i] + w * (values_[i + 1] - values_[i]);
}

std::optional<double> normalized_squared_error(const CurvatureBuffer& buffer,
                                               const CurvatureFunction& fn, double s_hat,
                                               double scale) {
  std::vector<double> measured(fn.rho.size());
  for (std::size_t j = 0; j < fn.rho.size(); ++j) {
    const auto m = buffer.at(s_hat - scale * (fn.s_exit - fn.node(j)));
    if (!m) return std::nullopt;
    measured[j] = scale * *m;
  }
  return squared_error_sum(fn, measured) / fn.i2;
}

double correct_s(const std::vector<Anchor>& anchors, double s_app) {
  if (anchors.empty()) throw InputError("odometry correction needs at least one anchor");
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    if (!(anchors[i].s_app > anchors[i - 1].s_app) || !(anchors[i].s_ideal > anchors[i - 1].s_ideal)) {
      throw AnchorConflictError("anchors are not monotone at index " + std::to_string(i));
    }
  }
  if (anchors.size() == 1 || s_app <= anchors.front().s_app) {
    return s_app + (anchors.front().s_ideal - anchors.front().s_app);
  }
  auto it = std::upper_bound(anchors.begin(), anchors.end(), s_app,
                             [](double s, const Anchor& a) { return s < a.s_app; });
  std::size_t hi = static_cast<std::size_t>(it - anchors.begin());
  if (hi >= anchors.size()) hi = anchors.size() - 1;
  const Anchor& a = anchors[hi - 1];
  const Anchor& b = anchors[hi];
  return a.s_ideal + (s_app - a.s_app) * (b.s_ideal - a.s_ideal) / (b.s_app - a.s_app);
}

Odometry::Odometry(std::vector<CurvatureFunction> functions, OdometryOptions options, double s_app0,
                   double s_ideal0)
    : functions_(std::move(functions)), options_(options), start_{s_app0, s_ideal0, 0.0},
      buffer_(options.grid) {
  // Functions whose exit lies behind the start can never be matched.
  while (next_ < functions_.size() && functions_[next_].s_exit <= s_ideal0) ++next_;
  min_val_ = std::numeric_limits<double>::infinity();
}

std::vector<Anchor> Odometry::correction_anchors() const {
  std::vector<Anchor> all{start_};
  all.insert(all.end(), anchors_.begin(), anchors_.end());
  return all;
}

void Odometry::advance() {
  ++next_;
  current_.clear();
  min_val_ = std::numeric_limits<double>::infinity();
  min_idx_ = 0;
}

void Odometry::push(double s_app, double rho_exp) {
  buffer_.push(s_app, rho_exp);
  while (evaluated_ < buffer_.size()) evaluate(evaluated_++);
}

void Odometry::evaluate(std::size_t node) {
  if (next_ >= functions_.size()) return;
  const CurvatureFunction& fn = functions_[next_];
  const Anchor& last = anchors_.empty() ? start_ : anchors_.back();
  const double s_hat = buffer_.node(node);
  const double span = fn.s_exit - last.s_ideal;
  if (!(span > 0.0)) {
    advance();
    return;
  }
  const double k = (s_hat - last.s_app) / span;
  if (k >= 1.0 + options_.max_scale_error) {
    if (min_val_ < options_.tau && !current_.empty()) {
      accept(current_[min_idx_].first, min_val_);
    } else {
      spdlog::warn("odometry: no exit detected for curve ending at s={:.1f}", fn.s_exit);
      advance();
    }
    return;
  }
  if (k <= 1.0 - options_.max_scale_error) return;
  const auto ne2 = normalized_squared_error(buffer_, fn, s_hat, k);
  if (!ne2) return;
  trace_.push_back({s_hat, next_, *ne2});
  current_.emplace_back(s_hat, *ne2);
  if (*ne2 < min_val_) {
    min_val_ = *ne2;
    min_idx_ = current_.size() - 1;
  } else if (min_val_ < options_.tau && *ne2 >= min_val_ + options_.hysteresis) {
    double s_min = current_[min_idx_].first;
    if (min_idx_ > 0 && min_idx_ + 1 < current_.size()) {
      const auto [s0, y0] = current_[min_idx_ - 1];
      const auto [s2, y2] = current_[min_idx_ + 1];
      const double d = buffer_.spacing();
      const double den = y0 - 2.0 * min_val_ + y2;
      if (std::abs(s_min - s0 - d) < 1e-9 && std::abs(s2 - s_min - d) < 1e-9 && den > 0.0) {
        s_min += std::clamp(0.5 * d * (y0 - y2) / den, -0.5 * d, 0.5 * d);
      }
    }
    accept(s_min, min_val_);
  }
}

void Odometry::accept(double s_app, double ne2_min) {
  const CurvatureFunction& fn = functions_[next_];
  const Anchor& last = anchors_.empty() ? start_ : anchors_.back();
  if (!(s_app > last.s_app) || !(fn.s_exit > last.s_ideal)) {
    spdlog::warn("odometry: anchor ({:.2f}, {:.2f}) conflicts with previous anchor, rejected", s_app,
                 fn.s_exit);
  } else {
    anchors_.push_back({s_app, fn.s_exit, ne2_min});
    spdlog::debug("odometry: anchor s_app={:.3f} s_ideal={:.3f} ne2={:.4g}", s_app, fn.s_exit,
                  ne2_min);
  }
  advance();
}

}  // namespace railgauge
