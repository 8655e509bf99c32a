#include "railgauge/track_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace railgauge {

namespace {

constexpr double kContinuityTol = 1e-12;
constexpr double kRangeTol = 1e-9;

// Index of the section containing s given the section start positions.
std::size_t locate(const std::vector<double>& starts, double s) {
  auto it = std::upper_bound(starts.begin(), starts.end(), s);
  if (it == starts.begin()) return 0;
  return static_cast<std::size_t>(it - starts.begin()) - 1;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

double TrackLayout::total_length() const {
  double sum = 0.0;
  for (const auto& h : horizontal) sum += h.length;
  return sum;
}

void validate(const TrackLayout& layout) {
  require(layout.half_gauge > 0.0, "half gauge must be positive");
  require(!layout.horizontal.empty(), "layout has no horizontal sections");
  require(!layout.vertical.empty(), "layout has no vertical sections");

  for (std::size_t i = 0; i < layout.horizontal.size(); ++i) {
    const auto& h = layout.horizontal[i];
    const std::string tag = "horizontal section " + std::to_string(i);
    require(h.length > 0.0 && std::isfinite(h.length), tag + ": length must be positive");
    switch (h.kind) {
      case HorizontalKind::Straight:
        require(h.curvature_start == 0.0 && h.curvature_end == 0.0,
                tag + ": straight section with nonzero curvature");
        require(h.cant_start == h.cant_end, tag + ": cant may only vary on transitions");
        break;
      case HorizontalKind::Circular:
        require(h.curvature_start != 0.0, tag + ": circular section with zero curvature");
        require(h.curvature_start == h.curvature_end, tag + ": circular end curvatures differ");
        require(h.cant_start == h.cant_end, tag + ": circular end cants differ");
        break;
      case HorizontalKind::Transition:
        break;
    }
    if (i + 1 < layout.horizontal.size()) {
      const auto& n = layout.horizontal[i + 1];
      require(std::abs(h.curvature_end - n.curvature_start) < kContinuityTol,
              tag + ": curvature discontinuity at end");
      require(std::abs(h.cant_end - n.cant_start) < kContinuityTol,
              tag + ": cant discontinuity at end");
    }
  }

  double v_total = 0.0;
  for (std::size_t i = 0; i < layout.vertical.size(); ++i) {
    const auto& v = layout.vertical[i];
    const std::string tag = "vertical section " + std::to_string(i);
    require(v.length > 0.0 && std::isfinite(v.length), tag + ": length must be positive");
    if (v.kind == VerticalKind::ConstantSlope) {
      require(v.slope_start == v.slope_end, tag + ": constant slope with differing ends");
    }
    if (i + 1 < layout.vertical.size()) {
      require(std::abs(v.slope_end - layout.vertical[i + 1].slope_start) < kContinuityTol,
              tag + ": slope discontinuity at end");
    }
    v_total += v.length;
  }
  const double h_total = layout.total_length();
  require(std::abs(h_total - v_total) <= 1e-9 * std::max(1.0, h_total),
          "horizontal and vertical profiles have different total lengths (" +
              std::to_string(h_total) + " vs " + std::to_string(v_total) + ")");
}

Track::Track(TrackLayout layout, double node_spacing) : layout_(std::move(layout)) {
  validate(layout_);
  if (!(node_spacing > 0.0)) throw ValidationError("node spacing must be positive");
  length_ = layout_.total_length();

  double s = 0.0, psi = 0.0;
  for (const auto& h : layout_.horizontal) {
    h_start_.push_back(s);
    h_psi0_.push_back(psi);
    psi += h.length * 0.5 * (h.curvature_start + h.curvature_end);
    s += h.length;
  }
  s = 0.0;
  for (const auto& v : layout_.vertical) {
    v_start_.push_back(s);
    s += v.length;
  }

  std::vector<double> breaks = h_start_;
  breaks.insert(breaks.end(), v_start_.begin(), v_start_.end());
  breaks.push_back(length_);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-9; }),
               breaks.end());

  node_s_.push_back(0.0);
  node_r_.push_back(Vec3::Zero());
  node_t_.push_back(tangent(0.0));
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double a = breaks[b], e = breaks[b + 1];
    const int n = std::max(1, static_cast<int>(std::ceil((e - a) / node_spacing - 1e-9)));
    const double h = (e - a) / n;
    for (int k = 0; k < n; ++k) {
      const double s0 = a + k * h;
      const double s1 = (k + 1 == n) ? e : a + (k + 1) * h;
      const Vec3 t1 = tangent(s1);
      node_r_.push_back(node_r_.back() +
                        (s1 - s0) / 6.0 * (node_t_.back() + 4.0 * tangent(0.5 * (s0 + s1)) + t1));
      node_s_.push_back(s1);
      node_t_.push_back(t1);
    }
  }
}

void Track::angles_at(double s, TrackFrameState& out) const {
  const std::size_t ih = locate(h_start_, s);
  const auto& h = layout_.horizontal[ih];
  const double x = s - h_start_[ih];
  const double dk = h.curvature_end - h.curvature_start;
  out.rho_h = h.curvature_start + dk * x / h.length;
  out.psi = h_psi0_[ih] + h.curvature_start * x + dk * x * x / (2.0 * h.length);
  out.phi = h.cant_start + (h.cant_end - h.cant_start) * x / h.length;
  if (h.kind == HorizontalKind::Transition) {
    out.rho_tw = (h.cant_end - h.cant_start) / h.length;
    out.rho_h_prime = dk / h.length;
  } else {
    out.rho_tw = 0.0;
    out.rho_h_prime = 0.0;
  }

  const std::size_t iv = locate(v_start_, s);
  const auto& v = layout_.vertical[iv];
  const double xv = s - v_start_[iv];
  out.alpha_v = v.slope_start + (v.slope_end - v.slope_start) * xv / v.length;
  out.rho_v = v.kind == VerticalKind::Transition ? (v.slope_end - v.slope_start) / v.length : 0.0;
  out.theta = out.alpha_v;
}

Vec3 Track::tangent(double s) const {
  TrackFrameState st;
  angles_at(s, st);
  const double ct = std::cos(st.theta);
  return {ct * std::cos(st.psi), ct * std::sin(st.psi), -std::sin(st.theta)};
}

Vec3 Track::position_at(double s) const {
  if (s < -kRangeTol || s > length_ + kRangeTol) {
    throw RangeError("arc length " + std::to_string(s) + " outside track [0, " +
                     std::to_string(length_) + "]");
  }
  s = std::clamp(s, 0.0, length_);
  std::size_t k = locate(node_s_, s);
  if (k + 1 >= node_s_.size()) k = node_s_.size() - 2;
  const double s0 = node_s_[k], h = node_s_[k + 1] - s0;
  const double u = (s - s0) / h;
  const double u2 = u * u, u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
  const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
  return h00 * node_r_[k] + h10 * h * node_t_[k] + h01 * node_r_[k + 1] + h11 * h * node_t_[k + 1];
}

TrackFrameState Track::frame_at(double s) const {
  TrackFrameState st;
  st.position = position_at(s);
  s = std::clamp(s, 0.0, length_);
  st.s = s;
  angles_at(s, st);
  st.orientation = rotation_from_euler(st.euler());
  return st;
}

std::vector<double> Track::horizontal_breakpoints() const {
  std::vector<double> b = h_start_;
  b.push_back(length_);
  return b;
}

Mat3 small_angle_track_rotation(double psi, double theta, double phi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat3 a;
  a << c, -s, phi * s + theta * c,
       s, c, theta * s - phi * c,
       -theta, phi, 1.0;
  return a;
}

FrameKinematics frame_velocity(const TrackFrameState& st, double v, double v_dot) {
  FrameKinematics k;
  k.velocity = {v, 0.0, 0.0};
  k.acceleration = {v_dot, st.rho_h * v * v, -st.rho_v * v * v};
  k.angular_velocity = {st.rho_tw * v, st.rho_v * v, st.rho_h * v};
  k.angular_acceleration = {st.rho_tw * v_dot, st.rho_v * v_dot,
                            st.rho_h * v_dot + st.rho_h_prime * v * v};
  return k;
}

FrameKinematics exact_frame_kinematics(const TrackFrameState& st, double v, double v_dot) {
  const Vec3 rates{st.rho_tw * v, st.rho_v * v, st.rho_h * v};
  const Vec3 accels{st.rho_tw * v_dot, st.rho_v * v_dot,
                    st.rho_h * v_dot + st.rho_h_prime * v * v};
  FrameKinematics k;
  k.angular_velocity = body_rate_from_euler_rates(st.euler(), rates);
  k.angular_acceleration = body_accel_from_euler_rates(st.euler(), rates, accels);
  k.velocity = {v, 0.0, 0.0};
  k.acceleration = {v_dot, v * k.angular_velocity.z(), -v * k.angular_velocity.y()};
  return k;
}

IrregularityRecord irregularities_from_rails(double s, const RailOffsets& r) {
  IrregularityRecord rec;
  rec.s = s;
  rec.al = 0.5 * (r.y_left + r.y_right);
  rec.vp = 0.5 * (r.z_left + r.z_right);
  rec.gv = r.y_left - r.y_right;
  rec.cl = r.z_left - r.z_right;
  return rec;
}

RailOffsets irregularities_to_rails(const IrregularityRecord& rec) {
  RailOffsets r;
  r.y_left = rec.al + 0.5 * rec.gv;
  r.y_right = rec.al - 0.5 * rec.gv;
  r.z_left = rec.vp + 0.5 * rec.cl;
  r.z_right = rec.vp - 0.5 * rec.cl;
  return r;
}

IrregularityField::IrregularityField(double s0, double spacing, std::vector<RailOffsets> samples)
    : s0_(s0), spacing_(spacing), samples_(std::move(samples)) {
  if (!(spacing_ > 0.0)) throw ValidationError("irregularity grid spacing must be positive");
  if (samples_.size() < 2) throw ValidationError("irregularity field needs at least two samples");
}

IrregularityField IrregularityField::zero(double s0, double s1, double spacing) {
  const auto n = static_cast<std::size_t>(std::ceil((s1 - s0) / spacing - 1e-9)) + 1;
  return IrregularityField(s0, spacing, std::vector<RailOffsets>(std::max<std::size_t>(n, 2)));
}

RailOffsets IrregularityField::at(double s) const {
  if (samples_.empty()) return {};
  const double u = (s - s0_) / spacing_;
  const double last = static_cast<double>(samples_.size() - 1);
  if (u < -kRangeTol || u > last + kRangeTol) {
    throw RangeError("arc length " + std::to_string(s) + " outside irregularity field");
  }
  const double uc = std::clamp(u, 0.0, last);
  std::size_t i = static_cast<std::size_t>(std::floor(uc));
  if (i + 1 >= samples_.size()) i = samples_.size() - 2;
  const double w = uc - static_cast<double>(i);
  const auto& a = samples_[i];
  const auto& b = samples_[i + 1];
  return {a.y_left + w * (b.y_left - a.y_left), a.z_left + w * (b.z_left - a.z_left),
          a.y_right + w * (b.y_right - a.y_right), a.z_right + w * (b.z_right - a.z_right)};
}

RailProfileFrames rail_profile_frames(double beta, double cl, double half_gauge) {
  if (!(half_gauge > 0.0)) throw ValidationError("half gauge must be positive");
  const double delta = cl / (2.0 * half_gauge);
  return {rotation_x(beta + delta), rotation_x(-beta + delta)};
}

Vec3 rail_point_global(const Track& track, double s, Side side, const IrregularityField& irr,
                       const Vec2& u_hat) {
  const TrackFrameState st = track.frame_at(s);
  const RailOffsets off = irr.at(s);
  const double lr = track.layout().half_gauge;
  const RailProfileFrames frames =
      rail_profile_frames(track.layout().rail_inclination, off.z_left - off.z_right, lr);
  const Vec3 u{0.0, u_hat.x(), u_hat.y()};
  Vec3 local;
  if (side == Side::Left) {
    local = Vec3(0.0, lr + off.y_left, off.z_left) + frames.left * u;
  } else {
    local = Vec3(0.0, -lr + off.y_right, off.z_right) + frames.right * u;
  }
  return st.position + st.orientation * local;
}

Mat3 relative_rotation(const Euler& angles, RotationModel model) {
  return model == RotationModel::Exact ? rotation_from_euler(angles) : small_angle_rotation(angles);
}

Vec3 relative_body_rate(const RelativeMotion& m, RotationModel model) {
  return model == RotationModel::Exact ? body_rate_from_euler_rates(m.angles, m.angle_rates)
                                       : m.angle_rates;
}

BodyPointKinematics body_kinematics(const RelativeMotion& m, const FrameKinematics& f,
                                    const Vec3& u, RotationModel model) {
  const Mat3 a = relative_rotation(m.angles, model);
  const Vec3 r{0.0, m.r.x(), m.r.y()};
  const Vec3 rd{0.0, m.r_dot.x(), m.r_dot.y()};
  const Vec3 rdd{0.0, m.r_ddot.x(), m.r_ddot.y()};

  Vec3 w_rel, a_rel, a_dot_w;
  const Vec3 w_t_body = a.transpose() * f.angular_velocity;
  if (model == RotationModel::Exact) {
    w_rel = body_rate_from_euler_rates(m.angles, m.angle_rates);
    a_rel = body_accel_from_euler_rates(m.angles, m.angle_rates, m.angle_accels);
    // d/dt (A^T w) with dA/dt = A skew(w_rel)
    a_dot_w = -w_rel.cross(w_t_body);
  } else {
    w_rel = m.angle_rates;
    a_rel = m.angle_accels;
    const Mat3 a_dot = small_angle_rotation(Euler::from_vector(m.angle_rates)) - Mat3::Identity();
    a_dot_w = a_dot.transpose() * f.angular_velocity;
  }

  BodyPointKinematics out;
  out.angular_velocity = w_t_body + w_rel;
  out.angular_acceleration = a_dot_w + a.transpose() * f.angular_acceleration + a_rel;

  const Vec3& w = out.angular_velocity;
  const Vec3& al = out.angular_acceleration;
  const Vec3& wt = f.angular_velocity;
  const Vec3& at = f.angular_acceleration;
  out.velocity = f.velocity + rd + wt.cross(r) + a * w.cross(u);
  out.acceleration = f.acceleration + rdd + at.cross(r) + wt.cross(wt.cross(r)) +
                     2.0 * wt.cross(rd) + a * (al.cross(u) + w.cross(w.cross(u)));
  return out;
}

BodyPointKinematics body_kinematics(const RelativeMotion& m, const TrackFrameState& st, double v,
                                    double v_dot, const Vec3& u) {
  return body_kinematics(m, frame_velocity(st, v, v_dot), u, RotationModel::SmallAngle);
}

Vec3 body_point_global(const TrackFrameState& st, const RelativeMotion& m, const Vec3& u,
                       RotationModel model) {
  const Vec3 r{0.0, m.r.x(), m.r.y()};
  return st.position + st.orientation * (r + relative_rotation(m.angles, model) * u);
}

}  // namespace railgauge
