#include "railgauge/pipeline.hpp"

#include "railgauge/signal.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

namespace railgauge {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw InputError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void apply_config_json(PipelineConfig& cfg, const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(source + ": " + e.what());
  }
  try {
    check_keys(j,
               {"s_start", "odometry", "fusion", "kinematics", "sg_window", "highpass", "twist_base",
                "gap_factor", "threads", "fit"},
               source);
    read(j, "s_start", cfg.s_start);
    read(j, "sg_window", cfg.sg_window);
    read(j, "twist_base", cfg.twist_base);
    read(j, "gap_factor", cfg.gap_factor);
    read(j, "threads", cfg.threads);
    if (j.contains("kinematics")) {
      const auto k = j.at("kinematics").get<std::string>();
      if (k == "small_angle") cfg.kinematics = KinematicsModel::SmallAngle;
      else if (k == "exact") cfg.kinematics = KinematicsModel::Exact;
      else throw InputError(source + ": kinematics must be 'small_angle' or 'exact'");
    }
    if (j.contains("odometry")) {
      const json& o = j.at("odometry");
      check_keys(o, {"enabled", "tau", "hysteresis", "grid", "v_min", "max_scale_error"},
                 source + " odometry");
      read(o, "enabled", cfg.odometry_enabled);
      read(o, "tau", cfg.odometry.tau);
      read(o, "hysteresis", cfg.odometry.hysteresis);
      read(o, "grid", cfg.odometry.grid);
      read(o, "v_min", cfg.odometry.v_min);
      read(o, "max_scale_error", cfg.odometry.max_scale_error);
    }
    if (j.contains("fusion")) {
      const json& f = j.at("fusion");
      check_keys(f, {"beta", "gyro_bias_rest"}, source + " fusion");
      read(f, "beta", cfg.fusion.beta);
      read(f, "gyro_bias_rest", cfg.gyro_bias_rest);
    }
    if (j.contains("highpass")) {
      const json& h = j.at("highpass");
      check_keys(h, {"enabled", "cutoff", "spacing"}, source + " highpass");
      read(h, "enabled", cfg.highpass);
      read(h, "cutoff", cfg.highpass_cutoff);
      read(h, "spacing", cfg.highpass_spacing);
    }
    if (j.contains("fit")) {
      const json& f = j.at("fit");
      check_keys(f, {"max_iter", "max_halvings", "grad_tol", "constraint_tol"}, source + " fit");
      read(f, "max_iter", cfg.fit.max_iter);
      read(f, "max_halvings", cfg.fit.max_halvings);
      read(f, "grad_tol", cfg.fit.grad_tol);
      read(f, "constraint_tol", cfg.fit.constraint_tol);
    }
  } catch (const json::exception& e) {
    throw InputError(source + ": " + e.what());
  }
  if (!(cfg.sg_window > 0.0)) throw InputError(source + ": sg_window must be positive");
  if (!(cfg.twist_base > 0.0)) throw InputError(source + ": twist_base must be positive");
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  j["s_start"] = c.s_start;
  j["odometry"] = {{"enabled", c.odometry_enabled}, {"tau", c.odometry.tau},
                   {"hysteresis", c.odometry.hysteresis}, {"grid", c.odometry.grid},
                   {"v_min", c.odometry.v_min}, {"max_scale_error", c.odometry.max_scale_error}};
  j["fusion"] = {{"beta", c.fusion.beta}, {"gyro_bias_rest", c.gyro_bias_rest}};
  j["kinematics"] = c.kinematics == KinematicsModel::SmallAngle ? "small_angle" : "exact";
  j["sg_window"] = c.sg_window;
  j["highpass"] = {{"enabled", c.highpass}, {"cutoff", c.highpass_cutoff}, {"spacing", c.highpass_spacing}};
  j["twist_base"] = c.twist_base;
  j["gap_factor"] = c.gap_factor;
  j["threads"] = c.threads;
  j["fit"] = {{"max_iter", c.fit.max_iter}, {"max_halvings", c.fit.max_halvings},
              {"grad_tol", c.fit.grad_tol}, {"constraint_tol", c.fit.constraint_tol}};
  return j.dump(2);
}

namespace {

std::vector<Vec2> profile_plane_points(const CameraLaser& cl, const std::vector<PixelPoint>& px) {
  const TriangulatedCloud cloud = triangulate_cloud(cl.camera, cl.plane, px);
  std::vector<Vec2> out;
  out.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.emplace_back(p.y(), p.z());
  return out;
}

}  // namespace

FramePair fit_frame(const FrameInput& frame, const CameraLaser& left, const CameraLaser& right,
                    const RailProfileTemplate& t, const FitOptions& opt) {
  const FitResult fl = fit_rail(profile_plane_points(left, frame.left), Side::Left, t, opt);
  const FitResult fr = fit_rail(profile_plane_points(right, frame.right), Side::Right, t, opt);
  FramePair fp;
  fp.id = frame.id;
  fp.t = frame.t;
  fp.left_origin = fl.origin;
  fp.right_origin = fr.origin;
  fp.left_roll = fl.roll;
  fp.right_roll = fr.roll;
  fp.left_rms = fl.rms_residual;
  fp.right_rms = fr.rms_residual;
  fp.converged = fl.converged && fr.converged;
  return fp;
}

Vec2 relative_irregularities(const FramePair& fp, double phi, double half_gauge) {
  if (!(fp.left_origin.x() > fp.right_origin.x())) {
    throw InputError("frame " + std::to_string(fp.id) + ": left and right rails are swapped");
  }
  const double dy = fp.left_origin.x() - fp.right_origin.x();
  const double dz = fp.left_origin.y() - fp.right_origin.y();
  return {dy - phi * dz - 2.0 * half_gauge, phi * dy + dz};
}

Vec2 absolute_irregularities(const FramePair& fp, double phi, double r_y, double r_z) {
  const double sy = fp.left_origin.x() + fp.right_origin.x();
  const double sz = fp.left_origin.y() + fp.right_origin.y();
  return {0.5 * sy - 0.5 * phi * sz + r_y, 0.5 * phi * sy + 0.5 * sz + r_z};
}

Vec2 straight_track_rhs(const Vec3& a, const Euler& e) {
  return {(a.y() + a.x() * e.yaw) - a.z() * e.roll, ((a.z() - a.x() * e.pitch) + a.y() * e.roll) - kGravity};
}

Vec2 relative_motion_forcing(const OdeInput& in, KinematicsModel model) {
  const Vec3& a = in.accel;
  const Euler& e = in.euler;
  const TrackFrameState& st = in.track;
  const double v2 = in.v * in.v;
  if (model == KinematicsModel::SmallAngle) {
    // Same operation order as straight_track_rhs so that zero curvature and
    // cant reproduce it bit for bit.
    const double fy = (a.y() + a.x() * e.yaw) - a.z() * e.roll;
    const double fz = (a.z() - a.x() * e.pitch) + a.y() * e.roll;
    return {fy - kGravity * st.phi - st.rho_h * v2, (fz - kGravity) + st.rho_v * v2};
  }
  const FrameKinematics fk = exact_frame_kinematics(st, in.v, in.v_dot);
  const Vec3 g_track = st.orientation.transpose() * Vec3(0.0, 0.0, kGravity);
  const Vec3 f = rotation_from_euler(e) * a - g_track - fk.acceleration;
  return {f.y(), f.z()};
}

namespace {

Vec3 omega_of(const OdeInput& in, KinematicsModel model, Vec3* alpha) {
  const FrameKinematics fk = model == KinematicsModel::SmallAngle
                                 ? frame_velocity(in.track, in.v, in.v_dot)
                                 : exact_frame_kinematics(in.track, in.v, in.v_dot);
  if (alpha) *alpha = fk.angular_acceleration;
  return fk.angular_velocity;
}

}  // namespace

Mat2 relative_motion_damping(const OdeInput& in, KinematicsModel model) {
  const Vec3 w = omega_of(in, model, nullptr);
  Mat2 c;
  c << 0.0, -2.0 * w.x(), 2.0 * w.x(), 0.0;
  return c;
}

Mat2 relative_motion_stiffness(const OdeInput& in, KinematicsModel model) {
  Vec3 al;
  const Vec3 w = omega_of(in, model, &al);
  Mat2 k;
  k << -(w.x() * w.x() + w.z() * w.z()), w.y() * w.z() - al.x(),
       w.y() * w.z() + al.x(), -(w.x() * w.x() + w.y() * w.y());
  return k;
}

OdeState relative_motion_derivative(const OdeState& x, const OdeInput& in, KinematicsModel model) {
  const Vec2 r = x.head<2>();
  const Vec2 rd = x.tail<2>();
  const Vec2 f = relative_motion_forcing(in, model);
  const Vec2 rdd = f - (relative_motion_damping(in, model) * rd + relative_motion_stiffness(in, model) * r);
  OdeState out;
  out << rd, rdd;
  return out;
}

OdeState rk4_step(const OdeState& x, const OdeInput& in0, const OdeInput& mid, const OdeInput& in1,
                  double h, KinematicsModel model) {
  const OdeState k1 = relative_motion_derivative(x, in0, model);
  const OdeState k2 = relative_motion_derivative(x + 0.5 * h * k1, mid, model);
  const OdeState k3 = relative_motion_derivative(x + 0.5 * h * k2, mid, model);
  const OdeState k4 = relative_motion_derivative(x + h * k3, in1, model);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<OdeState> integrate_relative_motion(const std::vector<double>& t,
                                                const std::vector<OdeInput>& inputs,
                                                const std::vector<OdeInput>& midpoints,
                                                KinematicsModel model, const OdeState& x0) {
  if (t.size() != inputs.size() || (t.size() > 0 && midpoints.size() + 1 != t.size())) {
    throw InputError("relative-motion inputs are not aligned with the time grid");
  }
  std::vector<OdeState> out;
  out.reserve(t.size());
  if (t.empty()) return out;
  out.push_back(x0);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double h = t[k + 1] - t[k];
    if (!(h > 0.0)) throw InputError("relative-motion time grid does not increase");
    out.push_back(rk4_step(out.back(), inputs[k], midpoints[k], inputs[k + 1], h, model));
    if (!out.back().allFinite()) throw NumericalError("relative-motion integration diverged");
  }
  return out;
}

TwistSeries twist(const std::vector<double>& s, const std::vector<double>& cl, double base) {
  if (s.size() != cl.size()) throw InputError("twist input sizes differ");
  if (!(base > 0.0)) throw InputError("twist base must be positive");
  TwistSeries out;
  out.tw.assign(s.size(), 0.0);
  out.available.assign(s.size(), false);
  if (s.empty()) return out;
  if (base > s.back() - s.front()) throw InputError("twist base exceeds the covered span");
  std::vector<double> su, cu;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!su.empty() && s[i] < su.back()) throw InputError("twist abscissa is not monotone");
    if (!su.empty() && s[i] == su.back()) {
      cu.back() = cl[i];
      continue;
    }
    su.push_back(s[i]);
    cu.push_back(cl[i]);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double sb = s[i] - base;
    if (sb < su.front()) continue;
    out.tw[i] = (cl[i] - interpolate_linear(su, cu, sb)) / base;
    out.available[i] = true;
  }
  return out;
}

unsigned worker_count(unsigned requested) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RAILGAUGE_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

OdometryOutput run_odometry(const RunInputs& in, const Track& track, const PipelineConfig& cfg) {
  check_stream(in.encoder_t, cfg.gap_factor, "encoder");
  std::vector<double> imu_t(in.imu.size());
  for (std::size_t k = 0; k < in.imu.size(); ++k) imu_t[k] = in.imu[k].t;
  check_stream(imu_t, cfg.gap_factor, "imu");

  OdometryOutput out;
  const double t0 = in.encoder_t.front(), t1 = in.encoder_t.back();
  std::size_t first = 0;
  while (first < in.imu.size() && in.imu[first].t < t0) ++first;
  std::size_t last = first;
  while (last < in.imu.size() && in.imu[last].t <= t1) ++last;
  if (last - first < 3) throw InputError("IMU and encoder streams do not overlap");
  out.imu_first = first;
  out.t.assign(imu_t.begin() + static_cast<std::ptrdiff_t>(first),
               imu_t.begin() + static_cast<std::ptrdiff_t>(last));
  out.s_app = interpolate_linear(in.encoder_t, in.encoder_s, out.t);

  std::vector<Anchor> anchors{{in.encoder_s.front(), cfg.s_start, 0.0}};
  if (cfg.odometry_enabled) {
    const LocalQuadratic app = local_quadratic(in.encoder_t, in.encoder_s, cfg.sg_window, out.t);
    Odometry odo(curvature_functions(track, cfg.odometry.grid), cfg.odometry, in.encoder_s.front(),
                 cfg.s_start);
    for (std::size_t k = 0; k < out.t.size(); ++k) {
      const auto rho = estimate_curvature(in.imu[first + k].gyro.z(), app.first[k], cfg.odometry.v_min);
      if (rho) odo.push(out.s_app[k], *rho);
    }
    out.anchors = odo.anchors();
    out.ne2 = odo.trace();
    anchors = odo.correction_anchors();
    spdlog::info("odometry: {} anchors from {} curvature functions", out.anchors.size(),
                 odo.functions().size());
  }
  std::vector<double> enc_ref(in.encoder_s.size());
  for (std::size_t i = 0; i < enc_ref.size(); ++i) enc_ref[i] = correct_s(anchors, in.encoder_s[i]);
  out.s_ref.resize(out.t.size());
  for (std::size_t k = 0; k < out.t.size(); ++k) out.s_ref[k] = correct_s(anchors, out.s_app[k]);
  const LocalQuadratic ref = local_quadratic(in.encoder_t, enc_ref, cfg.sg_window, out.t);
  out.v = ref.first;
  out.v_dot = ref.second;
  return out;
}

namespace {

struct FitOutcome {
  bool ok = false;
  FramePair pair;
};

std::vector<FitOutcome> fit_all(const RunInputs& in, const PipelineConfig& cfg) {
  std::vector<FitOutcome> out(in.frames.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= in.frames.size()) return;
      try {
        out[i].pair = fit_frame(in.frames[i], in.left, in.right, in.profile, cfg.fit);
        out[i].ok = true;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(log_mutex);
        spdlog::warn("frame {} quarantined: {}", in.frames[i].id, e.what());
      }
    }
  };
  const unsigned n = std::min<unsigned>(worker_count(cfg.threads),
                                        static_cast<unsigned>(std::max<std::size_t>(in.frames.size(), 1)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return out;
}

Euler average(const Euler& a, const Euler& b) {
  return {0.5 * (a.roll + b.roll), 0.5 * (a.pitch + b.pitch), 0.5 * (a.yaw + b.yaw)};
}

}  // namespace

PipelineResult run_pipeline(const RunInputs& in, const PipelineConfig& cfg) {
  validate(in.layout);
  in.profile.validate();
  const Track track(in.layout);
  PipelineResult res;

  RunInputs local = in;
  if (cfg.gyro_bias_rest > 0.0 && !local.imu.empty()) {
    Vec3 bias = Vec3::Zero();
    std::size_t n = 0;
    for (const auto& smp : local.imu) {
      if (smp.t > local.imu.front().t + cfg.gyro_bias_rest) break;
      bias += smp.gyro;
      ++n;
    }
    bias /= static_cast<double>(n);
    for (auto& smp : local.imu) smp.gyro -= bias;
    spdlog::info("gyro bias estimate ({:.3g}, {:.3g}, {:.3g}) rad/s", bias.x(), bias.y(), bias.z());
  }

  const OdometryOutput odo = run_odometry(local, track, cfg);
  res.anchors = odo.anchors;
  res.ne2 = odo.ne2;
  const std::size_t n = odo.t.size();
  const auto imu = [&](std::size_t k) -> const ImuSample& { return local.imu[odo.imu_first + k]; };

  for (double s : {odo.s_ref.front(), odo.s_ref.back()}) {
    if (s < -1e-9 || s > track.length() + 1e-9) {
      throw RangeError("reference arc length " + std::to_string(s) + " outside the layout [0, " +
                       std::to_string(track.length()) + "]");
    }
  }

  // Attitude.
  std::vector<TrackFrameState> states(n);
  for (std::size_t k = 0; k < n; ++k) states[k] = track.frame_at(odo.s_ref[k]);
  AttitudeFilter filter(cfg.fusion);
  filter.initialize(states[0].orientation);
  std::vector<Euler> euler(n);
  std::vector<bool> free_fall(n, false);
  euler[0] = relative_euler(filter.orientation(), states[0].orientation);
  for (std::size_t k = 1; k < n; ++k) {
    ImuSample smp = imu(k);
    smp.gyro = 0.5 * (imu(k - 1).gyro + imu(k).gyro);
    const Vec3 predicted = cfg.kinematics == KinematicsModel::SmallAngle
                               ? predicted_body_acceleration(states[k], odo.v[k], odo.v_dot[k])
                               : exact_frame_kinematics(states[k], odo.v[k], odo.v_dot[k]).acceleration;
    filter.step(smp, predicted, states[k].orientation, odo.t[k] - odo.t[k - 1]);
    free_fall[k] = filter.free_fall();
    euler[k] = relative_euler(filter.orientation(), states[k].orientation);
  }

  // Relative motion.
  std::vector<OdeInput> inputs(n), mids(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    inputs[k] = {states[k], imu(k).accel, euler[k], odo.v[k], odo.v_dot[k]};
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    mids[k] = {track.frame_at(0.5 * (odo.s_ref[k] + odo.s_ref[k + 1])),
               0.5 * (imu(k).accel + imu(k + 1).accel), average(euler[k], euler[k + 1]),
               0.5 * (odo.v[k] + odo.v[k + 1]), 0.5 * (odo.v_dot[k] + odo.v_dot[k + 1])};
  }
  const std::vector<OdeState> x = integrate_relative_motion(odo.t, inputs, mids, cfg.kinematics);
  std::vector<double> ry(n), rz(n);
  for (std::size_t k = 0; k < n; ++k) {
    ry[k] = x[k](0);
    rz[k] = x[k](1);
  }
  if (cfg.highpass) {
    ry = highpass_on_grid(odo.s_ref, ry, cfg.highpass_cutoff, cfg.highpass_spacing);
    rz = highpass_on_grid(odo.s_ref, rz, cfg.highpass_cutoff, cfg.highpass_spacing);
  }

  res.attitude.reserve(n);
  res.motion.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    res.attitude.push_back({odo.t[k], euler[k]});
    res.motion.push_back({odo.t[k], odo.s_app[k], odo.s_ref[k], odo.v[k], odo.v_dot[k], ry[k], rz[k]});
  }

  // Frames.
  const std::vector<FitOutcome> fits = fit_all(local, cfg);
  std::vector<double> roll(n);
  for (std::size_t k = 0; k < n; ++k) roll[k] = euler[k].roll;
  const int calib_flag =
      (local.left.quality_warning || local.right.quality_warning) ? kCalibrationWarning : 0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (!fits[i].ok) {
      ++res.quarantined;
      continue;
    }
    const FramePair& fp = fits[i].pair;
    if (fp.t < odo.t.front() || fp.t > odo.t.back()) {
      spdlog::warn("frame {} quarantined: outside the IMU/encoder time span", fp.id);
      ++res.quarantined;
      continue;
    }
    try {
      const double phi = interpolate_linear(odo.t, roll, fp.t);
      const Vec2 rel = relative_irregularities(fp, phi, local.layout.half_gauge);
      const Vec2 abs = absolute_irregularities(fp, phi, interpolate_linear(odo.t, ry, fp.t),
                                               interpolate_linear(odo.t, rz, fp.t));
      IrregularityRecord rec;
      rec.s = interpolate_linear(odo.t, odo.s_ref, fp.t);
      rec.al = abs(0);
      rec.vp = abs(1);
      rec.gv = rel(0);
      rec.cl = rel(1);
      int q = calib_flag;
      if (!fp.converged) q |= kFitNotConverged;
      const auto it = std::lower_bound(odo.t.begin(), odo.t.end(), fp.t);
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - odo.t.begin()), n - 1);
      if (free_fall[k]) q |= kFreeFall;
      if (cfg.odometry_enabled) {
        const double sa = interpolate_linear(odo.t, odo.s_app, fp.t);
        if (res.anchors.empty() || sa < res.anchors.front().s_app || sa > res.anchors.back().s_app) {
          q |= kNotAnchored;
        }
      }
      res.records.push_back(rec);
      res.quality.push_back(q);
      res.frames.push_back(fp);
    } catch (const InputError& e) {
      spdlog::warn("frame {} quarantined: {}", fp.id, e.what());
      ++res.quarantined;
    }
  }

  if (!res.records.empty()) {
    std::vector<double> s(res.records.size()), cl(res.records.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = res.records[i].s;
      cl[i] = res.records[i].cl;
    }
    if (s.back() - s.front() >= cfg.twist_base) {
      const TwistSeries tw = twist(s, cl, cfg.twist_base);
      for (std::size_t i = 0; i < s.size(); ++i) {
        res.records[i].tw = tw.tw[i];
        if (!tw.available[i]) res.quality[i] |= kTwistUnavailable;
      }
    } else {
      for (auto& q : res.quality) q |= kTwistUnavailable;
    }
  }
  if (res.quarantined) spdlog::warn("{} frames quarantined", res.quarantined);
  return res;
}

}  // namespace railgauge
