#include "railgauge/sensor_sim.hpp"

#include "railgauge/csv.hpp"
#include "railgauge/layout_io.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace railgauge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

SpeedProfile::SpeedProfile(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
  if (knots_.empty()) throw InputError("speed profile needs at least one knot");
  if (knots_.front().first != 0.0) throw InputError("speed profile must start at t = 0");
  dist_.assign(knots_.size(), 0.0);
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (knots_[i].second < 0.0) throw InputError("speed profile has a negative speed");
    if (i == 0) continue;
    const double dt = knots_[i].first - knots_[i - 1].first;
    if (!(dt > 0.0)) throw InputError("speed profile times must increase");
    dist_[i] = dist_[i - 1] + 0.5 * dt * (knots_[i].second + knots_[i - 1].second);
  }
}

namespace {

std::size_t segment(const std::vector<std::pair<double, double>>& k, double t) {
  std::size_t i = 0;
  while (i + 1 < k.size() && k[i + 1].first <= t) ++i;
  return i;
}

}  // namespace

double SpeedProfile::speed(double t) const {
  const std::size_t i = segment(knots_, t);
  if (i + 1 >= knots_.size()) return knots_.back().second;
  const auto& [t0, v0] = knots_[i];
  const auto& [t1, v1] = knots_[i + 1];
  return v0 + (t - t0) * (v1 - v0) / (t1 - t0);
}

double SpeedProfile::accel(double t) const {
  const std::size_t i = segment(knots_, t);
  if (i + 1 >= knots_.size()) return 0.0;
  return (knots_[i + 1].second - knots_[i].second) / (knots_[i + 1].first - knots_[i].first);
}

double SpeedProfile::distance(double t) const {
  const std::size_t i = segment(knots_, t);
  const double dt = t - knots_[i].first;
  return dist_[i] + knots_[i].second * dt + 0.5 * accel(t) * dt * dt;
}

std::optional<double> SpeedProfile::time_at_distance(double d) const {
  if (d <= 0.0) return 0.0;
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    const bool last = i + 1 == knots_.size();
    if (!last && dist_[i + 1] < d) continue;
    const double v0 = knots_[i].second;
    const double a = last ? 0.0 : accel(knots_[i].first);
    const double rem = d - dist_[i];
    double dt;
    if (std::abs(a) < 1e-15) {
      if (!(v0 > 0.0)) return std::nullopt;
      dt = rem / v0;
    } else {
      const double disc = v0 * v0 + 2.0 * a * rem;
      if (disc < 0.0) return std::nullopt;
      dt = (-v0 + std::sqrt(disc)) / a;
    }
    return knots_[i].first + dt;
  }
  return std::nullopt;
}

double Sinusoid::value(double t) const { return offset + amplitude * std::sin(kTwoPi * frequency * t + phase); }
double Sinusoid::rate(double t) const {
  return amplitude * kTwoPi * frequency * std::cos(kTwoPi * frequency * t + phase);
}
double Sinusoid::accel(double t) const {
  const double w = kTwoPi * frequency;
  return -amplitude * w * w * std::sin(w * t + phase);
}

RelativeMotion MotionSpec::at(double t) const {
  RelativeMotion m;
  m.r = {r_y.value(t), r_z.value(t)};
  m.r_dot = {r_y.rate(t), r_z.rate(t)};
  m.r_ddot = {r_y.accel(t), r_z.accel(t)};
  m.angles = {roll.value(t), pitch.value(t), yaw.value(t)};
  m.angle_rates = {roll.rate(t), pitch.rate(t), yaw.rate(t)};
  m.angle_accels = {roll.accel(t), pitch.accel(t), yaw.accel(t)};
  return m;
}

IrregularityField make_irregularity_field(const IrregularitySpec& spec, double s0, double s1) {
  IrregularityField grid = IrregularityField::zero(s0, s1, spec.spacing);
  std::vector<RailOffsets> samples(grid.samples().size());
  auto channel = [](IrregularityRecord& r, const std::string& name) -> double& {
    if (name == "al") return r.al;
    if (name == "vp") return r.vp;
    if (name == "gv") return r.gv;
    if (name == "cl") return r.cl;
    throw InputError("unknown irregularity channel '" + name + "'");
  };
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double s = s0 + spec.spacing * static_cast<double>(i);
    IrregularityRecord r;
    r.s = s;
    for (const auto& w : spec.sinusoids) {
      if (!(w.wavelength > 0.0)) throw InputError("irregularity wavelength must be positive");
      channel(r, w.channel) += w.amplitude * std::sin(kTwoPi * s / w.wavelength + w.phase);
    }
    for (const auto& st : spec.steps) {
      if (s >= st.s) channel(r, st.channel) += st.value;
    }
    samples[i] = irregularities_to_rails(r);
  }
  return IrregularityField(s0, spec.spacing, std::move(samples));
}

CameraLaser default_camera_laser(Side side) {
  const double sy = side == Side::Right ? 1.0 : -1.0;
  const Vec3 pos{-0.35, -0.40 * sy, 0.45};
  const Vec3 target{0.0, -0.73 * sy, -0.01};
  const Vec3 z = (target - pos).normalized();
  const Vec3 x = Vec3::UnitZ().cross(z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 a;
  a.col(0) = x;
  a.col(1) = y;
  a.col(2) = z;
  Mat3 k;
  k << 2000.0, 0.0, 0.0, 0.0, 2000.0, 0.0, 0.0, 0.0, 1.0;
  CameraLaser head;
  head.camera = CameraModel(k, pos, euler_from_rotation(a));
  head.plane = LaserPlane(1.0, 0.0, 0.0, 0.0);
  return head;
}

ScenarioConfig default_scenario(const TrackLayout& layout) {
  ScenarioConfig cfg;
  cfg.layout = layout;
  cfg.left = default_camera_laser(Side::Left);
  cfg.right = default_camera_laser(Side::Right);
  return cfg;
}

namespace {

Sinusoid read_sinusoid(const json& j) {
  Sinusoid s;
  s.amplitude = j.value("amplitude", 0.0);
  s.frequency = j.value("frequency", 0.0);
  s.phase = j.value("phase", 0.0);
  s.offset = j.value("offset", 0.0);
  return s;
}

}  // namespace

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    return fs::path(p).is_absolute() ? p : (base / p).string();
  };
  ScenarioConfig cfg;
  try {
    const json j = json::parse(in);
    if (!j.contains("layout")) throw InputError(path + ": scenario needs a 'layout' entry");
    cfg = default_scenario(load_layout(resolve(j.at("layout").get<std::string>())));
    cfg.s_start = j.value("s_start", cfg.s_start);
    cfg.duration = j.value("duration", cfg.duration);
    cfg.points_per_rail = j.value("points_per_rail", cfg.points_per_rail);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.twist_base = j.value("twist_base", cfg.twist_base);
    if (j.contains("speed")) {
      std::vector<std::pair<double, double>> knots;
      for (const auto& k : j.at("speed")) knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
      cfg.speed = SpeedProfile(knots);
    }
    if (j.contains("irregularities")) {
      const json& ir = j.at("irregularities");
      if (ir.contains("file")) {
        cfg.field = load_irregularities(resolve(ir.at("file").get<std::string>()));
        cfg.field_given = true;
      }
      cfg.irregularities.spacing = ir.value("spacing", cfg.irregularities.spacing);
      for (const auto& w : ir.value("sinusoids", json::array())) {
        cfg.irregularities.sinusoids.push_back({w.at("channel").get<std::string>(), w.at("amplitude").get<double>(),
                                                w.at("wavelength").get<double>(), w.value("phase", 0.0)});
      }
      for (const auto& st : ir.value("steps", json::array())) {
        cfg.irregularities.steps.push_back(
            {st.at("channel").get<std::string>(), st.at("s").get<double>(), st.at("value").get<double>()});
      }
    }
    if (j.contains("motion")) {
      const json& m = j.at("motion");
      if (m.contains("r_y")) cfg.motion.r_y = read_sinusoid(m.at("r_y"));
      if (m.contains("r_z")) cfg.motion.r_z = read_sinusoid(m.at("r_z"));
      if (m.contains("roll")) cfg.motion.roll = read_sinusoid(m.at("roll"));
      if (m.contains("pitch")) cfg.motion.pitch = read_sinusoid(m.at("pitch"));
      if (m.contains("yaw")) cfg.motion.yaw = read_sinusoid(m.at("yaw"));
    }
    if (j.contains("rates")) {
      const json& r = j.at("rates");
      cfg.imu_rate = r.value("imu", cfg.imu_rate);
      cfg.encoder_rate = r.value("encoder", cfg.encoder_rate);
      cfg.camera_rate = r.value("camera", cfg.camera_rate);
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      cfg.noise.accel = n.value("accel", 0.0);
      cfg.noise.gyro = n.value("gyro", 0.0);
      cfg.noise.pixel = n.value("pixel", 0.0);
      cfg.noise.encoder = n.value("encoder", 0.0);
      cfg.noise.drift = n.value("drift", 1.0);
      if (n.contains("gyro_bias")) {
        const auto& b = n.at("gyro_bias");
        cfg.noise.gyro_bias = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>()};
      }
    }
    if (j.contains("cameras")) {
      const json& c = j.at("cameras");
      if (c.contains("left")) cfg.left = load_camera_file(resolve(c.at("left").get<std::string>()));
      if (c.contains("right")) cfg.right = load_camera_file(resolve(c.at("right").get<std::string>()));
    }
    if (j.contains("template")) cfg.profile = load_template(resolve(j.at("template").get<std::string>()));
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!(cfg.imu_rate > 0.0 && cfg.encoder_rate > 0.0 && cfg.camera_rate > 0.0)) {
    throw InputError(path + ": sensor rates must be positive");
  }
  if (!(std::abs(cfg.noise.drift - 1.0) < 0.1)) throw InputError(path + ": drift factor must be within 10% of 1");
  if (cfg.points_per_rail < 5) throw InputError(path + ": points_per_rail must be at least 5");
  return cfg;
}

std::optional<Vec3> laser_slice_point(const Track& track, const IrregularityField& field,
                                      const TrackFrameState& state, const RelativeMotion& motion,
                                      const LaserPlane& plane, Side side, const Vec2& u_hat) {
  const Vec3 r{0.0, motion.r.x(), motion.r.y()};
  const Vec3 origin = state.position + state.orientation * r;
  const Mat3 a_tgms = state.orientation * relative_rotation(motion.angles, RotationModel::Exact);
  auto local = [&](double s) -> std::optional<Vec3> {
    if (s < 0.0 || s > track.length() || s < field.s0() || s > field.s1()) return std::nullopt;
    return Vec3(a_tgms.transpose() * (rail_point_global(track, s, side, field, u_hat) - origin));
  };
  double s0 = state.s, s1 = state.s + 0.01;
  auto u0 = local(s0), u1 = local(s1);
  if (!u0 || !u1) return std::nullopt;
  double g0 = plane.residual(*u0), g1 = plane.residual(*u1);
  for (int it = 0; it < 60; ++it) {
    if (std::abs(g1) < 1e-14) break;
    const double den = g1 - g0;
    if (den == 0.0) break;
    const double s2 = s1 - g1 * (s1 - s0) / den;
    const auto u2 = local(s2);
    if (!u2) return std::nullopt;
    s0 = s1;
    g0 = g1;
    s1 = s2;
    u1 = u2;
    g1 = plane.residual(*u1);
    if (std::abs(s1 - s0) < 1e-13) break;
  }
  if (!(std::abs(g1) < 1e-10)) return std::nullopt;
  return u1;
}

CalibrationSet synthetic_trihedral(const CameraLaser& head, Side side, double sigma, std::mt19937_64& rng) {
  const double sy = side == Side::Right ? 1.0 : -1.0;
  std::vector<Vec3> p = {
      // floor z = -0.06
      {-0.10, -0.78, -0.06}, {-0.05, -0.62, -0.06}, {0.00, -0.70, -0.06}, {0.03, -0.76, -0.06}, {-0.08, -0.66, -0.06},
      // back wall y = -0.80
      {-0.10, -0.80, -0.04}, {-0.06, -0.80, 0.05}, {0.00, -0.80, 0.00}, {0.04, -0.80, -0.03}, {-0.03, -0.80, 0.03},
      // front wall x = 0.05
      {0.05, -0.78, 0.04}, {0.05, -0.66, -0.04}, {0.05, -0.72, 0.00}, {0.05, -0.63, 0.05}, {0.05, -0.75, -0.05}};
  std::vector<Vec3> q = {{0.0, -0.78, -0.06}, {0.0, -0.72, -0.06}, {0.0, -0.66, -0.06},
                         {0.0, -0.80, -0.04}, {0.0, -0.80, 0.00}, {0.0, -0.80, 0.04}};
  std::normal_distribution<double> noise(0.0, 1.0);
  CalibrationSet set;
  for (auto& pt : p) {
    pt.y() *= sy;
    PixelPoint px = project(head.camera, pt);
    if (sigma > 0.0) px += sigma * Vec2(noise(rng), noise(rng));
    set.pattern_points.push_back(pt);
    set.pattern_pixels.push_back(px);
  }
  for (auto& pt : q) {
    pt.y() *= sy;
    set.laser_points.push_back(pt);
  }
  return set;
}

Simulation simulate(const ScenarioConfig& cfg) {
  validate(cfg.layout);
  cfg.profile.validate();
  const Track track(cfg.layout);
  Simulation sim;
  sim.s_start = cfg.s_start;
  sim.field = cfg.field_given ? cfg.field : make_irregularity_field(cfg.irregularities, 0.0, track.length());
  const double s_max = std::min(track.length(), sim.field.s1());
  if (cfg.s_start < std::max(0.0, sim.field.s0()) || cfg.s_start >= s_max) {
    throw InputError("scenario start s=" + std::to_string(cfg.s_start) + " outside the layout");
  }
  double duration = cfg.duration;
  if (duration <= 0.0) {
    const auto t = cfg.speed.time_at_distance(s_max - 10.0 - cfg.s_start);
    if (!t) throw InputError("speed profile never reaches the end of the layout");
    duration = *t;
  }
  if (cfg.s_start + cfg.speed.distance(duration) > s_max) {
    throw InputError("scenario runs past the end of the layout");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto s_at = [&](double t) { return cfg.s_start + cfg.speed.distance(t); };

  const auto n_imu = static_cast<std::size_t>(std::floor(duration * cfg.imu_rate + 1e-9)) + 1;
  for (std::size_t i = 0; i < n_imu; ++i) {
    const double t = static_cast<double>(i) / cfg.imu_rate;
    const double s = s_at(t);
    const TrackFrameState st = track.frame_at(s);
    const FrameKinematics fk = exact_frame_kinematics(st, cfg.speed.speed(t), cfg.speed.accel(t));
    const RelativeMotion m = cfg.motion.at(t);
    const BodyPointKinematics bk = body_kinematics(m, fk, Vec3::Zero(), RotationModel::Exact);
    const Mat3 a_rel = relative_rotation(m.angles, RotationModel::Exact);
    ImuSample smp;
    smp.t = t;
    smp.accel = a_rel.transpose() * (bk.acceleration + st.orientation.transpose() * Vec3(0.0, 0.0, kGravity));
    smp.gyro = bk.angular_velocity + cfg.noise.gyro_bias;
    if (cfg.noise.accel > 0.0) smp.accel += cfg.noise.accel * Vec3(normal(rng), normal(rng), normal(rng));
    if (cfg.noise.gyro > 0.0) smp.gyro += cfg.noise.gyro * Vec3(normal(rng), normal(rng), normal(rng));
    sim.inputs.imu.push_back(smp);
    sim.motion.push_back({t, s, m});
  }

  const auto n_enc = static_cast<std::size_t>(std::floor(duration * cfg.encoder_rate + 1e-9)) + 1;
  for (std::size_t i = 0; i < n_enc; ++i) {
    const double t = static_cast<double>(i) / cfg.encoder_rate;
    double s_app = cfg.s_start + cfg.noise.drift * (s_at(t) - cfg.s_start);
    if (cfg.noise.encoder > 0.0) s_app += cfg.noise.encoder * normal(rng);
    sim.inputs.encoder_t.push_back(t);
    sim.inputs.encoder_s.push_back(s_app);
  }

  const double half_w = 0.5 * cfg.image_width, half_h = 0.5 * cfg.image_height;
  const auto n_cam = static_cast<std::size_t>(std::floor(duration * cfg.camera_rate + 1e-9)) + 1;
  for (std::size_t i = 0; i < n_cam; ++i) {
    const double t = static_cast<double>(i) / cfg.camera_rate;
    const double s = s_at(t);
    const TrackFrameState st = track.frame_at(s);
    const RelativeMotion m = cfg.motion.at(t);
    FrameInput frame;
    frame.id = static_cast<long long>(i);
    frame.t = t;
    for (Side side : {Side::Left, Side::Right}) {
      const CameraLaser& head = side == Side::Left ? cfg.left : cfg.right;
      auto& pixels = side == Side::Left ? frame.left : frame.right;
      for (int k = 0; k < cfg.points_per_rail; ++k) {
        const double alpha = std::min(cfg.profile.alpha_max,
                                      cfg.profile.alpha_min + (cfg.profile.alpha_max - cfg.profile.alpha_min) *
                                                                  static_cast<double>(k) / (cfg.points_per_rail - 1));
        Vec2 u_hat = profile_point(cfg.profile, alpha);
        if (side == Side::Left) u_hat.x() = -u_hat.x();
        const auto u = laser_slice_point(track, sim.field, st, m, head.plane, side, u_hat);
        if (!u) continue;
        const Projection pr = project_with_scale(head.camera, *u);
        if (!(pr.scale > 0.0)) continue;
        PixelPoint px = pr.pixel;
        if (cfg.noise.pixel > 0.0) px += cfg.noise.pixel * Vec2(normal(rng), normal(rng));
        if (std::abs(px.x()) > half_w || std::abs(px.y()) > half_h) continue;
        pixels.push_back(px);
      }
      if (pixels.empty()) {
        throw GeometryError("frame " + std::to_string(frame.id) + ": the " + to_string(side) +
                            " camera cannot see the rail head");
      }
    }
    sim.inputs.frames.push_back(std::move(frame));
    sim.frame_s.push_back(s);
    IrregularityRecord rec = irregularities_from_rails(s, sim.field.at(s));
    sim.truth.records.push_back(rec);
    sim.truth.quality.push_back(0);
  }
  if (sim.frame_s.size() >= 2 && sim.frame_s.back() - sim.frame_s.front() >= cfg.twist_base) {
    std::vector<double> cl(sim.frame_s.size());
    for (std::size_t i = 0; i < cl.size(); ++i) cl[i] = sim.truth.records[i].cl;
    const TwistSeries tw = twist(sim.frame_s, cl, cfg.twist_base);
    for (std::size_t i = 0; i < cl.size(); ++i) {
      sim.truth.records[i].tw = tw.tw[i];
      if (!tw.available[i]) sim.truth.quality[i] |= kTwistUnavailable;
    }
  }

  sim.inputs.left = cfg.left;
  sim.inputs.right = cfg.right;
  sim.inputs.layout = cfg.layout;
  sim.inputs.profile = cfg.profile;
  return sim;
}

void write_simulation(const Simulation& sim, const ScenarioConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  RunInfo info;
  info.dir = dir;
  info.s_start = sim.s_start;
  save_imu(sim.inputs.imu, info.path(info.files.imu));
  {
    CsvWriter w(info.path(info.files.encoder), {"t", "s_app"});
    for (std::size_t i = 0; i < sim.inputs.encoder_t.size(); ++i) {
      w.cell(sim.inputs.encoder_t[i]).cell(sim.inputs.encoder_s[i]);
      w.end_row();
    }
  }
  {
    CsvWriter f(info.path(info.files.frames), {"frame_id", "t"});
    CsvWriter p(info.path(info.files.pixels), {"frame_id", "side", "px", "py"});
    for (const auto& fr : sim.inputs.frames) {
      f.cell(fr.id).cell(fr.t);
      f.end_row();
      for (const auto& px : fr.left) {
        p.cell(fr.id).cell(std::string("left")).cell(px.x()).cell(px.y());
        p.end_row();
      }
      for (const auto& px : fr.right) {
        p.cell(fr.id).cell(std::string("right")).cell(px.x()).cell(px.y());
        p.end_row();
      }
    }
  }
  save_records(sim.truth.records, sim.truth.quality, info.path(info.files.truth));
  {
    CsvWriter w(info.path("truth_motion.csv"), {"t", "s", "r_y", "r_z", "phi", "theta", "psi"});
    for (const auto& m : sim.motion) {
      w.cell(m.t).cell(m.s).cell(m.motion.r.x()).cell(m.motion.r.y());
      w.cell(m.motion.angles.roll).cell(m.motion.angles.pitch).cell(m.motion.angles.yaw);
      w.end_row();
    }
  }
  save_irregularities(sim.field, info.path("rails.csv"));
  save_camera_file(sim.inputs.left, info.path(info.files.camera_left));
  save_camera_file(sim.inputs.right, info.path(info.files.camera_right));
  save_layout(sim.inputs.layout, info.path(info.files.layout));
  save_template(sim.inputs.profile, info.path(info.files.profile));
  std::mt19937_64 rng(cfg.seed ^ 0x5eedca11b7a710ULL);
  save_correspondences(synthetic_trihedral(sim.inputs.left, Side::Left, cfg.noise.pixel, rng),
                       info.path("correspondences_left.csv"));
  save_correspondences(synthetic_trihedral(sim.inputs.right, Side::Right, cfg.noise.pixel, rng),
                       info.path("correspondences_right.csv"));
  json extra;
  extra["seed"] = cfg.seed;
  extra["rates"] = {{"imu", cfg.imu_rate}, {"encoder", cfg.encoder_rate}, {"camera", cfg.camera_rate}};
  extra["noise"] = {{"accel", cfg.noise.accel}, {"gyro", cfg.noise.gyro}, {"pixel", cfg.noise.pixel},
                    {"encoder", cfg.noise.encoder}, {"drift", cfg.noise.drift}};
  extra["frames"] = sim.inputs.frames.size();
  save_run_info(info, extra.dump());
  spdlog::info("simulation written to {} ({} IMU samples, {} frames)", dir, sim.inputs.imu.size(),
               sim.inputs.frames.size());
}

}  // namespace railgauge
