#include "railgauge/calibration.hpp"
#include "railgauge/csv.hpp"
#include "railgauge/layout_io.hpp"
#include "railgauge/pipeline.hpp"
#include "railgauge/run_io.hpp"
#include "railgauge/sensor_sim.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace railgauge;

namespace {

struct GlobalOptions {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  double dt = 0.0;
  bool verbose = false;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig pipeline_config(const GlobalOptions& g, double s_start) {
  PipelineConfig cfg;
  cfg.s_start = s_start;
  if (!g.config.empty()) apply_config_json(cfg, read_text(g.config), g.config);
  return cfg;
}

int cmd_simulate(const GlobalOptions& g, const std::string& scenario) {
  ScenarioConfig cfg = load_scenario(scenario);
  if (g.seed_set) cfg.seed = g.seed;
  if (g.dt > 0.0) cfg.imu_rate = 1.0 / g.dt;
  const std::string out = g.out.empty() ? "run" : g.out;
  const Simulation sim = simulate(cfg);
  write_simulation(sim, cfg, out);
  std::printf("wrote %s: %zu IMU samples, %zu frames\n", out.c_str(), sim.inputs.imu.size(),
              sim.inputs.frames.size());
  return 0;
}

int cmd_calibrate(const GlobalOptions& g, const std::string& path, bool refine) {
  const CalibrationSet set = load_correspondences(path);
  CameraCalibrationOptions opt;
  opt.refine = refine;
  const CameraLaser head = calibrate(set, opt);
  const std::string out = g.out.empty() ? "camera.json" : g.out;
  save_camera_file(head, out);
  const Vec3& u = head.camera.position();
  const Vec4 c = head.plane.coefficients();
  std::printf("camera position  %.9f %.9f %.9f\n", u.x(), u.y(), u.z());
  std::printf("laser plane      %.12f %.12f %.12f %.12f\n", c(0), c(1), c(2), c(3));
  std::printf("reprojection rms %.4f px%s\n", head.reprojection_rms,
              head.quality_warning ? "  (WARNING: above threshold)" : "");
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_fit_profile(const GlobalOptions& g, const std::string& path, const std::string& cameras,
                    const std::string& tpl_path) {
  const CsvTable tab = read_csv(path);
  const RailProfileTemplate tpl = tpl_path.empty() ? default_template() : load_template(tpl_path);
  const bool pixels = tab.has_column("px");
  const std::size_t cid = tab.column("frame_id"), cside = tab.column("side");
  const std::size_t ca = tab.column(pixels ? "px" : "y"), cb = tab.column(pixels ? "py" : "z");
  CameraLaser heads[2];
  if (pixels) {
    const fs::path dir = cameras.empty() ? fs::path(path).parent_path() : fs::path(cameras);
    heads[0] = load_camera_file((dir / "camera_left.json").string());
    heads[1] = load_camera_file((dir / "camera_right.json").string());
  }
  std::map<std::pair<long long, int>, std::vector<Vec2>> clouds;
  for (std::size_t i = 0; i < tab.rows.size(); ++i) {
    const auto id = static_cast<long long>(tab.number(i, cid));
    const int side = side_from_string(tab.rows[i][cside]) == Side::Left ? 0 : 1;
    clouds[{id, side}].emplace_back(tab.number(i, ca), tab.number(i, cb));
  }
  const fs::path out = g.out.empty() ? fs::path(".") : fs::path(g.out);
  fs::create_directories(out);
  CsvWriter fits((out / "fits.csv").string(), {"frame_id", "side", "y_Orp", "z_Orp", "phi_rp", "rms", "converged"});
  CsvWriter wear((out / "wear.csv").string(), {"frame_id", "side", "y", "z", "alpha", "offset"});
  std::size_t failed = 0;
  for (const auto& [key, raw] : clouds) {
    const Side side = key.second == 0 ? Side::Left : Side::Right;
    try {
      std::vector<Vec2> cloud = raw;
      if (pixels) {
        const TriangulatedCloud tc = triangulate_cloud(heads[key.second].camera, heads[key.second].plane, raw);
        cloud.clear();
        for (const auto& p : tc.points) cloud.emplace_back(p.y(), p.z());
      }
      const FitResult r = fit_rail(cloud, side, tpl);
      fits.cell(key.first).cell(std::string(to_string(side))).cell(r.origin.x()).cell(r.origin.y());
      fits.cell(r.roll).cell(r.rms_residual).cell(static_cast<long long>(r.converged));
      fits.end_row();
      for (const auto& w : wear_report(cloud, r, tpl, side)) {
        wear.cell(key.first).cell(std::string(to_string(side))).cell(w.point.x()).cell(w.point.y());
        wear.cell(w.alpha).cell(w.offset);
        wear.end_row();
      }
    } catch (const NumericalError& e) {
      ++failed;
      spdlog::warn("frame {} {}: {}", key.first, to_string(side), e.what());
    }
  }
  std::printf("fitted %zu clouds (%zu failed), wrote %s\n", clouds.size() - failed, failed,
              (out / "fits.csv").string().c_str());
  return 0;
}

int cmd_odometry(const GlobalOptions& g, const std::string& run) {
  const RunInfo info = load_run_info(run);
  PipelineConfig cfg = pipeline_config(g, info.s_start);
  cfg.odometry_enabled = true;
  RunInputs in;
  in.layout = load_layout(info.path(info.files.layout));
  in.imu = load_imu(info.path(info.files.imu));
  load_encoder(info.path(info.files.encoder), in.encoder_t, in.encoder_s);
  validate(in.layout);
  const Track track(in.layout);
  const OdometryOutput odo = run_odometry(in, track, cfg);
  const fs::path out = g.out.empty() ? fs::path(run) / "odometry" : fs::path(g.out);
  fs::create_directories(out);
  save_anchors(odo.anchors, (out / "anchors.csv").string());
  save_ne2(odo.ne2, (out / "ne2.csv").string());
  CsvWriter w((out / "s_ref.csv").string(), {"t", "s_app", "s_ref", "v", "v_dot"});
  for (std::size_t k = 0; k < odo.t.size(); ++k) {
    w.cell(odo.t[k]).cell(odo.s_app[k]).cell(odo.s_ref[k]).cell(odo.v[k]).cell(odo.v_dot[k]);
    w.end_row();
  }
  for (const auto& a : odo.anchors) {
    std::printf("anchor s_app=%.3f s_ideal=%.3f ne2=%.4g\n", a.s_app, a.s_ideal, a.ne2_min);
  }
  std::printf("%zu anchors, wrote %s\n", odo.anchors.size(), out.string().c_str());
  return 0;
}

int cmd_estimate(const GlobalOptions& g, const std::string& run) {
  const RunInfo info = load_run_info(run);
  const PipelineConfig cfg = pipeline_config(g, info.s_start);
  const RunInputs in = load_run(info);
  const PipelineResult res = run_pipeline(in, cfg);
  const fs::path out = g.out.empty() ? fs::path(run) / "estimate" : fs::path(g.out);
  save_pipeline_outputs(res, out.string());
  std::map<std::string, std::string> inputs = {
      {"imu", info.path(info.files.imu)},
      {"encoder", info.path(info.files.encoder)},
      {"frames", info.path(info.files.frames)},
      {"pixels", info.path(info.files.pixels)},
      {"camera_left", info.path(info.files.camera_left)},
      {"camera_right", info.path(info.files.camera_right)},
      {"layout", info.path(info.files.layout)}};
  if (fs::exists(info.path(info.files.profile))) inputs["template"] = info.path(info.files.profile);
  if (!g.config.empty()) inputs["config"] = g.config;
  save_manifest((out / "manifest.json").string(), cfg, inputs, res);
  std::printf("%zu records, %zu frames quarantined, wrote %s\n", res.records.size(), res.quarantined,
              (out / "irregularities.csv").string().c_str());
  return 0;
}

int cmd_compare(const GlobalOptions& g, const std::string& est, const std::string& truth) {
  const PipelineConfig cfg = pipeline_config(g, 0.0);
  CompareOptions opt;
  opt.cutoff = cfg.highpass_cutoff;
  opt.spacing = cfg.highpass_spacing;
  opt.highpass_absolute = cfg.highpass;
  const auto errors = compare_records(load_records(est), load_records(truth), opt, g.out);
  std::printf("%-4s %14s %14s %8s\n", "chan", "rms", "max", "n");
  for (const auto& e : errors) {
    std::printf("%-4s %14.6e %14.6e %8zu\n", e.name.c_str(), e.rms, e.max, e.count);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Track geometry irregularity measurement from camera, laser and inertial data"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON configuration file");
  auto* seed = app.add_option("--seed", g.seed, "random seed (simulate)");
  app.add_option("--out", g.out, "output file or directory");
  app.add_option("--dt", g.dt, "IMU sampling period in seconds (simulate)");
  app.add_flag("--verbose", g.verbose, "debug logging");

  std::string a1, a2, cameras, tpl;
  bool refine = false;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic run from a scenario");
  sim->add_option("scenario", a1, "scenario JSON")->required();
  auto* cal = app.add_subcommand("calibrate", "calibrate a camera and laser plane");
  cal->add_option("correspondences", a1, "tag,X,Y,Z,px,py CSV")->required();
  cal->add_flag("--refine", refine, "refine the DLT solution by minimising reprojection error");
  auto* fit = app.add_subcommand("fit-profile", "fit the rail template to point clouds");
  fit->add_option("cloud", a1, "CSV with frame_id,side and y,z or px,py")->required();
  fit->add_option("--cameras", cameras, "directory with camera_left.json and camera_right.json");
  fit->add_option("--template", tpl, "rail template JSON");
  auto* odo = app.add_subcommand("odometry", "detect curve exits and correct the encoder");
  odo->add_option("run", a1, "run directory")->required();
  auto* est = app.add_subcommand("estimate", "run the full measurement pipeline");
  est->add_option("run", a1, "run directory")->required();
  auto* cmp = app.add_subcommand("compare", "compare an estimate against ground truth");
  cmp->add_option("estimate", a1, "estimate CSV")->required();
  cmp->add_option("truth", a2, "truth CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  g.seed_set = seed->count() > 0;
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*sim) return cmd_simulate(g, a1);
    if (*cal) return cmd_calibrate(g, a1, refine);
    if (*fit) return cmd_fit_profile(g, a1, cameras, tpl);
    if (*odo) return cmd_odometry(g, a1);
    if (*est) return cmd_estimate(g, a1);
    if (*cmp) return cmd_compare(g, a1, a2);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
