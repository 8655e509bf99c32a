#include "railgauge/run_io.hpp"

#include "railgauge/csv.hpp"
#include "railgauge/layout_io.hpp"
#include "railgauge/signal.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace railgauge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string RunInfo::path(const std::string& name) const {
  const fs::path p(name);
  return p.is_absolute() ? name : (fs::path(dir) / p).string();
}

RunInfo load_run_info(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("run directory '" + dir + "' does not exist");
  RunInfo info;
  info.dir = dir;
  const fs::path p = fs::path(dir) / "run.json";
  if (!fs::exists(p)) return info;
  std::ifstream in(p);
  try {
    const json j = json::parse(in);
    if (j.contains("s_start")) info.s_start = j.at("s_start").get<double>();
    if (j.contains("files")) {
      const json& f = j.at("files");
      auto get = [&](const char* key, std::string& out) {
        if (f.contains(key)) out = f.at(key).get<std::string>();
      };
      get("imu", info.files.imu);
      get("encoder", info.files.encoder);
      get("frames", info.files.frames);
      get("pixels", info.files.pixels);
      get("camera_left", info.files.camera_left);
      get("camera_right", info.files.camera_right);
      get("layout", info.files.layout);
      get("template", info.files.profile);
      get("truth", info.files.truth);
    }
  } catch (const json::exception& e) {
    throw InputError(p.string() + ": " + e.what());
  }
  return info;
}

void save_run_info(const RunInfo& info, const std::string& extra_json) {
  json j = json::parse(extra_json);
  j["s_start"] = info.s_start;
  j["files"] = {{"imu", info.files.imu},         {"encoder", info.files.encoder},
                {"frames", info.files.frames},   {"pixels", info.files.pixels},
                {"camera_left", info.files.camera_left},
                {"camera_right", info.files.camera_right},
                {"layout", info.files.layout},   {"template", info.files.profile},
                {"truth", info.files.truth}};
  std::ofstream out(fs::path(info.dir) / "run.json");
  if (!out) throw InputError("cannot write run.json in '" + info.dir + "'");
  out << j.dump(2) << "\n";
}

std::vector<ImuSample> load_imu(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::size_t ct = t.column("t"), ax = t.column("ax"), ay = t.column("ay"), az = t.column("az"),
                    wx = t.column("wx"), wy = t.column("wy"), wz = t.column("wz");
  std::vector<ImuSample> out(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out[i].t = t.number(i, ct);
    out[i].accel = {t.number(i, ax), t.number(i, ay), t.number(i, az)};
    out[i].gyro = {t.number(i, wx), t.number(i, wy), t.number(i, wz)};
    if (!out[i].accel.allFinite() || !out[i].gyro.allFinite() || !std::isfinite(out[i].t)) {
      throw InputError(path + ": non-finite value in row " + std::to_string(i + 1));
    }
  }
  return out;
}

void save_imu(const std::vector<ImuSample>& imu, const std::string& path) {
  CsvWriter w(path, {"t", "ax", "ay", "az", "wx", "wy", "wz"});
  for (const auto& s : imu) {
    w.cell(s.t).cell(s.accel.x()).cell(s.accel.y()).cell(s.accel.z());
    w.cell(s.gyro.x()).cell(s.gyro.y()).cell(s.gyro.z());
    w.end_row();
  }
}

void load_encoder(const std::string& path, std::vector<double>& t, std::vector<double>& s) {
  const CsvTable tab = read_csv(path);
  t = tab.numbers("t");
  s = tab.numbers("s_app");
}

std::vector<FrameInput> load_frames(const std::string& frames_path, const std::string& pixels_path) {
  const CsvTable f = read_csv(frames_path);
  const std::size_t fid = f.column("frame_id"), ft = f.column("t");
  std::vector<FrameInput> out(f.rows.size());
  std::unordered_map<long long, std::size_t> index;
  for (std::size_t i = 0; i < f.rows.size(); ++i) {
    out[i].id = static_cast<long long>(f.number(i, fid));
    out[i].t = f.number(i, ft);
    if (!index.emplace(out[i].id, i).second) {
      throw InputError(frames_path + ": duplicate frame_id " + std::to_string(out[i].id));
    }
  }
  const CsvTable p = read_csv(pixels_path);
  const std::size_t pid = p.column("frame_id"), ps = p.column("side"), px = p.column("px"),
                    py = p.column("py");
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const auto id = static_cast<long long>(p.number(i, pid));
    const auto it = index.find(id);
    if (it == index.end()) {
      throw InputError(pixels_path + ": frame_id " + std::to_string(id) + " not in " + frames_path);
    }
    const PixelPoint pt{p.number(i, px), p.number(i, py)};
    if (side_from_string(p.rows[i][ps]) == Side::Left) out[it->second].left.push_back(pt);
    else out[it->second].right.push_back(pt);
  }
  std::stable_sort(out.begin(), out.end(), [](const FrameInput& a, const FrameInput& b) { return a.t < b.t; });
  return out;
}

RunInputs load_run(const RunInfo& info) {
  RunInputs in;
  in.left = load_camera_file(info.path(info.files.camera_left));
  in.right = load_camera_file(info.path(info.files.camera_right));
  in.layout = load_layout(info.path(info.files.layout));
  const std::string tpl = info.path(info.files.profile);
  in.profile = fs::exists(tpl) ? load_template(tpl) : default_template();
  in.imu = load_imu(info.path(info.files.imu));
  load_encoder(info.path(info.files.encoder), in.encoder_t, in.encoder_s);
  in.frames = load_frames(info.path(info.files.frames), info.path(info.files.pixels));
  return in;
}

RecordSet load_records(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::size_t cs = t.column("s"), cal = t.column("al"), cvp = t.column("vp"), cgv = t.column("gv"),
                    ccl = t.column("cl"), ctw = t.column("tw");
  const bool has_q = t.has_column("quality");
  RecordSet out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.records.push_back({t.number(i, cs), t.number(i, cal), t.number(i, cvp), t.number(i, cgv),
                           t.number(i, ccl), t.number(i, ctw)});
    out.quality.push_back(has_q ? static_cast<int>(t.number(i, t.column("quality"))) : 0);
  }
  return out;
}

void save_records(const std::vector<IrregularityRecord>& records, const std::vector<int>& quality,
                  const std::string& path) {
  CsvWriter w(path, {"s", "al", "vp", "gv", "cl", "tw", "quality"});
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    w.cell(r.s).cell(r.al).cell(r.vp).cell(r.gv).cell(r.cl).cell(r.tw);
    w.cell(static_cast<long long>(i < quality.size() ? quality[i] : 0));
    w.end_row();
  }
}

void save_anchors(const std::vector<Anchor>& anchors, const std::string& path) {
  CsvWriter w(path, {"s_app", "s_ideal", "ne2_min"});
  for (const auto& a : anchors) {
    w.cell(a.s_app).cell(a.s_ideal).cell(a.ne2_min);
    w.end_row();
  }
}

void save_ne2(const std::vector<Ne2Sample>& trace, const std::string& path) {
  CsvWriter w(path, {"s_app", "function", "ne2"});
  for (const auto& n : trace) {
    w.cell(n.s_app).cell(static_cast<long long>(n.function)).cell(n.ne2);
    w.end_row();
  }
}

void save_pipeline_outputs(const PipelineResult& res, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  save_records(res.records, res.quality, (d / "irregularities.csv").string());
  {
    CsvWriter w((d / "attitude.csv").string(), {"t", "phi", "theta", "psi"});
    for (const auto& a : res.attitude) {
      w.cell(a.t).cell(a.euler.roll).cell(a.euler.pitch).cell(a.euler.yaw);
      w.end_row();
    }
  }
  {
    CsvWriter w((d / "motion.csv").string(), {"t", "s_app", "s_ref", "v", "v_dot", "r_y", "r_z"});
    for (const auto& m : res.motion) {
      w.cell(m.t).cell(m.s_app).cell(m.s_ref).cell(m.v).cell(m.v_dot).cell(m.r_y).cell(m.r_z);
      w.end_row();
    }
  }
  {
    CsvWriter w((d / "fits.csv").string(), {"frame_id", "side", "y_Orp", "z_Orp", "phi_rp", "rms", "converged"});
    for (const auto& f : res.frames) {
      w.cell(f.id).cell(std::string("left")).cell(f.left_origin.x()).cell(f.left_origin.y());
      w.cell(f.left_roll).cell(f.left_rms).cell(static_cast<long long>(f.converged));
      w.end_row();
      w.cell(f.id).cell(std::string("right")).cell(f.right_origin.x()).cell(f.right_origin.y());
      w.cell(f.right_roll).cell(f.right_rms).cell(static_cast<long long>(f.converged));
      w.end_row();
    }
  }
  save_anchors(res.anchors, (d / "anchors.csv").string());
  save_ne2(res.ne2, (d / "ne2.csv").string());
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw NumericalError("SHA-256 initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

void save_manifest(const std::string& path, const PipelineConfig& cfg,
                   const std::map<std::string, std::string>& inputs, const PipelineResult& res) {
  json j;
  j["config"] = json::parse(config_to_json(cfg));
  json files = json::object();
  for (const auto& [name, p] : inputs) files[name] = {{"path", p}, {"sha256", sha256_file(p)}};
  j["inputs"] = files;
  j["records"] = res.records.size();
  j["quarantined_frames"] = res.quarantined;
  j["anchors"] = res.anchors.size();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write manifest '" + path + "'");
  out << j.dump(2) << "\n";
}

namespace {

double field(const IrregularityRecord& r, int c) {
  switch (c) {
    case 0: return r.al;
    case 1: return r.vp;
    case 2: return r.gv;
    case 3: return r.cl;
    default: return r.tw;
  }
}

}  // namespace

std::vector<ChannelError> compare_records(const RecordSet& est, const RecordSet& truth,
                                          const CompareOptions& opt, const std::string& overlay_dir) {
  if (truth.records.size() < 2) throw InputError("truth series needs at least two records");
  std::vector<double> ts, es;
  std::vector<int> tq;
  for (std::size_t i = 0; i < truth.records.size(); ++i) {
    if (!ts.empty() && !(truth.records[i].s > ts.back())) continue;
    ts.push_back(truth.records[i].s);
    tq.push_back(i < truth.quality.size() ? truth.quality[i] : 0);
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < est.records.size(); ++i) {
    const double s = est.records[i].s;
    if (s >= ts.front() && s <= ts.back()) keep.push_back(i);
  }
  if (keep.empty()) throw InputError("estimate and truth do not overlap in s");
  for (auto i : keep) es.push_back(est.records[i].s);

  const char* names[5] = {"al", "vp", "gv", "cl", "tw"};
  std::vector<ChannelError> out;
  for (int c = 0; c < 5; ++c) {
    std::vector<double> tv, ev;
    std::vector<double> tvals;
    double last = -1e300;
    for (const auto& r : truth.records) {
      if (!(r.s > last)) continue;
      last = r.s;
      tvals.push_back(field(r, c));
    }
    for (auto i : keep) {
      ev.push_back(field(est.records[i], c));
      tv.push_back(interpolate_linear(ts, tvals, est.records[i].s));
    }
    bool filtered = false;
    if (opt.highpass_absolute && c < 2 && es.back() - es.front() > opt.cutoff) {
      tv = highpass_on_grid(es, tv, opt.cutoff, opt.spacing);
      ev = highpass_on_grid(es, ev, opt.cutoff, opt.spacing);
      filtered = true;
    }
    ChannelError ce;
    ce.name = names[c];
    double sum = 0.0;
    for (std::size_t k = 0; k < ev.size(); ++k) {
      if (c == 4 && opt.skip_flagged_twist) {
        const int q = est.quality[keep[k]];
        if (q & kTwistUnavailable) continue;
        auto it = std::lower_bound(ts.begin(), ts.end(), es[k]);
        const std::size_t ti = std::min<std::size_t>(static_cast<std::size_t>(it - ts.begin()), ts.size() - 1);
        if (tq[ti] & kTwistUnavailable) continue;
      }
      const double e = ev[k] - tv[k];
      sum += e * e;
      ce.max = std::max(ce.max, std::abs(e));
      ++ce.count;
    }
    ce.rms = ce.count ? std::sqrt(sum / static_cast<double>(ce.count)) : 0.0;
    out.push_back(ce);
    if (!overlay_dir.empty()) {
      fs::create_directories(overlay_dir);
      CsvWriter w((fs::path(overlay_dir) / (std::string("overlay_") + names[c] + ".csv")).string(),
                  {"s", "truth", "estimate", "error", "filtered"});
      for (std::size_t k = 0; k < ev.size(); ++k) {
        w.cell(es[k]).cell(tv[k]).cell(ev[k]).cell(ev[k] - tv[k]).cell(static_cast<long long>(filtered));
        w.end_row();
      }
    }
  }
  return out;
}

}  // namespace railgauge
