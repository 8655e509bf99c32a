#pragma once

#include "railgauge/pipeline.hpp"

#include <map>
#include <string>
#include <vector>

namespace railgauge {

/// File names of a run directory, with defaults matching `simulate` output.
struct RunFiles {
  std::string imu = "imu.csv";
  std::string encoder = "encoder.csv";
  std::string frames = "frames.csv";
  std::string pixels = "pixels.csv";
  std::string camera_left = "camera_left.json";
  std::string camera_right = "camera_right.json";
  std::string layout = "layout.txt";
  std::string profile = "template.json";
  std::string truth = "truth.csv";
};

struct RunInfo {
  std::string dir;
  RunFiles files;
  double s_start = 0.0;
  std::string path(const std::string& name) const;
};

/// Reads run.json when present; missing entries keep their defaults.
RunInfo load_run_info(const std::string& dir);
void save_run_info(const RunInfo& info, const std::string& extra_json = "{}");

std::vector<ImuSample> load_imu(const std::string& path);
void save_imu(const std::vector<ImuSample>& imu, const std::string& path);

void load_encoder(const std::string& path, std::vector<double>& t, std::vector<double>& s);

/// frames.csv (frame_id,t) joined with pixels.csv (frame_id,side,px,py).
std::vector<FrameInput> load_frames(const std::string& frames_path, const std::string& pixels_path);

RunInputs load_run(const RunInfo& info);

struct RecordSet {
  std::vector<IrregularityRecord> records;
  std::vector<int> quality;
};

RecordSet load_records(const std::string& path);
void save_records(const std::vector<IrregularityRecord>& records, const std::vector<int>& quality,
                  const std::string& path);

void save_pipeline_outputs(const PipelineResult& res, const std::string& dir);
void save_anchors(const std::vector<Anchor>& anchors, const std::string& path);
void save_ne2(const std::vector<Ne2Sample>& trace, const std::string& path);

/// Lower-case hex SHA-256 of the file contents.
std::string sha256_file(const std::string& path);

/// Manifest with the effective configuration and hashes of `inputs`.
void save_manifest(const std::string& path, const PipelineConfig& cfg,
                   const std::map<std::string, std::string>& inputs, const PipelineResult& res);

struct ChannelError {
  std::string name;
  double rms = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

struct CompareOptions {
  bool highpass_absolute = true;  // apply the same high-pass to al and vp of both series
  double cutoff = 70.0;
  double spacing = 0.25;
  bool skip_flagged_twist = true;
};

/// Truth is interpolated at the estimate's s values. Returns al, vp, gv, cl, tw.
std::vector<ChannelError> compare_records(const RecordSet& estimate, const RecordSet& truth,
                                          const CompareOptions& opt = {},
                                          const std::string& overlay_dir = "");

}  // namespace railgauge
