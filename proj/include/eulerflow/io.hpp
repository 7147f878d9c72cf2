#ifndef EULERFLOW_IO_HPP
#define EULERFLOW_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "eulerflow/eval.hpp"
#include "eulerflow/geom.hpp"
#include "eulerflow/loss.hpp"
#include "eulerflow/ode.hpp"
#include "eulerflow/prior.hpp"
#include "eulerflow/train.hpp"

namespace eulerflow::io {

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kRunConfigName = "run_config.txt";

struct SequenceManifest {
  std::string name;
  int frame_count = 0;
  double frame_interval_s = 0.1;
  std::vector<std::string> frame_files;
  bool has_gt = false;
  bool has_classes = false;
};

/// Prior, loss, training and evaluation settings as one flat key=value
/// document. `seed` drives both initialization and training.
struct RunConfig {
  PriorConfig prior;
  LossConfig loss;
  TrainConfig train;
  EvalConfig eval;

  /// Applies one key; throws on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& cfg);

/// Shortest text that parses back to the same double (17 significant digits).
std::string format_real(double v);
double parse_real(const std::string& text);

/// Frame CSV: header `x,y,z[,fx,fy,fz][,class_id,dynamic]`, one row per point.
std::string format_frame(const PointCloud& cloud);
PointCloud parse_frame(const std::string& text, int frame_index, double timestamp);

void write_sequence(const std::filesystem::path& dir, const FrameSequence& seq,
                    const std::string& name);
SequenceManifest load_manifest(const std::filesystem::path& dir);
FrameSequence load_sequence(const std::filesystem::path& dir);

/// `point_id,fx,fy,fz`.
std::string format_flow(const FlowVectors& flow);
FlowVectors parse_flow(const std::string& text, int source_frame, int target_frame);

/// `frame,point_id,x,y,z`, points in order, frames in traversal order.
std::string format_tracks(const std::vector<Trajectory>& tracks);

/// Reads `x,y,z` rows (any further columns are ignored).
Points3 parse_points(const std::string& text);

/// `epoch,total,chamfer_k<k>...,cycle` header then one row per epoch.
std::string format_history(const TrainHistory& history);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace eulerflow::io

#endif  // EULERFLOW_IO_HPP
