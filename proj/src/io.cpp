#include "eulerflow/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace eulerflow::io {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> nonempty_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      lines.push_back(line);
    }
  }
  return lines;
}

long long parse_int(const std::string& text) {
  const auto t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw Error("cannot parse integer '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "1") {
    return true;
  }
  if (t == "false" || t == "0") {
    return false;
  }
  throw Error("cannot parse boolean '" + text + "'");
}

std::string frame_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.csv", i);
  return buf;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc{}) {
    throw Error("format_real: conversion failed");
  }
  return std::string(buf, ptr);
}

double parse_real(const std::string& text) {
  const auto t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw Error("cannot parse number '" + text + "'");
  }
  return v;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw Error("write failed for " + path.string());
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") {
    prior.seed = static_cast<std::uint64_t>(parse_int(value));
    train.seed = prior.seed;
  } else if (key == "depth") {
    prior.depth = static_cast<int>(parse_int(value));
  } else if (key == "width") {
    prior.width = static_cast<int>(parse_int(value));
  } else if (key == "window") {
    loss.window = static_cast<int>(parse_int(value));
  } else if (key == "alpha") {
    loss.cycle_weight = parse_real(value);
  } else if (key == "truncation") {
    loss.truncation_radius = parse_real(value);
  } else if (key == "no_multi_k") {
    loss.no_multi_k = parse_bool(value);
  } else if (key == "no_cycle") {
    loss.no_cycle = parse_bool(value);
  } else if (key == "max_points") {
    const auto t = trim(value);
    if (t == "none" || t == "0") {
      loss.max_points_per_frame.reset();
    } else {
      loss.max_points_per_frame = static_cast<Eigen::Index>(parse_int(t));
    }
  } else if (key == "lr") {
    train.learning_rate = parse_real(value);
  } else if (key == "epochs") {
    train.max_epochs = static_cast<int>(parse_int(value));
  } else if (key == "patience") {
    train.patience = static_cast<int>(parse_int(value));
  } else if (key == "min_delta") {
    train.min_delta = parse_real(value);
  } else if (key == "adam_beta1") {
    train.adam_beta1 = parse_real(value);
  } else if (key == "adam_beta2") {
    train.adam_beta2 = parse_real(value);
  } else if (key == "adam_eps") {
    train.adam_eps = parse_real(value);
  } else if (key == "dynamic_threshold") {
    eval.dynamic_speed_threshold = parse_real(value);
  } else {
    throw Error("run config: unknown key '" + key + "'");
  }
}

void RunConfig::validate() const {
  prior.validate();
  loss.validate();
  train.validate();
  if (!(eval.dynamic_speed_threshold > 0.0)) {
    throw Error("run config: dynamic_threshold must be > 0");
  }
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error("run config line " + std::to_string(lineno) + ": expected key=value");
    }
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text(path));
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "seed=" << c.prior.seed << '\n'
      << "depth=" << c.prior.depth << '\n'
      << "width=" << c.prior.width << '\n'
      << "window=" << c.loss.window << '\n'
      << "alpha=" << format_real(c.loss.cycle_weight) << '\n'
      << "truncation=" << format_real(c.loss.truncation_radius) << '\n'
      << "no_multi_k=" << (c.loss.no_multi_k ? "true" : "false") << '\n'
      << "no_cycle=" << (c.loss.no_cycle ? "true" : "false") << '\n'
      << "max_points="
      << (c.loss.max_points_per_frame ? std::to_string(*c.loss.max_points_per_frame) : "none")
      << '\n'
      << "lr=" << format_real(c.train.learning_rate) << '\n'
      << "epochs=" << c.train.max_epochs << '\n'
      << "patience=" << c.train.patience << '\n'
      << "min_delta=" << format_real(c.train.min_delta) << '\n'
      << "adam_beta1=" << format_real(c.train.adam_beta1) << '\n'
      << "adam_beta2=" << format_real(c.train.adam_beta2) << '\n'
      << "adam_eps=" << format_real(c.train.adam_eps) << '\n'
      << "dynamic_threshold=" << format_real(c.eval.dynamic_speed_threshold) << '\n';
  return out.str();
}

std::string format_frame(const PointCloud& cloud) {
  cloud.validate();
  const bool flow = cloud.gt_flow.has_value();
  const bool classes = cloud.class_id.has_value();
  std::string out = "x,y,z";
  if (flow) {
    out += ",fx,fy,fz";
  }
  if (classes) {
    out += ",class_id,dynamic";
  }
  out += '\n';
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    out += format_real(cloud.points(0, i)) + ',' + format_real(cloud.points(1, i)) + ',' +
           format_real(cloud.points(2, i));
    if (flow) {
      const auto& f = *cloud.gt_flow;
      out += ',' + format_real(f(0, i)) + ',' + format_real(f(1, i)) + ',' + format_real(f(2, i));
    }
    if (classes) {
      const bool dyn = cloud.is_dynamic ? (*cloud.is_dynamic)[si] : false;
      out += ',' + std::to_string((*cloud.class_id)[si]) + ',' + (dyn ? "1" : "0");
    }
    out += '\n';
  }
  return out;
}

PointCloud parse_frame(const std::string& text, int frame_index, double timestamp) {
  const auto lines = nonempty_lines(text);
  if (lines.empty()) {
    throw Error("frame " + std::to_string(frame_index) + ": missing header");
  }
  const auto header = split(trim(lines.front()), ',');
  bool flow = false;
  bool classes = false;
  if (header == std::vector<std::string>{"x", "y", "z"}) {
  } else if (header == std::vector<std::string>{"x", "y", "z", "fx", "fy", "fz"}) {
    flow = true;
  } else if (header == std::vector<std::string>{"x", "y", "z", "class_id", "dynamic"}) {
    classes = true;
  } else if (header == std::vector<std::string>{"x", "y", "z", "fx", "fy", "fz", "class_id",
                                                "dynamic"}) {
    flow = true;
    classes = true;
  } else {
    throw Error("frame " + std::to_string(frame_index) + ": unrecognized header '" +
                lines.front() + "'");
  }
  const std::size_t cols = 3 + (flow ? 3 : 0) + (classes ? 2 : 0);
  const auto n = static_cast<Eigen::Index>(lines.size() - 1);

  PointCloud cloud;
  cloud.frame_index = frame_index;
  cloud.timestamp = timestamp;
  cloud.points.resize(3, n);
  if (flow) {
    cloud.gt_flow = Points3(3, n);
  }
  if (classes) {
    cloud.class_id = std::vector<int>(static_cast<std::size_t>(n));
    cloud.is_dynamic = std::vector<bool>(static_cast<std::size_t>(n));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = split(trim(lines[static_cast<std::size_t>(i + 1)]), ',');
    if (row.size() != cols) {
      throw Error("frame " + std::to_string(frame_index) + ": row " + std::to_string(i + 1) +
                  " has " + std::to_string(row.size()) + " columns, expected " +
                  std::to_string(cols));
    }
    for (int d = 0; d < 3; ++d) {
      cloud.points(d, i) = parse_real(row[static_cast<std::size_t>(d)]);
    }
    std::size_t c = 3;
    if (flow) {
      for (int d = 0; d < 3; ++d) {
        (*cloud.gt_flow)(d, i) = parse_real(row[c++]);
      }
    }
    if (classes) {
      (*cloud.class_id)[static_cast<std::size_t>(i)] = static_cast<int>(parse_int(row[c++]));
      (*cloud.is_dynamic)[static_cast<std::size_t>(i)] = parse_bool(row[c++]);
    }
  }
  cloud.validate();
  return cloud;
}

void write_sequence(const std::filesystem::path& dir, const FrameSequence& seq,
                    const std::string& name) {
  seq.validate();
  std::filesystem::create_directories(dir);
  SequenceManifest m;
  m.name = name;
  m.frame_count = static_cast<int>(seq.frames.size());
  m.frame_interval_s = seq.frame_interval;
  m.has_gt = true;
  m.has_classes = true;
  for (const auto& f : seq.frames) {
    m.has_gt = m.has_gt && f.gt_flow.has_value();
    m.has_classes = m.has_classes && f.class_id.has_value();
  }
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    PointCloud frame = seq.frames[i];
    if (!m.has_gt) {
      frame.gt_flow.reset();
    }
    if (!m.has_classes) {
      frame.class_id.reset();
      frame.is_dynamic.reset();
    }
    m.frame_files.push_back(frame_file_name(i));
    write_text(dir / m.frame_files.back(), format_frame(frame));
  }

  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["frame_count"] = m.frame_count;
  j["frame_interval_s"] = m.frame_interval_s;
  j["frame_files"] = m.frame_files;
  j["has_gt"] = m.has_gt;
  j["has_classes"] = m.has_classes;
  write_text(dir / kManifestName, j.dump(2) + "\n");
}

SequenceManifest load_manifest(const std::filesystem::path& dir) {
  SequenceManifest m;
  try {
    const auto j = nlohmann::json::parse(read_text(dir / kManifestName));
    m.name = j.at("name").get<std::string>();
    m.frame_count = j.at("frame_count").get<int>();
    m.frame_interval_s = j.at("frame_interval_s").get<double>();
    m.frame_files = j.at("frame_files").get<std::vector<std::string>>();
    m.has_gt = j.at("has_gt").get<bool>();
    m.has_classes = j.at("has_classes").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("manifest in " + dir.string() + ": " + e.what());
  }
  if (static_cast<int>(m.frame_files.size()) != m.frame_count) {
    throw Error("manifest: frame_files length does not match frame_count");
  }
  for (const auto& f : m.frame_files) {
    if (!std::filesystem::exists(dir / f)) {
      throw Error("manifest: missing frame file " + (dir / f).string());
    }
  }
  return m;
}

FrameSequence load_sequence(const std::filesystem::path& dir) {
  const auto m = load_manifest(dir);
  FrameSequence seq;
  seq.frame_interval = m.frame_interval_s;
  for (std::size_t i = 0; i < m.frame_files.size(); ++i) {
    auto frame = parse_frame(read_text(dir / m.frame_files[i]), static_cast<int>(i),
                             static_cast<double>(i) * m.frame_interval_s);
    if (m.has_gt != frame.gt_flow.has_value() || m.has_classes != frame.class_id.has_value()) {
      throw Error("frame file " + m.frame_files[i] + " columns disagree with the manifest");
    }
    seq.frames.push_back(std::move(frame));
  }
  seq.validate();
  return seq;
}

std::string format_flow(const FlowVectors& flow) {
  std::string out = "point_id,fx,fy,fz\n";
  for (Eigen::Index i = 0; i < flow.residuals.cols(); ++i) {
    out += std::to_string(i) + ',' + format_real(flow.residuals(0, i)) + ',' +
           format_real(flow.residuals(1, i)) + ',' + format_real(flow.residuals(2, i)) + '\n';
  }
  return out;
}

FlowVectors parse_flow(const std::string& text, int source_frame, int target_frame) {
  const auto lines = nonempty_lines(text);
  if (lines.empty() || trim(lines.front()) != "point_id,fx,fy,fz") {
    throw Error("flow file: expected header point_id,fx,fy,fz");
  }
  FlowVectors flow;
  flow.source_frame = source_frame;
  flow.target_frame = target_frame;
  flow.residuals.resize(3, static_cast<Eigen::Index>(lines.size() - 1));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto row = split(trim(lines[r]), ',');
    if (row.size() != 4 || parse_int(row[0]) != static_cast<long long>(r - 1)) {
      throw Error("flow file: malformed row " + std::to_string(r));
    }
    for (int d = 0; d < 3; ++d) {
      flow.residuals(d, static_cast<Eigen::Index>(r - 1)) =
          parse_real(row[static_cast<std::size_t>(d + 1)]);
    }
  }
  return flow;
}

std::string format_tracks(const std::vector<Trajectory>& tracks) {
  std::string out = "frame,point_id,x,y,z\n";
  if (tracks.empty()) {
    return out;
  }
  const auto steps = tracks.front().frames.size();
  for (std::size_t j = 0; j < steps; ++j) {
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const auto& t = tracks[i];
      const auto col = static_cast<Eigen::Index>(j);
      out += std::to_string(t.frames[j]) + ',' + std::to_string(i) + ',' +
             format_real(t.positions(0, col)) + ',' + format_real(t.positions(1, col)) + ',' +
             format_real(t.positions(2, col)) + '\n';
    }
  }
  return out;
}

Points3 parse_points(const std::string& text) {
  const auto lines = nonempty_lines(text);
  if (lines.empty()) {
    throw Error("points file: empty");
  }
  const auto header = split(trim(lines.front()), ',');
  if (header.size() < 3 || header[0] != "x" || header[1] != "y" || header[2] != "z") {
    throw Error("points file: header must start with x,y,z");
  }
  Points3 pts(3, static_cast<Eigen::Index>(lines.size() - 1));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto row = split(trim(lines[r]), ',');
    if (row.size() < 3) {
      throw Error("points file: row " + std::to_string(r) + " has fewer than 3 columns");
    }
    for (int d = 0; d < 3; ++d) {
      pts(d, static_cast<Eigen::Index>(r - 1)) = parse_real(row[static_cast<std::size_t>(d)]);
    }
  }
  if (!pts.allFinite()) {
    throw Error("points file: non-finite coordinate");
  }
  return pts;
}

std::string format_history(const TrainHistory& history) {
  std::set<int> ks;
  bool cycle = false;
  for (const auto& e : history.epochs) {
    for (const auto& [k, v] : e.objective.chamfer_terms) {
      ks.insert(k);
    }
    cycle = cycle || e.objective.cycle_term.has_value();
  }
  std::string out = "epoch,total";
  for (int k : ks) {
    out += ",chamfer_k" + std::to_string(k);
  }
  if (cycle) {
    out += ",cycle";
  }
  out += '\n';
  for (const auto& e : history.epochs) {
    out += std::to_string(e.epoch) + ',' + format_real(e.objective.total);
    for (int k : ks) {
      const auto it = e.objective.chamfer_terms.find(k);
      out += ',' + format_real(it == e.objective.chamfer_terms.end() ? 0.0 : it->second);
    }
    if (cycle) {
      out += ',' + format_real(e.objective.cycle_term.value_or(0.0));
    }
    out += '\n';
  }
  return out;
}

}  // namespace eulerflow::io
