// eulerflow: generate synthetic sequences, fit the prior, extract flow and
// tracks, and score fits against ground truth.
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "eulerflow/eval.hpp"
#include "eulerflow/io.hpp"
#include "eulerflow/ode.hpp"
#include "eulerflow/scenegen.hpp"
#include "eulerflow/train.hpp"

namespace fs = std::filesystem;
using namespace eulerflow;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDiverged = 3;

// Flags every subcommand accepts. Values stay as text and are applied through
// RunConfig::set so the config file and the flags share one parser.
struct SharedFlags {
  std::optional<std::string> config;
  std::vector<std::pair<std::string, std::optional<std::string>>> values{
      {"seed", {}},   {"depth", {}}, {"width", {}},  {"window", {}},   {"alpha", {}},
      {"truncation", {}}, {"lr", {}}, {"epochs", {}}, {"patience", {}}, {"max_points", {}}};
  bool no_multi_k = false;
  bool no_cycle = false;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "key=value run config file; flags override it");
    for (auto& [key, value] : values) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      app.add_option(flag, value, "run config key '" + key + "'");
    }
    app.add_flag("--no-multi-k", no_multi_k, "restrict the objective to k = +-1");
    app.add_flag("--no-cycle", no_cycle, "drop the cycle-consistency term");
  }

  io::RunConfig resolve() const {
    io::RunConfig cfg = config ? io::load_run_config(*config) : io::RunConfig{};
    for (const auto& [key, value] : values) {
      if (value) {
        cfg.set(key, *value);
      }
    }
    if (no_multi_k) {
      cfg.loss.no_multi_k = true;
    }
    if (no_cycle) {
      cfg.loss.no_cycle = true;
    }
    cfg.validate();
    return cfg;
  }
};

void write_run_config(const fs::path& output, const io::RunConfig& cfg) {
  const fs::path dir = fs::is_directory(output) ? output : output.parent_path();
  io::write_text((dir.empty() ? fs::path(".") : dir) / io::kRunConfigName,
                 io::format_run_config(cfg));
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) {
    fs::create_directories(file.parent_path());
  }
}

struct GenerateArgs {
  fs::path out_dir;
  std::string kind = "translate";
  std::string name;
  SceneSpec spec;
  int hidden_first = 8;
  int hidden_last = 11;
};

int run_generate(const GenerateArgs& a, const io::RunConfig& cfg) {
  SceneSpec spec = a.spec;
  spec.kind = parse_scene_kind(a.kind);
  spec.seed = cfg.prior.seed;
  spec.occlusion_window = {a.hidden_first, a.hidden_last};
  const auto seq = generate(spec);
  io::write_sequence(a.out_dir, seq, a.name.empty() ? a.kind : a.name);
  write_run_config(a.out_dir, cfg);
  std::cout << "wrote " << seq.frames.size() << " frames to " << a.out_dir.string() << '\n';
  return 0;
}

struct FitArgs {
  fs::path seq_dir;
  fs::path checkpoint;
  std::optional<fs::path> history;
  std::optional<fs::path> init;
  int log_every = 10;
};

int run_fit(const FitArgs& a, const io::RunConfig& cfg) {
  const auto seq = io::load_sequence(a.seq_dir);
  ensure_parent(a.checkpoint);
  const fs::path history_path =
      a.history.value_or(fs::path(a.checkpoint.string() + ".history.csv"));
  write_run_config(a.checkpoint, cfg);

  PriorParams initial = a.init ? load_checkpoint(*a.init) : init_params(cfg.prior);
  if (initial.depth() != cfg.prior.depth || initial.width() != cfg.prior.width) {
    throw Error("fit: --init checkpoint shape (depth " + std::to_string(initial.depth()) +
                ", width " + std::to_string(initial.width()) + ") differs from the config");
  }

  TrainHistory seen;
  const auto progress = [&](const EpochRecord& e, const PriorParams&) {
    seen.epochs.push_back(e);
    if (a.log_every > 0 && e.epoch % a.log_every == 0) {
      std::cout << "epoch " << e.epoch << " total " << io::format_real(e.objective.total)
                << " (" << e.seconds << " s)" << std::endl;
    }
  };

  try {
    const auto r = fit(seq, std::move(initial), cfg.loss, cfg.train, progress);
    save_checkpoint(r.params, a.checkpoint);
    io::write_text(history_path, io::format_history(r.history));
    std::cout << "best epoch " << r.history.best_epoch << " total "
              << io::format_real(r.history.best_total) << " after " << r.history.epochs.size()
              << " epochs" << (r.history.early_stopped ? " (early stop)" : "") << '\n';
    return 0;
  } catch (const DivergenceError& e) {
    save_checkpoint(e.best_params(), a.checkpoint);
    io::write_text(history_path, io::format_history(seen));
    std::cerr << "error: " << e.what() << "; best parameters up to epoch "
              << e.last_good_epoch() << " saved to " << a.checkpoint.string() << '\n';
    return kExitDiverged;
  }
}

struct FlowArgs {
  fs::path checkpoint;
  fs::path seq_dir;
  fs::path out;
  int frame = 0;
  int k = 1;
};

int run_flow(const FlowArgs& a, const io::RunConfig& cfg) {
  const auto params = load_checkpoint(a.checkpoint);
  const auto seq = io::load_sequence(a.seq_dir);
  const auto flow = extract_flow(params, seq, a.frame, a.k);
  ensure_parent(a.out);
  io::write_text(a.out, io::format_flow(flow));
  write_run_config(a.out, cfg);
  return 0;
}

struct TrackArgs {
  fs::path checkpoint;
  fs::path seq_dir;
  fs::path points;
  fs::path out;
  int start = 0;
  int end = 0;
};

int run_track(const TrackArgs& a, const io::RunConfig& cfg) {
  const auto params = load_checkpoint(a.checkpoint);
  const auto seq = io::load_sequence(a.seq_dir);
  const auto start = io::parse_points(io::read_text(a.points));
  const auto tracks = extract_trajectory(params, seq, a.start, start, a.end);
  ensure_parent(a.out);
  io::write_text(a.out, io::format_tracks(tracks));
  write_run_config(a.out, cfg);
  return 0;
}

struct EvalArgs {
  fs::path checkpoint;
  fs::path seq_dir;
  fs::path out;
  std::optional<std::string> threshold;
};

int run_eval(const EvalArgs& a, io::RunConfig cfg) {
  if (a.threshold) {
    cfg.set("dynamic_threshold", *a.threshold);
    cfg.validate();
  }
  const auto params = load_checkpoint(a.checkpoint);
  const auto seq = io::load_sequence(a.seq_dir);
  const auto report = evaluate_sequence(params, seq, cfg.eval);
  ensure_parent(a.out);
  io::write_text(a.out, format_report(report));
  write_run_config(a.out, cfg);
  std::cout << "mean_dynamic_normalized="
            << (report.mean_dynamic_normalized ? io::format_real(*report.mean_dynamic_normalized)
                                               : std::string("absent"))
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EulerFlow scene flow: fit a neural velocity field to a point-cloud sequence"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate_cmd = app.add_subcommand("generate", "write a synthetic sequence");
  generate_cmd->add_option("out_dir", gen.out_dir, "output directory")->required();
  generate_cmd->add_option("--kind", gen.kind, "static | translate | orbit | crossing | occlusion")
      ->capture_default_str();
  generate_cmd->add_option("--frames", gen.spec.num_frames)->capture_default_str();
  generate_cmd->add_option("--points-per-object", gen.spec.points_per_object)
      ->capture_default_str();
  generate_cmd->add_option("--background-points", gen.spec.background_points)
      ->capture_default_str();
  generate_cmd->add_option("--speed", gen.spec.speed, "meters per frame")->capture_default_str();
  generate_cmd->add_option("--orbit-radius", gen.spec.orbit_radius)->capture_default_str();
  generate_cmd->add_option("--hidden-first", gen.hidden_first, "first occluded frame")
      ->capture_default_str();
  generate_cmd->add_option("--hidden-last", gen.hidden_last, "last occluded frame")
      ->capture_default_str();
  generate_cmd->add_option("--noise", gen.spec.noise_sigma, "sensor noise sigma, meters")
      ->capture_default_str();
  generate_cmd->add_option("--interval", gen.spec.frame_interval, "seconds between frames")
      ->capture_default_str();
  generate_cmd->add_option("--name", gen.name, "sequence name in the manifest");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "fit the prior to a sequence");
  fit_cmd->add_option("seq_dir", fit_args.seq_dir)->required()->check(CLI::ExistingDirectory);
  fit_cmd->add_option("checkpoint", fit_args.checkpoint, "output checkpoint")->required();
  fit_cmd->add_option("--history", fit_args.history,
                      "history CSV (default <checkpoint>.history.csv)");
  fit_cmd->add_option("--init", fit_args.init, "start from this checkpoint")
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("--log-every", fit_args.log_every, "print every n epochs, 0 = quiet")
      ->capture_default_str();

  FlowArgs flow_args;
  auto* flow_cmd = app.add_subcommand("flow", "write the k-frame flow of one frame");
  flow_cmd->add_option("checkpoint", flow_args.checkpoint)->required()->check(CLI::ExistingFile);
  flow_cmd->add_option("seq_dir", flow_args.seq_dir)->required()->check(CLI::ExistingDirectory);
  flow_cmd->add_option("out", flow_args.out, "flow CSV")->required();
  flow_cmd->add_option("--frame", flow_args.frame, "source frame")->required();
  flow_cmd->add_option("-k,--k", flow_args.k, "frame offset, may be negative")
      ->capture_default_str();

  TrackArgs track_args;
  auto* track_cmd = app.add_subcommand("track", "Euler-integrate points from one frame to another");
  track_cmd->add_option("checkpoint", track_args.checkpoint)->required()->check(CLI::ExistingFile);
  track_cmd->add_option("seq_dir", track_args.seq_dir)->required()->check(CLI::ExistingDirectory);
  track_cmd->add_option("points", track_args.points, "x,y,z CSV of start positions")
      ->required()
      ->check(CLI::ExistingFile);
  track_cmd->add_option("out", track_args.out, "track CSV")->required();
  track_cmd->add_option("--start", track_args.start)->required();
  track_cmd->add_option("--end", track_args.end)->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score adjacent-frame flow against ground truth");
  eval_cmd->add_option("checkpoint", eval_args.checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("seq_dir", eval_args.seq_dir)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("out", eval_args.out, "report file")->required();
  eval_cmd->add_option("--dynamic-threshold", eval_args.threshold,
                       "meters per frame separating static from dynamic");

  std::vector<SharedFlags> shared(5);
  const std::vector<CLI::App*> commands{generate_cmd, fit_cmd, flow_cmd, track_cmd, eval_cmd};
  for (std::size_t i = 0; i < commands.size(); ++i) {
    shared[i].attach(*commands[i]);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!commands[i]->parsed()) {
        continue;
      }
      const auto cfg = shared[i].resolve();
      switch (i) {
        case 0: return run_generate(gen, cfg);
        case 1: return run_fit(fit_args, cfg);
        case 2: return run_flow(flow_args, cfg);
        case 3: return run_track(track_args, cfg);
        default: return run_eval(eval_args, cfg);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
