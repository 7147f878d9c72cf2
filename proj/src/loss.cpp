#include "eulerflow/loss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace eulerflow {

namespace {

constexpr std::uint64_t kTotalObjectiveSeed = 0x5eedf10bULL;

void finish(LossBreakdown& b) {
  double total = 0.0;
  for (const auto& [k, v] : b.chamfer_terms) {
    total += v;
  }
  if (b.cycle_term) {
    total += *b.cycle_term;
  }
  b.total = total;
}

Points3 subsample(const Points3& pts, Eigen::Index cap, std::mt19937_64& rng) {
  if (pts.cols() <= cap) {
    return pts;
  }
  std::vector<Eigen::Index> ids(static_cast<std::size_t>(pts.cols()));
  std::iota(ids.begin(), ids.end(), Eigen::Index{0});
  // Partial Fisher-Yates; the chosen subset is kept in original order.
  for (Eigen::Index i = 0; i < cap; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, pts.cols() - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  std::sort(ids.begin(), ids.begin() + cap);
  Points3 out(3, cap);
  for (Eigen::Index i = 0; i < cap; ++i) {
    out.col(i) = pts.col(ids[static_cast<std::size_t>(i)]);
  }
  return out;
}

struct Target {
  const Points3* points;
  const NearestIndex* shared;
  std::optional<NearestIndex> owned;

  const NearestIndex& index() const { return owned ? *owned : *shared; }
};

// Evaluates the objective anchored at t_idx. With grads == nullptr only the
// value is produced; otherwise parameter gradients are accumulated into grads.
LossBreakdown evaluate_frame(const PriorParams& params, const FrameSequence& seq, int t_idx,
                             const LossConfig& cfg, const SequenceIndex& index,
                             std::mt19937_64* rng, Eigen::VectorXd* grads) {
  cfg.validate();
  const int last = seq.last_frame();
  if (t_idx < 0 || t_idx > last) {
    throw Error("frame_objective: anchor frame " + std::to_string(t_idx) + " out of range");
  }
  if (index.size() != seq.frames.size()) {
    throw Error("frame_objective: index does not match sequence");
  }
  if (cfg.max_points_per_frame && rng == nullptr) {
    throw Error("frame_objective: subsampling requires a random generator");
  }

  auto frame_points = [&](int f) -> const Points3& {
    return seq.frames[static_cast<std::size_t>(f)].points;
  };

  std::vector<Points3> subsampled_targets;
  subsampled_targets.reserve(static_cast<std::size_t>(2 * cfg.effective_window()));
  auto target_for = [&](int f) {
    if (!cfg.max_points_per_frame) {
      return Target{&frame_points(f), &index.frame(f), std::nullopt};
    }
    subsampled_targets.push_back(subsample(frame_points(f), *cfg.max_points_per_frame, *rng));
    return Target{&subsampled_targets.back(), nullptr, NearestIndex(subsampled_targets.back())};
  };

  const Points3 source = cfg.max_points_per_frame
                             ? subsample(frame_points(t_idx), *cfg.max_points_per_frame, *rng)
                             : frame_points(t_idx);
  if (source.cols() == 0) {
    throw Error("frame_objective: anchor frame " + std::to_string(t_idx) + " is empty");
  }

  const int window = cfg.effective_window();
  const int fwd_steps = std::min(window, last - t_idx);
  const int bwd_steps = std::min(window, t_idx);

  LossBreakdown out;
  const double radius = cfg.truncation_radius;

  // Forward rollout: positions[j] is Euler(P_t, j).
  RolloutTape fwd;
  std::vector<Points3> fwd_grads(static_cast<std::size_t>(fwd_steps) + 1);
  if (fwd_steps > 0) {
    euler_rollout_with_grad(params, seq, t_idx, source, fwd_steps, fwd);
    for (int j = 1; j <= fwd_steps; ++j) {
      const auto target = target_for(t_idx + j);
      auto c = truncated_chamfer(fwd.positions[static_cast<std::size_t>(j)], target.index(),
                                 *target.points, radius);
      out.chamfer_terms[j] = c.value;
      fwd_grads[static_cast<std::size_t>(j)] = std::move(c.pred_grads);
    }

    if (!cfg.no_cycle) {
      const Points3& stepped = fwd.positions[1];
      RolloutTape back;
      const EulerStep step{normalized_time(seq, t_idx + 1), -1};
      const Points3 returned = rollout_with_grad(params, stepped, std::span(&step, 1), back);
      const Points3 diff = returned - source;
      const auto n = static_cast<double>(source.cols());
      double sum = 0.0;
      Points3 g = Points3::Zero(3, diff.cols());
      for (Eigen::Index i = 0; i < diff.cols(); ++i) {
        const double norm = diff.col(i).norm();
        sum += norm;
        if (norm > 0.0) {
          g.col(i) = (cfg.cycle_weight / (norm * n)) * diff.col(i);
        }
      }
      out.cycle_term = cfg.cycle_weight * (sum / n);
      if (grads != nullptr) {
        std::vector<const Points3*> slots{nullptr, &g};
        fwd_grads[1] += rollout_backward_accumulate(params, back, slots, *grads);
      }
    }

    if (grads != nullptr) {
      std::vector<const Points3*> slots(fwd_grads.size(), nullptr);
      for (std::size_t j = 1; j < fwd_grads.size(); ++j) {
        slots[j] = &fwd_grads[j];
      }
      rollout_backward_accumulate(params, fwd, slots, *grads);
    }
  }

  if (bwd_steps > 0) {
    RolloutTape bwd;
    euler_rollout_with_grad(params, seq, t_idx, source, -bwd_steps, bwd);
    std::vector<Points3> bwd_grads(static_cast<std::size_t>(bwd_steps) + 1);
    for (int j = 1; j <= bwd_steps; ++j) {
      const auto target = target_for(t_idx - j);
      auto c = truncated_chamfer(bwd.positions[static_cast<std::size_t>(j)], target.index(),
                                 *target.points, radius);
      out.chamfer_terms[-j] = c.value;
      bwd_grads[static_cast<std::size_t>(j)] = std::move(c.pred_grads);
    }
    if (grads != nullptr) {
      std::vector<const Points3*> slots(bwd_grads.size(), nullptr);
      for (std::size_t j = 1; j < bwd_grads.size(); ++j) {
        slots[j] = &bwd_grads[j];
      }
      rollout_backward_accumulate(params, bwd, slots, *grads);
    }
  }

  finish(out);
  return out;
}

}  // namespace

void LossConfig::validate() const {
  if (window < 1) {
    throw Error("loss config: window must be >= 1");
  }
  if (!(cycle_weight >= 0.0) || !std::isfinite(cycle_weight)) {
    throw Error("loss config: cycle weight must be >= 0");
  }
  if (!(truncation_radius > 0.0)) {
    throw Error("loss config: truncation radius must be > 0");
  }
  if (max_points_per_frame && *max_points_per_frame < 1) {
    throw Error("loss config: max points per frame must be >= 1");
  }
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& other) {
  for (const auto& [k, v] : other.chamfer_terms) {
    chamfer_terms[k] += v;
  }
  if (other.cycle_term) {
    cycle_term = cycle_term.value_or(0.0) + *other.cycle_term;
  }
  finish(*this);
  return *this;
}

ChamferResult truncated_chamfer(const Points3& pred, const NearestIndex& target_index,
                                const Points3& target, double radius) {
  if (pred.cols() == 0 || target.cols() == 0) {
    throw Error("truncated_chamfer: empty point set");
  }
  if (target_index.size() != target.cols()) {
    throw Error("truncated_chamfer: index does not cover the target cloud");
  }
  const double r2 = radius * radius;
  const auto np = static_cast<double>(pred.cols());
  const auto nt = static_cast<double>(target.cols());

  ChamferResult out;
  out.pred_grads = Points3::Zero(3, pred.cols());

  double to_target = 0.0;
  for (Eigen::Index i = 0; i < pred.cols(); ++i) {
    const auto nn = target_index.nearest(pred.col(i));
    if (nn.squared_distance <= r2) {
      to_target += nn.squared_distance;
      out.pred_grads.col(i) += (2.0 / np) * (pred.col(i) - target.col(nn.index));
    }
  }

  const NearestIndex pred_index(pred);
  double to_pred = 0.0;
  for (Eigen::Index j = 0; j < target.cols(); ++j) {
    const auto nn = pred_index.nearest(target.col(j));
    if (nn.squared_distance <= r2) {
      to_pred += nn.squared_distance;
      out.pred_grads.col(nn.index) += (2.0 / nt) * (pred.col(nn.index) - target.col(j));
    }
  }

  out.value = to_target / np + to_pred / nt;
  return out;
}

ChamferResult truncated_chamfer(const Points3& pred, const NearestIndex& target_index,
                                const PointCloud& target, double radius) {
  return truncated_chamfer(pred, target_index, target.points, radius);
}

SequenceIndex::SequenceIndex(const FrameSequence& seq) {
  indexes_.reserve(seq.frames.size());
  for (const auto& f : seq.frames) {
    indexes_.push_back(build_index(f));
  }
}

ObjectiveResult cycle_consistency(const PriorParams& params, const FrameSequence& seq,
                                  int t_idx) {
  if (t_idx < 0 || t_idx + 1 > seq.last_frame()) {
    throw Error("cycle_consistency: frame " + std::to_string(t_idx) + " has no successor");
  }
  const Points3& source = seq.frames[static_cast<std::size_t>(t_idx)].points;
  if (source.cols() == 0) {
    throw Error("cycle_consistency: empty frame");
  }
  const std::array<EulerStep, 2> steps{
      EulerStep{normalized_time(seq, t_idx), 1},
      EulerStep{normalized_time(seq, t_idx + 1), -1},
  };
  RolloutTape tape;
  const Points3 returned = rollout_with_grad(params, source, steps, tape);
  const Points3 diff = returned - source;
  const auto n = static_cast<double>(source.cols());

  double sum = 0.0;
  Points3 g = Points3::Zero(3, diff.cols());
  for (Eigen::Index i = 0; i < diff.cols(); ++i) {
    const double norm = diff.col(i).norm();
    sum += norm;
    if (norm > 0.0) {
      g.col(i) = diff.col(i) / (norm * n);
    }
  }
  // The start points are data, but they also appear in diff; that path does
  // not touch the parameters, so only the rollout gradient is needed.
  ObjectiveResult out;
  out.breakdown.cycle_term = sum / n;
  out.breakdown.total = sum / n;
  out.param_grads = rollout_backward(params, tape, g).params;
  return out;
}

ObjectiveResult frame_objective(const PriorParams& params, const FrameSequence& seq, int t_idx,
                                const LossConfig& cfg, const SequenceIndex& index,
                                std::mt19937_64* rng) {
  ObjectiveResult out;
  out.param_grads = Eigen::VectorXd::Zero(params.size());
  out.breakdown = evaluate_frame(params, seq, t_idx, cfg, index, rng, &out.param_grads);
  if (!out.param_grads.allFinite()) {
    throw Error("frame_objective: non-finite gradient");
  }
  return out;
}

ObjectiveResult frame_objective(const PriorParams& params, const FrameSequence& seq, int t_idx,
                                const LossConfig& cfg) {
  const SequenceIndex index(seq);
  std::mt19937_64 rng(kTotalObjectiveSeed);
  return frame_objective(params, seq, t_idx, cfg, index, &rng);
}

LossBreakdown frame_loss(const PriorParams& params, const FrameSequence& seq, int t_idx,
                         const LossConfig& cfg, const SequenceIndex& index,
                         std::mt19937_64* rng) {
  return evaluate_frame(params, seq, t_idx, cfg, index, rng, nullptr);
}

LossBreakdown total_objective(const PriorParams& params, const FrameSequence& seq,
                              const LossConfig& cfg, const SequenceIndex& index) {
  std::mt19937_64 rng(kTotalObjectiveSeed);
  LossBreakdown sum;
  for (int t = 0; t <= seq.last_frame(); ++t) {
    sum += frame_loss(params, seq, t, cfg, index, &rng);
  }
  return sum;
}

LossBreakdown total_objective(const PriorParams& params, const FrameSequence& seq,
                              const LossConfig& cfg) {
  const SequenceIndex index(seq);
  return total_objective(params, seq, cfg, index);
}

}  // namespace eulerflow
