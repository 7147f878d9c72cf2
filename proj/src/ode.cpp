#include "eulerflow/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace eulerflow {

namespace {

constexpr double kTimeGuard = 1.001;

}  // namespace

double guarded_time(double t_norm) {
  if (!std::isfinite(t_norm) || std::abs(t_norm) > kTimeGuard) {
    throw Error("euler step: normalized time " + std::to_string(t_norm) +
                " outside the guard band");
  }
  return std::clamp(t_norm, -1.0, 1.0);
}

std::vector<EulerStep> rollout_schedule(const FrameSequence& seq, int source_frame, int k) {
  if (k == 0) {
    throw Error("euler_rollout: k must be nonzero");
  }
  const int last = seq.last_frame();
  if (source_frame < 0 || source_frame > last) {
    throw Error("euler_rollout: source frame " + std::to_string(source_frame) + " out of range");
  }
  const int target = source_frame + k;
  if (target < 0 || target > last) {
    throw Error("euler_rollout: target frame " + std::to_string(target) + " out of range [0, " +
                std::to_string(last) + "]");
  }
  const int sign = k > 0 ? 1 : -1;
  std::vector<EulerStep> steps;
  steps.reserve(static_cast<std::size_t>(std::abs(k)));
  for (int j = 0; j < std::abs(k); ++j) {
    steps.push_back({normalized_time(seq, source_frame + j * sign), sign});
  }
  return steps;
}

Points3 euler_step(const PriorParams& params, const Points3& points, double t_norm,
                   int direction) {
  return euler_step(PriorField{params}, points, t_norm, direction);
}

Points3 euler_rollout(const PriorParams& params, const FrameSequence& seq, int source_frame,
                      const Points3& points, int k) {
  return euler_rollout(PriorField{params}, seq, source_frame, points, k);
}

FlowVectors extract_flow(const PriorParams& params, const FrameSequence& seq, int source_frame,
                         int k) {
  if (source_frame < 0 || source_frame > seq.last_frame()) {
    throw Error("extract_flow: source frame " + std::to_string(source_frame) + " out of range");
  }
  const Points3& source = seq.frames[static_cast<std::size_t>(source_frame)].points;
  FlowVectors flow;
  flow.source_frame = source_frame;
  flow.target_frame = source_frame + k;
  flow.residuals = euler_rollout(params, seq, source_frame, source, k) - source;
  return flow;
}

std::vector<Trajectory> extract_trajectory(const PriorParams& params, const FrameSequence& seq,
                                           int start_frame, const Points3& start_points,
                                           int end_frame) {
  return extract_trajectory(PriorField{params}, seq, start_frame, start_points, end_frame);
}

Points3 rollout_with_grad(const PriorParams& params, const Points3& points,
                          std::span<const EulerStep> steps, RolloutTape& tape) {
  tape.steps.assign(steps.begin(), steps.end());
  tape.tapes.assign(steps.size(), Tape{});
  tape.positions.clear();
  tape.positions.reserve(steps.size() + 1);
  tape.positions.push_back(points);
  for (std::size_t j = 0; j < steps.size(); ++j) {
    const auto& s = steps[j];
    const auto queries = make_queries(tape.positions.back(), guarded_time(s.t_norm), s.direction);
    Points3 delta = forward_with_tape(params, queries, tape.tapes[j]);
    if (!delta.allFinite()) {
      throw Error("prior diverged: non-finite displacement");
    }
    tape.positions.push_back(tape.positions.back() + delta);
  }
  return tape.positions.back();
}

Points3 euler_rollout_with_grad(const PriorParams& params, const FrameSequence& seq,
                                int source_frame, const Points3& points, int k,
                                RolloutTape& tape) {
  const auto steps = rollout_schedule(seq, source_frame, k);
  return rollout_with_grad(params, points, steps, tape);
}

Points3 rollout_backward_accumulate(const PriorParams& params, const RolloutTape& tape,
                                    std::span<const Points3* const> position_grads,
                                    Eigen::VectorXd& param_grads) {
  const std::size_t steps = tape.step_count();
  if (position_grads.size() != steps + 1 || tape.positions.size() != steps + 1) {
    throw Error("rollout_backward: expected one gradient slot per rollout position");
  }
  const Eigen::Index n = tape.positions.front().cols();
  for (const auto* g : position_grads) {
    if (g != nullptr && g->cols() != n) {
      throw Error("rollout_backward: gradient has " + std::to_string(g->cols()) +
                  " points, rollout has " + std::to_string(n));
    }
  }

  Points3 grad = Points3::Zero(3, n);
  for (std::size_t j = steps; j > 0; --j) {
    if (position_grads[j] != nullptr) {
      grad += *position_grads[j];
    }
    // p_j = p_{j-1} + theta(p_{j-1}): identity path plus the network's input gradient.
    const QueryBatch input_grad = backward_accumulate(params, tape.tapes[j - 1], grad, param_grads);
    grad += input_grad.topRows<3>();
  }
  if (position_grads[0] != nullptr) {
    grad += *position_grads[0];
  }
  return grad;
}

RolloutGrads rollout_backward(const PriorParams& params, const RolloutTape& tape,
                              const Points3& output_grads) {
  if (tape.positions.empty()) {
    throw Error("rollout_backward: empty tape");
  }
  if (output_grads.cols() != tape.final_positions().cols()) {
    throw Error("rollout_backward: output gradient shape does not match rollout");
  }
  std::vector<const Points3*> slots(tape.step_count() + 1, nullptr);
  slots.back() = &output_grads;
  RolloutGrads out;
  out.params = Eigen::VectorXd::Zero(params.size());
  out.start_points = rollout_backward_accumulate(params, tape, slots, out.params);
  return out;
}

}  // namespace eulerflow
