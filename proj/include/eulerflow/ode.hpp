#ifndef EULERFLOW_ODE_HPP
#define EULERFLOW_ODE_HPP

#include <concepts>
#include <span>
#include <vector>

#include "eulerflow/geom.hpp"
#include "eulerflow/prior.hpp"

namespace eulerflow {

/// Anything that maps (points, normalized time, direction) to a per-point
/// displacement over one step. The prior is one; tests substitute analytic
/// fields.
template <typename F>
concept DisplacementField = requires(const F& f, const Points3& p, double t, int d) {
  { f(p, t, d) } -> std::convertible_to<Points3>;
};

struct PriorField {
  const PriorParams& params;

  Points3 operator()(const Points3& points, double t_norm, int direction) const {
    return forward(params, make_queries(points, t_norm, direction));
  }
};

/// Time and direction at which one explicit Euler step queries the field.
struct EulerStep {
  double t_norm = 0.0;
  int direction = 1;
};

/// Guard band for step times: |t| <= 1.001 is clamped into [-1, 1], anything
/// further out is an indexing bug and throws.
double guarded_time(double t_norm);

/// Steps for a k-frame rollout from source_frame: step j queries the time of
/// frame source_frame + j * sign(k) with direction sign(k).
std::vector<EulerStep> rollout_schedule(const FrameSequence& seq, int source_frame, int k);

template <DisplacementField F>
Points3 euler_step(const F& field, const Points3& points, double t_norm, int direction) {
  if (direction != 1 && direction != -1) {
    throw Error("euler_step: direction must be -1 or +1");
  }
  Points3 delta = field(points, guarded_time(t_norm), direction);
  if (delta.cols() != points.cols()) {
    throw Error("euler_step: field returned the wrong number of displacements");
  }
  if (!delta.allFinite()) {
    throw Error("prior diverged: non-finite displacement");
  }
  return points + delta;
}

template <DisplacementField F>
Points3 euler_integrate(const F& field, Points3 points, std::span<const EulerStep> steps) {
  for (const auto& s : steps) {
    points = euler_step(field, points, s.t_norm, s.direction);
  }
  return points;
}

template <DisplacementField F>
Points3 euler_rollout(const F& field, const FrameSequence& seq, int source_frame,
                      const Points3& points, int k) {
  const auto steps = rollout_schedule(seq, source_frame, k);
  return euler_integrate(field, points, std::span<const EulerStep>(steps));
}

Points3 euler_step(const PriorParams& params, const Points3& points, double t_norm,
                   int direction);

Points3 euler_rollout(const PriorParams& params, const FrameSequence& seq, int source_frame,
                      const Points3& points, int k);

FlowVectors extract_flow(const PriorParams& params, const FrameSequence& seq, int source_frame,
                         int k);

/// Positions of one tracked point at every integer frame from start_frame to
/// end_frame inclusive, in traversal order.
struct Trajectory {
  int start_frame = 0;
  int end_frame = 0;
  std::vector<int> frames;
  Points3 positions;
};

template <DisplacementField F>
std::vector<Trajectory> extract_trajectory(const F& field, const FrameSequence& seq,
                                           int start_frame, const Points3& start_points,
                                           int end_frame) {
  const int k = end_frame - start_frame;
  const auto steps = k == 0 ? std::vector<EulerStep>{} : rollout_schedule(seq, start_frame, k);
  if (k == 0) {
    normalized_time(seq, start_frame);  // range check only
  }
  const int sign = k < 0 ? -1 : 1;
  const auto n = static_cast<std::size_t>(start_points.cols());
  const auto len = static_cast<Eigen::Index>(steps.size() + 1);

  std::vector<Trajectory> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& tr = out[i];
    tr.start_frame = start_frame;
    tr.end_frame = end_frame;
    tr.positions.resize(3, len);
    tr.frames.resize(static_cast<std::size_t>(len));
    for (Eigen::Index j = 0; j < len; ++j) {
      tr.frames[static_cast<std::size_t>(j)] = start_frame + sign * static_cast<int>(j);
    }
  }

  Points3 current = start_points;
  for (Eigen::Index j = 0; j < len; ++j) {
    if (j > 0) {
      const auto& s = steps[static_cast<std::size_t>(j - 1)];
      current = euler_step(field, current, s.t_norm, s.direction);
    }
    for (std::size_t i = 0; i < n; ++i) {
      out[i].positions.col(j) = current.col(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

std::vector<Trajectory> extract_trajectory(const PriorParams& params, const FrameSequence& seq,
                                           int start_frame, const Points3& start_points,
                                           int end_frame);

/// Everything a differentiable rollout needs for its backward pass.
/// positions[j] is the point set after j steps.
struct RolloutTape {
  std::vector<EulerStep> steps;
  std::vector<Tape> tapes;
  std::vector<Points3> positions;

  std::size_t step_count() const { return steps.size(); }
  const Points3& final_positions() const { return positions.back(); }
};

struct RolloutGrads {
  Eigen::VectorXd params;
  Points3 start_points;
};

Points3 rollout_with_grad(const PriorParams& params, const Points3& points,
                          std::span<const EulerStep> steps, RolloutTape& tape);

Points3 euler_rollout_with_grad(const PriorParams& params, const FrameSequence& seq,
                                int source_frame, const Points3& points, int k,
                                RolloutTape& tape);

/// Gradient of sum(output_grads . final positions).
RolloutGrads rollout_backward(const PriorParams& params, const RolloutTape& tape,
                              const Points3& output_grads);

/// Gradient of sum_j sum(position_grads[j] . positions[j]) for j in
/// 0..step_count(); null entries contribute nothing. Parameter gradients are
/// added into param_grads, the start-point gradient is returned.
Points3 rollout_backward_accumulate(const PriorParams& params, const RolloutTape& tape,
                                    std::span<const Points3* const> position_grads,
                                    Eigen::VectorXd& param_grads);

}  // namespace eulerflow

#endif  // EULERFLOW_ODE_HPP
