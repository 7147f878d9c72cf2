#ifndef EULERFLOW_LOSS_HPP
#define EULERFLOW_LOSS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "eulerflow/geom.hpp"
#include "eulerflow/ode.hpp"
#include "eulerflow/prior.hpp"

namespace eulerflow {

struct LossConfig {
  int window = 3;
  double cycle_weight = 0.01;
  double truncation_radius = 2.0;
  bool no_multi_k = false;
  bool no_cycle = false;
  /// Uniform random subsample of source and target frames per objective call.
  std::optional<Eigen::Index> max_points_per_frame;

  void validate() const;

  /// Largest |k| actually used, after the no_multi_k ablation.
  int effective_window() const { return no_multi_k ? 1 : window; }
};

/// Objective value split by term. cycle_term already carries the cycle weight
/// and is absent when the cycle term does not apply.
struct LossBreakdown {
  double total = 0.0;
  std::map<int, double> chamfer_terms;
  std::optional<double> cycle_term;

  LossBreakdown& operator+=(const LossBreakdown& other);
};

struct ChamferResult {
  double value = 0.0;
  Points3 pred_grads;
};

/// Bidirectional mean squared-distance Chamfer; pairs farther apart than
/// radius contribute neither value nor gradient. Gradients hold the
/// nearest-neighbour assignment fixed.
ChamferResult truncated_chamfer(const Points3& pred, const NearestIndex& target_index,
                                const Points3& target, double radius);
ChamferResult truncated_chamfer(const Points3& pred, const NearestIndex& target_index,
                                const PointCloud& target, double radius);

/// Nearest-neighbour indexes for every frame of a sequence, built once.
class SequenceIndex {
 public:
  explicit SequenceIndex(const FrameSequence& seq);

  const NearestIndex& frame(int i) const { return indexes_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return indexes_.size(); }

 private:
  std::vector<NearestIndex> indexes_;
};

struct ObjectiveResult {
  LossBreakdown breakdown;
  Eigen::VectorXd param_grads;
};

/// Unweighted cycle term: mean distance between each point of frame t_idx and
/// its image after one forward then one backward step.
ObjectiveResult cycle_consistency(const PriorParams& params, const FrameSequence& seq, int t_idx);

/// Full objective anchored at frame t_idx with exact parameter gradients.
ObjectiveResult frame_objective(const PriorParams& params, const FrameSequence& seq, int t_idx,
                                const LossConfig& cfg);

/// As above with prebuilt indexes; rng drives subsampling and may be null
/// only when cfg.max_points_per_frame is unset.
ObjectiveResult frame_objective(const PriorParams& params, const FrameSequence& seq, int t_idx,
                                const LossConfig& cfg, const SequenceIndex& index,
                                std::mt19937_64* rng);

/// Value only.
LossBreakdown frame_loss(const PriorParams& params, const FrameSequence& seq, int t_idx,
                         const LossConfig& cfg, const SequenceIndex& index, std::mt19937_64* rng);

/// Sum of frame losses over every anchor frame. Subsampling, when enabled,
/// uses a fixed seed so successive calls are comparable.
LossBreakdown total_objective(const PriorParams& params, const FrameSequence& seq,
                              const LossConfig& cfg);
LossBreakdown total_objective(const PriorParams& params, const FrameSequence& seq,
                              const LossConfig& cfg, const SequenceIndex& index);

}  // namespace eulerflow

#endif  // EULERFLOW_LOSS_HPP
