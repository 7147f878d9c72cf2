#ifndef EULERFLOW_PRIOR_HPP
#define EULERFLOW_PRIOR_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "eulerflow/geom.hpp"

namespace eulerflow {

/// Rows of a query batch: x, y, z (meters), normalized time, direction flag.
inline constexpr Eigen::Index kQueryDim = 5;

using QueryBatch = Eigen::Matrix<double, kQueryDim, Eigen::Dynamic>;

struct PriorConfig {
  int depth = 8;
  int width = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Flat parameter vector of the space-time-direction MLP.
///
/// Layer l stores a column-major (out x in) weight block followed by its bias.
/// Layers are 5 -> width, (depth - 1) x width -> width, width -> 3. Hidden
/// layers use ReLU; the output layer is linear and is read as the displacement
/// over one frame interval.
class PriorParams {
 public:
  PriorParams() = default;
  PriorParams(int depth, int width);
  PriorParams(int depth, int width, Eigen::VectorXd values);

  static Eigen::Index count_for(int depth, int width);

  int depth() const { return depth_; }
  int width() const { return width_; }
  int layer_count() const { return depth_ + 1; }
  Eigen::Index layer_in(int layer) const;
  Eigen::Index layer_out(int layer) const;
  Eigen::Index layer_offset(int layer) const;

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  Eigen::Index size() const { return values_.size(); }

  friend bool operator==(const PriorParams& a, const PriorParams& b) {
    return a.depth_ == b.depth_ && a.width_ == b.width_ && a.values_ == b.values_;
  }

 private:
  int depth_ = 0;
  int width_ = 0;
  Eigen::VectorXd values_;
};

/// Activations recorded by forward_with_tape: the input of every layer.
struct Tape {
  std::vector<Eigen::MatrixXd> layer_inputs;
  int depth = 0;
  int width = 0;

  Eigen::Index batch_size() const {
    return layer_inputs.empty() ? 0 : layer_inputs.front().cols();
  }
};

struct PriorGrads {
  Eigen::VectorXd params;
  QueryBatch inputs;
};

/// Uniform weights in +-1/sqrt(fan_in), zero biases. The initial field is
/// then close to zero, so early Chamfer pairs sit inside the truncation radius.
PriorParams init_params(const PriorConfig& config);

/// Packs points with a shared time and direction into a query batch.
QueryBatch make_queries(const Points3& points, double t_norm, int direction);

Points3 forward(const PriorParams& params, const QueryBatch& batch);

Points3 forward_with_tape(const PriorParams& params, const QueryBatch& batch, Tape& tape);

/// Reverse-mode gradient of sum(output_grads . outputs) for the pass recorded
/// in tape. ReLU'(0) is taken as 0.
PriorGrads backward(const PriorParams& params, const Tape& tape, const Points3& output_grads);

/// As backward, but accumulates the parameter gradient into param_grads and
/// returns only the input gradient.
QueryBatch backward_accumulate(const PriorParams& params, const Tape& tape,
                               const Points3& output_grads, Eigen::VectorXd& param_grads);

}  // namespace eulerflow

#endif  // EULERFLOW_PRIOR_HPP
