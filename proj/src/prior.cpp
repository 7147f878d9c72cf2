#include "eulerflow/prior.hpp"

#include <cmath>
#include <random>
#include <string>

namespace eulerflow {

namespace {

constexpr Eigen::Index kOutputDim = 3;

void check_shape(int depth, int width) {
  if (depth < 1 || width < 1) {
    throw Error("prior: depth and width must be >= 1 (got depth " + std::to_string(depth) +
                ", width " + std::to_string(width) + ")");
  }
}

// Shared by forward and forward_with_tape so both produce identical bits.
template <typename OnLayerInput>
Points3 run_layers(const PriorParams& params, const QueryBatch& batch, OnLayerInput&& record) {
  if (!batch.allFinite()) {
    throw Error("prior forward: non-finite query");
  }
  if (params.size() != PriorParams::count_for(params.depth(), params.width())) {
    throw Error("prior forward: parameter vector does not match shape");
  }
  Eigen::MatrixXd act = batch;
  Eigen::MatrixXd z;
  const int layers = params.layer_count();
  for (int l = 0; l < layers; ++l) {
    z.noalias() = params.weight(l) * act;
    z.colwise() += params.bias(l);
    if (l + 1 < layers) {
      z = z.cwiseMax(0.0);
    }
    record(std::move(act));
    act = std::move(z);
    z = Eigen::MatrixXd();
  }
  return act;
}

}  // namespace

void PriorConfig::validate() const { check_shape(depth, width); }

PriorParams::PriorParams(int depth, int width) : depth_(depth), width_(width) {
  check_shape(depth, width);
  values_ = Eigen::VectorXd::Zero(count_for(depth, width));
}

PriorParams::PriorParams(int depth, int width, Eigen::VectorXd values)
    : depth_(depth), width_(width), values_(std::move(values)) {
  check_shape(depth, width);
  if (values_.size() != count_for(depth, width)) {
    throw Error("prior: expected " + std::to_string(count_for(depth, width)) +
                " parameters, got " + std::to_string(values_.size()));
  }
}

Eigen::Index PriorParams::count_for(int depth, int width) {
  const Eigen::Index w = width;
  return (kQueryDim * w + w) + (depth - 1) * (w * w + w) + (w * kOutputDim + kOutputDim);
}

Eigen::Index PriorParams::layer_in(int layer) const {
  return layer == 0 ? kQueryDim : width_;
}

Eigen::Index PriorParams::layer_out(int layer) const {
  return layer == depth_ ? kOutputDim : width_;
}

Eigen::Index PriorParams::layer_offset(int layer) const {
  Eigen::Index off = 0;
  for (int l = 0; l < layer; ++l) {
    off += layer_out(l) * layer_in(l) + layer_out(l);
  }
  return off;
}

Eigen::Map<const Eigen::MatrixXd> PriorParams::weight(int layer) const {
  return {values_.data() + layer_offset(layer), layer_out(layer), layer_in(layer)};
}

Eigen::Map<Eigen::MatrixXd> PriorParams::weight(int layer) {
  return {values_.data() + layer_offset(layer), layer_out(layer), layer_in(layer)};
}

Eigen::Map<const Eigen::VectorXd> PriorParams::bias(int layer) const {
  return {values_.data() + layer_offset(layer) + layer_out(layer) * layer_in(layer),
          layer_out(layer)};
}

Eigen::Map<Eigen::VectorXd> PriorParams::bias(int layer) {
  return {values_.data() + layer_offset(layer) + layer_out(layer) * layer_in(layer),
          layer_out(layer)};
}

PriorParams init_params(const PriorConfig& config) {
  config.validate();
  PriorParams params(config.depth, config.width);
  std::mt19937_64 rng(config.seed);
  for (int l = 0; l < params.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(params.layer_in(l)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = params.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w(i, j) = dist(rng);
      }
    }
  }
  return params;
}

QueryBatch make_queries(const Points3& points, double t_norm, int direction) {
  if (direction != 1 && direction != -1) {
    throw Error("prior: direction flag must be -1 or +1");
  }
  QueryBatch batch(kQueryDim, points.cols());
  batch.topRows<3>() = points;
  batch.row(3).setConstant(t_norm);
  batch.row(4).setConstant(static_cast<double>(direction));
  return batch;
}

Points3 forward(const PriorParams& params, const QueryBatch& batch) {
  return run_layers(params, batch, [](Eigen::MatrixXd&&) {});
}

Points3 forward_with_tape(const PriorParams& params, const QueryBatch& batch, Tape& tape) {
  tape.layer_inputs.clear();
  tape.layer_inputs.reserve(static_cast<std::size_t>(params.layer_count()));
  tape.depth = params.depth();
  tape.width = params.width();
  return run_layers(params, batch,
                    [&](Eigen::MatrixXd&& a) { tape.layer_inputs.push_back(std::move(a)); });
}

QueryBatch backward_accumulate(const PriorParams& params, const Tape& tape,
                               const Points3& output_grads, Eigen::VectorXd& param_grads) {
  const int layers = params.layer_count();
  if (tape.depth != params.depth() || tape.width != params.width() ||
      static_cast<int>(tape.layer_inputs.size()) != layers) {
    throw Error("prior backward: tape was recorded for a different network shape");
  }
  if (output_grads.cols() != tape.batch_size()) {
    throw Error("prior backward: output gradient has " + std::to_string(output_grads.cols()) +
                " rows, tape has " + std::to_string(tape.batch_size()));
  }
  if (param_grads.size() != params.size()) {
    throw Error("prior backward: parameter gradient buffer has the wrong size");
  }

  Eigen::MatrixXd grad = output_grads;
  Eigen::MatrixXd next;
  for (int l = layers - 1; l >= 0; --l) {
    const auto& input = tape.layer_inputs[static_cast<std::size_t>(l)];
    const Eigen::Index off = params.layer_offset(l);
    const Eigen::Index rows = params.layer_out(l);
    const Eigen::Index cols = params.layer_in(l);
    Eigen::Map<Eigen::MatrixXd> gw(param_grads.data() + off, rows, cols);
    Eigen::Map<Eigen::VectorXd> gb(param_grads.data() + off + rows * cols, rows);
    gw.noalias() += grad * input.transpose();
    gb += grad.rowwise().sum();

    next.noalias() = params.weight(l).transpose() * grad;
    if (l > 0) {
      // The layer input is the previous ReLU output; positive exactly where active.
      next = (input.array() > 0.0).select(next, 0.0);
    }
    grad.swap(next);
  }
  return grad;
}

PriorGrads backward(const PriorParams& params, const Tape& tape, const Points3& output_grads) {
  PriorGrads out;
  out.params = Eigen::VectorXd::Zero(params.size());
  out.inputs = backward_accumulate(params, tape, output_grads, out.params);
  return out;
}

}  // namespace eulerflow
