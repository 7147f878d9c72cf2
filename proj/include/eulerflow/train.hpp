#ifndef EULERFLOW_TRAIN_HPP
#define EULERFLOW_TRAIN_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "eulerflow/loss.hpp"
#include "eulerflow/prior.hpp"

namespace eulerflow {

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_epochs = 2000;
  int patience = 100;
  double min_delta = 1e-6;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;

  static AdamState zeros(Eigen::Index n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
  }
};

/// One bias-corrected Adam update of params in place.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown objective;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 means the initial parameters were never beaten
  double best_total = 0.0;
  bool early_stopped = false;
};

struct FitResult {
  PriorParams params;
  TrainHistory history;
};

/// Called after every epoch with its record and the current (not best) parameters.
using ProgressCallback = std::function<void(const EpochRecord&, const PriorParams&)>;

/// Raised when the objective or its gradient stops being finite. Carries the
/// best parameters seen so far.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int last_good_epoch, PriorParams best)
      : Error(what), last_good_epoch_(last_good_epoch), best_(std::move(best)) {}

  int last_good_epoch() const { return last_good_epoch_; }
  const PriorParams& best_params() const { return best_; }

 private:
  int last_good_epoch_;
  PriorParams best_;
};

/// Fits the prior to a sequence. Each epoch visits every anchor frame once in
/// a seeded random order with one Adam step per frame, then scores the full
/// objective. Stops after `patience` epochs without a min_delta improvement
/// and returns the best parameters observed.
FitResult fit(const FrameSequence& seq, const PriorConfig& prior_cfg, const LossConfig& loss_cfg,
              const TrainConfig& train_cfg, const ProgressCallback& progress = {});

/// As above, starting from the given parameters.
FitResult fit(const FrameSequence& seq, PriorParams initial, const LossConfig& loss_cfg,
              const TrainConfig& train_cfg, const ProgressCallback& progress = {});

/// Binary checkpoint: "EULF", u16 version (1), u16 depth, u16 width,
/// u64 parameter count, then the parameters as little-endian doubles.
inline constexpr std::size_t kCheckpointHeaderBytes = 4 + 2 + 2 + 2 + 8;

void save_checkpoint(const PriorParams& params, const std::filesystem::path& path);
PriorParams load_checkpoint(const std::filesystem::path& path);

}  // namespace eulerflow

#endif  // EULERFLOW_TRAIN_HPP
