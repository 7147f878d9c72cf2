#ifndef EULERFLOW_EVAL_HPP
#define EULERFLOW_EVAL_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eulerflow/geom.hpp"
#include "eulerflow/prior.hpp"

namespace eulerflow {

/// Points whose ground-truth displacement is at least this long per frame
/// count as dynamic (0.5 m/s at 10 Hz).
inline constexpr double kDefaultDynamicThreshold = 0.05;

struct EvalConfig {
  double dynamic_speed_threshold = kDefaultDynamicThreshold;
};

/// Per-class speed-normalized EPE: for every class, mean EPE over its dynamic
/// points divided by their mean ground-truth speed, then an unweighted mean
/// over classes. This is a simplified bucket-free variant and is not
/// numerically comparable with leaderboard values.
struct EpeReport {
  double mean_epe = 0.0;
  double static_epe = 0.0;
  double dynamic_epe = 0.0;
  std::size_t point_count = 0;
  std::size_t static_count = 0;
  std::size_t dynamic_count = 0;
  std::map<int, double> per_class_dynamic_normalized;
  std::optional<double> mean_dynamic_normalized;
};

Eigen::VectorXd endpoint_errors(const FlowVectors& pred, const FlowVectors& gt);

double average_epe(const Eigen::VectorXd& errors);

EpeReport dynamic_normalized_report(const FlowVectors& pred, const FlowVectors& gt,
                                    const std::vector<int>& classes,
                                    double dynamic_speed_threshold = kDefaultDynamicThreshold);

/// Pools adjacent-pair (k = 1) flow over every frame with a successor.
EpeReport evaluate_sequence(const PriorParams& params, const FrameSequence& seq,
                            const EvalConfig& cfg = {});

/// As evaluate_sequence, for predictions already computed: pred[i] is the
/// flow of frame i to i + 1.
EpeReport evaluate_flows(const std::vector<FlowVectors>& pred, const FrameSequence& seq,
                         const EvalConfig& cfg = {});

/// One `metric=value` line per field; classes as class_<id>_dynamic_normalized.
std::string format_report(const EpeReport& report);

}  // namespace eulerflow

#endif  // EULERFLOW_EVAL_HPP
