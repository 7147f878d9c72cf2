#include "eulerflow/eval.hpp"

#include <iomanip>
#include <sstream>

#include "eulerflow/ode.hpp"

namespace eulerflow {

namespace {

EpeReport pooled_report(const Points3& pred, const Points3& gt, const std::vector<int>& classes,
                        double threshold) {
  if (!(threshold > 0.0)) {
    throw Error("eval: dynamic speed threshold must be > 0");
  }
  if (pred.cols() != gt.cols() || static_cast<std::size_t>(gt.cols()) != classes.size()) {
    throw Error("eval: prediction, ground truth and class lengths differ");
  }
  if (gt.cols() == 0) {
    throw Error("eval: no points to evaluate");
  }

  const Eigen::VectorXd errors = (pred - gt).colwise().norm().transpose();
  const Eigen::VectorXd speeds = gt.colwise().norm().transpose();

  struct ClassSums {
    double epe = 0.0;
    double speed = 0.0;
    std::size_t count = 0;
  };
  std::map<int, ClassSums> per_class;

  EpeReport r;
  r.point_count = static_cast<std::size_t>(errors.size());
  r.mean_epe = errors.mean();
  double static_sum = 0.0;
  double dynamic_sum = 0.0;
  for (Eigen::Index i = 0; i < errors.size(); ++i) {
    if (speeds[i] >= threshold) {
      dynamic_sum += errors[i];
      ++r.dynamic_count;
      auto& c = per_class[classes[static_cast<std::size_t>(i)]];
      c.epe += errors[i];
      c.speed += speeds[i];
      ++c.count;
    } else {
      static_sum += errors[i];
      ++r.static_count;
    }
  }
  if (r.static_count > 0) {
    r.static_epe = static_sum / static_cast<double>(r.static_count);
  }
  if (r.dynamic_count > 0) {
    r.dynamic_epe = dynamic_sum / static_cast<double>(r.dynamic_count);
  }

  if (!per_class.empty()) {
    double sum = 0.0;
    for (const auto& [id, c] : per_class) {
      // Mean EPE over mean speed; the counts cancel.
      const double ratio = c.epe / c.speed;
      r.per_class_dynamic_normalized[id] = ratio;
      sum += ratio;
    }
    r.mean_dynamic_normalized = sum / static_cast<double>(per_class.size());
  }
  return r;
}

}  // namespace

Eigen::VectorXd endpoint_errors(const FlowVectors& pred, const FlowVectors& gt) {
  if (pred.residuals.cols() != gt.residuals.cols()) {
    throw Error("endpoint_errors: prediction has " + std::to_string(pred.residuals.cols()) +
                " vectors, ground truth has " + std::to_string(gt.residuals.cols()));
  }
  if (pred.source_frame != gt.source_frame) {
    throw Error("endpoint_errors: source frames differ");
  }
  return (pred.residuals - gt.residuals).colwise().norm().transpose();
}

double average_epe(const Eigen::VectorXd& errors) {
  if (errors.size() == 0) {
    throw Error("average_epe: no errors");
  }
  return errors.mean();
}

EpeReport dynamic_normalized_report(const FlowVectors& pred, const FlowVectors& gt,
                                    const std::vector<int>& classes,
                                    double dynamic_speed_threshold) {
  if (pred.source_frame != gt.source_frame) {
    throw Error("dynamic_normalized_report: source frames differ");
  }
  return pooled_report(pred.residuals, gt.residuals, classes, dynamic_speed_threshold);
}

EpeReport evaluate_flows(const std::vector<FlowVectors>& pred, const FrameSequence& seq,
                         const EvalConfig& cfg) {
  if (pred.size() != seq.frames.size() - 1) {
    throw Error("evaluate_flows: expected one flow per frame with a successor");
  }
  Eigen::Index total = 0;
  for (std::size_t f = 0; f + 1 < seq.frames.size(); ++f) {
    const auto& frame = seq.frames[f];
    if (!frame.gt_flow || !frame.class_id) {
      throw Error("evaluate: frame " + std::to_string(f) + " is missing ground truth or classes");
    }
    if (pred[f].residuals.cols() != frame.size() || pred[f].source_frame != frame.frame_index) {
      throw Error("evaluate: flow for frame " + std::to_string(f) + " does not match the frame");
    }
    total += frame.size();
  }

  Points3 all_pred(3, total);
  Points3 all_gt(3, total);
  std::vector<int> classes;
  classes.reserve(static_cast<std::size_t>(total));
  Eigen::Index at = 0;
  for (std::size_t f = 0; f + 1 < seq.frames.size(); ++f) {
    const auto& frame = seq.frames[f];
    all_pred.middleCols(at, frame.size()) = pred[f].residuals;
    all_gt.middleCols(at, frame.size()) = *frame.gt_flow;
    classes.insert(classes.end(), frame.class_id->begin(), frame.class_id->end());
    at += frame.size();
  }
  return pooled_report(all_pred, all_gt, classes, cfg.dynamic_speed_threshold);
}

EpeReport evaluate_sequence(const PriorParams& params, const FrameSequence& seq,
                            const EvalConfig& cfg) {
  for (const auto& frame : seq.frames) {
    if (!frame.gt_flow || !frame.class_id) {
      throw Error("evaluate: sequence is missing ground truth flow or classes");
    }
  }
  std::vector<FlowVectors> flows;
  flows.reserve(seq.frames.size() - 1);
  for (int f = 0; f < seq.last_frame(); ++f) {
    flows.push_back(extract_flow(params, seq, f, 1));
  }
  return evaluate_flows(flows, seq, cfg);
}

std::string format_report(const EpeReport& r) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "mean_epe=" << r.mean_epe << '\n';
  out << "static_epe=" << r.static_epe << '\n';
  out << "dynamic_epe=" << r.dynamic_epe << '\n';
  out << "point_count=" << r.point_count << '\n';
  out << "static_count=" << r.static_count << '\n';
  out << "dynamic_count=" << r.dynamic_count << '\n';
  if (r.mean_dynamic_normalized) {
    out << "mean_dynamic_normalized=" << *r.mean_dynamic_normalized << '\n';
  } else {
    out << "mean_dynamic_normalized=absent\n";
  }
  for (const auto& [id, v] : r.per_class_dynamic_normalized) {
    out << "class_" << id << "_dynamic_normalized=" << v << '\n';
  }
  return out.str();
}

}  // namespace eulerflow
