#include "eulerflow/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace eulerflow {

namespace {

bool better(double d2, Eigen::Index i, const NearestResult& best) {
  return d2 < best.squared_distance ||
         (d2 == best.squared_distance && i < best.index);
}

void check_query(const Point3& query) {
  if (!query.allFinite()) {
    throw Error("nearest: non-finite query point");
  }
}

}  // namespace

void PointCloud::validate() const {
  const auto n = static_cast<std::size_t>(points.cols());
  if (!points.allFinite()) {
    throw Error("point cloud " + std::to_string(frame_index) +
                ": non-finite coordinate");
  }
  if (gt_flow && static_cast<std::size_t>(gt_flow->cols()) != n) {
    throw Error("point cloud " + std::to_string(frame_index) +
                ": gt_flow length does not match points");
  }
  if (class_id && class_id->size() != n) {
    throw Error("point cloud " + std::to_string(frame_index) +
                ": class_id length does not match points");
  }
  if (is_dynamic && is_dynamic->size() != n) {
    throw Error("point cloud " + std::to_string(frame_index) +
                ": is_dynamic length does not match points");
  }
}

void FrameSequence::validate() const {
  if (frames.size() < 2) {
    throw Error("frame sequence needs at least 2 frames");
  }
  if (!(frame_interval > 0.0) || !std::isfinite(frame_interval)) {
    throw Error("frame sequence: frame_interval must be positive");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    f.validate();
    if (f.frame_index != static_cast<int>(i)) {
      throw Error("frame sequence: frame indices must be 0..N consecutive");
    }
    if (i > 0) {
      const double dt = f.timestamp - frames[i - 1].timestamp;
      if (!(dt > 0.0) || std::abs(dt - frame_interval) > 1e-9) {
        throw Error("frame sequence: timestamps must advance by frame_interval");
      }
    }
  }
}

NearestIndex::NearestIndex(Points3 points, Eigen::Index leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<Eigen::Index>(leaf_size, 1)) {
  if (points_.cols() == 0) {
    throw Error("build_index: empty point set");
  }
  if (!points_.allFinite()) {
    throw Error("build_index: non-finite point");
  }
  order_.resize(static_cast<std::size_t>(points_.cols()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  nodes_.reserve(2 * order_.size() / static_cast<std::size_t>(leaf_size_) + 1);
  build(0, points_.cols());
}

std::int32_t NearestIndex::build(Eigen::Index begin, Eigen::Index end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{});
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= leaf_size_) {
    return id;
  }

  Point3 lo = Point3::Constant(std::numeric_limits<double>::infinity());
  Point3 hi = -lo;
  for (Eigen::Index i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_.col(order_[i]));
    hi = hi.cwiseMax(points_.col(order_[i]));
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  const Eigen::Index mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](Eigen::Index a, Eigen::Index b) {
                     const double ca = points_(axis, a);
                     const double cb = points_(axis, b);
                     return ca < cb || (ca == cb && a < b);
                   });
  const double split = points_(axis, order_[mid]);
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  auto& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void NearestIndex::search(std::int32_t id, const Point3& query, NearestResult& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (Eigen::Index i = node.begin; i < node.end; ++i) {
      const Eigen::Index p = order_[i];
      const double d2 = (points_.col(p) - query).squaredNorm();
      if (better(d2, p, best)) {
        best.index = p;
        best.squared_distance = d2;
      }
    }
    return;
  }
  const double diff = query(node.axis) - node.split;
  const auto near_side = diff < 0.0 ? node.left : node.right;
  const auto far_side = diff < 0.0 ? node.right : node.left;
  search(near_side, query, best);
  // Non-strict so that an equidistant point with a lower index is still found.
  if (diff * diff <= best.squared_distance) {
    search(far_side, query, best);
  }
}

NearestResult NearestIndex::nearest(const Point3& query) const {
  check_query(query);
  NearestResult best{-1, std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

std::size_t NearestIndex::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.axis < 0; }));
}

NearestIndex build_index(const Points3& points) { return NearestIndex(points); }

NearestIndex build_index(const PointCloud& cloud) {
  if (cloud.empty()) {
    throw Error("build_index: empty point set");
  }
  return NearestIndex(cloud.points);
}

NearestResult nearest(const NearestIndex& index, const Point3& query) {
  return index.nearest(query);
}

NearestResult nearest_bruteforce(const Points3& points, const Point3& query) {
  check_query(query);
  if (points.cols() == 0) {
    throw Error("nearest_bruteforce: empty point set");
  }
  NearestResult best{-1, std::numeric_limits<double>::infinity()};
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    const double d2 = (points.col(p) - query).squaredNorm();
    if (better(d2, p, best)) {
      best.index = p;
      best.squared_distance = d2;
    }
  }
  return best;
}

NearestResult nearest_bruteforce(const PointCloud& cloud, const Point3& query) {
  return nearest_bruteforce(cloud.points, query);
}

double normalized_time(const FrameSequence& seq, int frame_index) {
  const int last = seq.last_frame();
  if (last < 1) {
    throw Error("normalized_time: sequence needs at least 2 frames");
  }
  if (frame_index < 0 || frame_index > last) {
    throw Error("normalized_time: frame " + std::to_string(frame_index) +
                " outside [0, " + std::to_string(last) + "]");
  }
  if (frame_index == last) {
    return 1.0;
  }
  return -1.0 + 2.0 * static_cast<double>(frame_index) / static_cast<double>(last);
}

double normalized_step(const FrameSequence& seq) {
  const int last = seq.last_frame();
  if (last < 1) {
    throw Error("normalized_step: sequence needs at least 2 frames");
  }
  return 2.0 / static_cast<double>(last);
}

}  // namespace eulerflow
