#ifndef EULERFLOW_GEOM_HPP
#define EULERFLOW_GEOM_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace eulerflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
using Point3T = Eigen::Matrix<Scalar, 3, 1>;

/// Column-major point set, one point per column.
template <typename Scalar>
using Points3T = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

using Point3 = Point3T<double>;
using Points3 = Points3T<double>;

/// One observed frame. Optional per-point channels are either empty or sized
/// to points.cols().
struct PointCloud {
  Points3 points;
  std::optional<Points3> gt_flow;
  std::optional<std::vector<int>> class_id;
  std::optional<std::vector<bool>> is_dynamic;
  int frame_index = 0;
  double timestamp = 0.0;

  Eigen::Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }

  /// Throws if channel lengths disagree or any coordinate is non-finite.
  void validate() const;
};

/// Frames 0..N at a fixed frame interval.
struct FrameSequence {
  std::vector<PointCloud> frames;
  double frame_interval = 0.1;

  /// Index of the last frame, i.e. N for frames 0..N.
  int last_frame() const { return static_cast<int>(frames.size()) - 1; }

  void validate() const;
};

/// Per-point residuals from source_frame to target_frame.
struct FlowVectors {
  Points3 residuals;
  int source_frame = 0;
  int target_frame = 1;
};

struct NearestResult {
  Eigen::Index index = -1;
  double squared_distance = 0.0;
};

/// Exact nearest-neighbour kd-tree over a fixed point set. Ties resolve to the
/// lowest point index, so results are identical to a brute-force scan.
class NearestIndex {
 public:
  explicit NearestIndex(Points3 points, Eigen::Index leaf_size = 8);

  NearestResult nearest(const Point3& query) const;

  const Points3& points() const { return points_; }
  Eigen::Index size() const { return points_.cols(); }
  std::size_t leaf_count() const;

 private:
  struct Node {
    // Leaves have axis == -1 and cover order_[begin, end).
    int axis = -1;
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    Eigen::Index begin = 0;
    Eigen::Index end = 0;
  };

  std::int32_t build(Eigen::Index begin, Eigen::Index end);
  void search(std::int32_t node, const Point3& query, NearestResult& best) const;

  Points3 points_;
  Eigen::Index leaf_size_;
  std::vector<Eigen::Index> order_;
  std::vector<Node> nodes_;
};

NearestIndex build_index(const PointCloud& cloud);
NearestIndex build_index(const Points3& points);

NearestResult nearest(const NearestIndex& index, const Point3& query);

/// O(n) scan with the same tie-break as NearestIndex.
NearestResult nearest_bruteforce(const Points3& points, const Point3& query);
NearestResult nearest_bruteforce(const PointCloud& cloud, const Point3& query);

/// Maps frame 0..N affinely onto [-1, 1].
double normalized_time(const FrameSequence& seq, int frame_index);

/// Spacing of adjacent frames in normalized time, 2/N.
double normalized_step(const FrameSequence& seq);

}  // namespace eulerflow

#endif  // EULERFLOW_GEOM_HPP
