#ifndef EULERFLOW_SCENEGEN_HPP
#define EULERFLOW_SCENEGEN_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eulerflow/geom.hpp"

namespace eulerflow {

enum class SceneKind { Static, Translate, Orbit, Crossing, Occlusion };

std::string to_string(SceneKind kind);
SceneKind parse_scene_kind(std::string_view name);

struct SceneSpec {
  SceneKind kind = SceneKind::Translate;
  int num_frames = 20;
  int points_per_object = 128;
  int background_points = 256;
  double speed = 0.5;  // meters per frame
  double orbit_radius = 3.0;
  std::pair<int, int> occlusion_window{8, 11};
  double noise_sigma = 0.005;
  double frame_interval = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Motion { Static, Linear, Orbit };
enum class Shape { Box, Sphere };

/// One rigid object of a synthetic scene. Surface points are expressed in the
/// frame-0 pose.
struct SceneObject {
  int class_id = 0;
  bool background = false;
  Shape shape = Shape::Box;
  Point3 center = Point3::Zero();
  Point3 half_extent = Point3::Ones();  // sphere radius in x for Shape::Sphere
  Motion motion = Motion::Static;
  Point3 velocity = Point3::Zero();     // meters per frame, Motion::Linear
  Point3 orbit_center = Point3::Zero();
  double angular_speed = 0.0;           // radians per frame about +z, Motion::Orbit
  std::pair<int, int> hidden{-1, -2};   // inclusive frame range with no returns

  bool visible(int frame) const { return frame < hidden.first || frame > hidden.second; }
};

/// Objects of the scene, background first. Object ids index this list.
std::vector<SceneObject> scene_objects(const SceneSpec& spec);

/// Closed-form position at `frame` of the surface point whose frame-0
/// position is surface_point.
Point3 analytic_position(const SceneSpec& spec, int object_id, const Point3& surface_point,
                         int frame);

/// Freshly resampled surfaces every frame, analytic ground-truth flow,
/// per-object classes, Gaussian sensor noise on positions only.
FrameSequence generate(const SceneSpec& spec);

}  // namespace eulerflow

#endif  // EULERFLOW_SCENEGEN_HPP
