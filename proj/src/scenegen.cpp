#include "eulerflow/scenegen.hpp"

#include <array>
#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "eulerflow/eval.hpp"

namespace eulerflow {

namespace {

constexpr int kBackgroundClass = 0;
constexpr int kVehicleClass = 1;
constexpr int kSmallObjectClass = 2;

Point3 position_unchecked(const SceneObject& obj, const Point3& p, int frame) {
  switch (obj.motion) {
    case Motion::Static:
      return p;
    case Motion::Linear:
      return p + static_cast<double>(frame) * obj.velocity;
    case Motion::Orbit: {
      const Eigen::AngleAxisd rot(static_cast<double>(frame) * obj.angular_speed,
                                  Point3::UnitZ());
      return obj.orbit_center + rot * (p - obj.orbit_center);
    }
  }
  return p;
}

double box_area(const SceneObject& b) {
  const Point3 e = 2.0 * b.half_extent;
  return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
}

Point3 sample_box_surface(const SceneObject& b, std::mt19937_64& rng) {
  const Point3 e = 2.0 * b.half_extent;
  // Faces normal to x, y, z; each pair weighted by its area.
  const std::array<double, 3> areas{e.y() * e.z(), e.x() * e.z(), e.x() * e.y()};
  std::discrete_distribution<int> face(areas.begin(), areas.end());
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution side(0.5);
  const int axis = face(rng);
  Point3 local(unit(rng), unit(rng), unit(rng));
  local[axis] = side(rng) ? 1.0 : -1.0;
  return b.center + local.cwiseProduct(b.half_extent);
}

Point3 sample_sphere_surface(const SceneObject& s, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Point3 d;
  do {
    d = Point3(gauss(rng), gauss(rng), gauss(rng));
  } while (d.squaredNorm() < 1e-12);
  return s.center + s.half_extent.x() * d.normalized();
}

Point3 sample_surface(const SceneObject& obj, std::mt19937_64& rng) {
  return obj.shape == Shape::Box ? sample_box_surface(obj, rng) : sample_sphere_surface(obj, rng);
}

SceneObject static_box(Point3 center, Point3 half) {
  SceneObject o;
  o.class_id = kBackgroundClass;
  o.background = true;
  o.center = std::move(center);
  o.half_extent = std::move(half);
  return o;
}

SceneObject vehicle(Point3 center, Point3 half, Point3 velocity) {
  SceneObject o;
  o.class_id = kVehicleClass;
  o.center = std::move(center);
  o.half_extent = std::move(half);
  o.velocity = std::move(velocity);
  o.motion = o.velocity.isZero(0.0) ? Motion::Static : Motion::Linear;
  return o;
}

}  // namespace

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::Static: return "static";
    case SceneKind::Translate: return "translate";
    case SceneKind::Orbit: return "orbit";
    case SceneKind::Crossing: return "crossing";
    case SceneKind::Occlusion: return "occlusion";
  }
  return "unknown";
}

SceneKind parse_scene_kind(std::string_view name) {
  for (auto k : {SceneKind::Static, SceneKind::Translate, SceneKind::Orbit, SceneKind::Crossing,
                 SceneKind::Occlusion}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw Error("unknown scene kind '" + std::string(name) +
              "' (expected static, translate, orbit, crossing or occlusion)");
}

void SceneSpec::validate() const {
  if (num_frames < 2) {
    throw Error("scene: num_frames must be >= 2");
  }
  if (points_per_object < 1) {
    throw Error("scene: points_per_object must be >= 1");
  }
  if (background_points < 0) {
    throw Error("scene: background_points must be >= 0");
  }
  if (!(speed >= 0.0) || !std::isfinite(speed)) {
    throw Error("scene: speed must be >= 0");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error("scene: noise_sigma must be >= 0");
  }
  if (!(frame_interval > 0.0)) {
    throw Error("scene: frame_interval must be > 0");
  }
  if (kind == SceneKind::Orbit && !(orbit_radius > 0.0)) {
    throw Error("scene: orbit_radius must be > 0");
  }
  if (kind == SceneKind::Occlusion) {
    const auto [first, last] = occlusion_window;
    if (first < 1 || last < first || last >= num_frames - 1) {
      throw Error("scene: occlusion window must lie strictly inside the sequence");
    }
  }
}

std::vector<SceneObject> scene_objects(const SceneSpec& spec) {
  spec.validate();
  std::vector<SceneObject> objs;
  // Static surroundings: two parked crates, kept compact so the default point
  // budget samples them densely. Thin slabs let nearest neighbours jump
  // between opposite faces.
  objs.push_back(static_box({1.5, 2.5, 0.5}, {1.0, 0.5, 0.5}));
  objs.push_back(static_box({-2.0, -3.0, 0.5}, {0.75, 0.75, 0.5}));

  const double travel = spec.speed * static_cast<double>(spec.num_frames - 1);
  const Point3 car_half(1.0, 0.5, 0.5);
  switch (spec.kind) {
    case SceneKind::Static:
      objs.push_back(vehicle({0.0, 0.0, 0.5}, car_half, Point3::Zero()));
      break;
    case SceneKind::Translate:
      objs.push_back(vehicle({-travel / 2.0, 0.0, 0.5}, car_half, {spec.speed, 0.0, 0.0}));
      break;
    case SceneKind::Occlusion: {
      auto car = vehicle({-travel / 2.0, 0.0, 0.5}, car_half, {spec.speed, 0.0, 0.0});
      car.hidden = spec.occlusion_window;
      objs.push_back(car);
      break;
    }
    case SceneKind::Crossing: {
      objs.push_back(vehicle({-travel / 2.0, 0.8, 0.5}, car_half, {spec.speed, 0.0, 0.0}));
      objs.push_back(vehicle({travel / 2.0, -0.8, 0.5}, car_half, {-spec.speed, 0.0, 0.0}));
      break;
    }
    case SceneKind::Orbit: {
      SceneObject bird;
      bird.class_id = kSmallObjectClass;
      bird.shape = Shape::Sphere;
      bird.orbit_center = Point3(0.0, 0.0, 1.5);
      bird.center = bird.orbit_center + Point3(spec.orbit_radius, 0.0, 0.0);
      bird.half_extent = Point3::Constant(0.3);
      bird.motion = Motion::Orbit;
      bird.angular_speed = spec.speed / spec.orbit_radius;
      objs.push_back(bird);
      break;
    }
  }
  return objs;
}

Point3 analytic_position(const SceneSpec& spec, int object_id, const Point3& surface_point,
                         int frame) {
  const auto objs = scene_objects(spec);
  if (object_id < 0 || object_id >= static_cast<int>(objs.size())) {
    throw Error("analytic_position: unknown object " + std::to_string(object_id));
  }
  if (frame < 0 || frame >= spec.num_frames) {
    throw Error("analytic_position: frame " + std::to_string(frame) + " out of range");
  }
  return position_unchecked(objs[static_cast<std::size_t>(object_id)], surface_point, frame);
}

FrameSequence generate(const SceneSpec& spec) {
  const auto objs = scene_objects(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);

  std::vector<double> bg_areas;
  std::vector<std::size_t> bg_ids;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (objs[i].background) {
      bg_areas.push_back(box_area(objs[i]));
      bg_ids.push_back(i);
    }
  }
  std::discrete_distribution<std::size_t> pick_bg(bg_areas.begin(), bg_areas.end());

  FrameSequence seq;
  seq.frame_interval = spec.frame_interval;
  seq.frames.reserve(static_cast<std::size_t>(spec.num_frames));

  for (int frame = 0; frame < spec.num_frames; ++frame) {
    std::vector<Point3> pts;
    std::vector<Point3> flow;
    std::vector<int> cls;

    auto emit = [&](const SceneObject& obj, const Point3& canonical) {
      const Point3 here = position_unchecked(obj, canonical, frame);
      const Point3 next = position_unchecked(obj, canonical, frame + 1);
      pts.push_back(here);
      flow.push_back(next - here);
      cls.push_back(obj.class_id);
    };

    for (const auto& obj : objs) {
      if (obj.background || !obj.visible(frame)) {
        continue;
      }
      for (int i = 0; i < spec.points_per_object; ++i) {
        emit(obj, sample_surface(obj, rng));
      }
    }
    for (int i = 0; i < spec.background_points; ++i) {
      const auto& obj = objs[bg_ids[pick_bg(rng)]];
      emit(obj, sample_surface(obj, rng));
    }

    PointCloud cloud;
    const auto n = static_cast<Eigen::Index>(pts.size());
    cloud.points.resize(3, n);
    cloud.gt_flow = Points3(3, n);
    cloud.class_id = cls;
    cloud.is_dynamic = std::vector<bool>(pts.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto si = static_cast<std::size_t>(i);
      Point3 p = pts[si];
      if (spec.noise_sigma > 0.0) {
        p += Point3(noise(rng), noise(rng), noise(rng));
      }
      cloud.points.col(i) = p;
      cloud.gt_flow->col(i) = flow[si];
      (*cloud.is_dynamic)[si] = flow[si].norm() >= kDefaultDynamicThreshold;
    }
    cloud.frame_index = frame;
    cloud.timestamp = static_cast<double>(frame) * spec.frame_interval;
    seq.frames.push_back(std::move(cloud));
  }
  return seq;
}

}  // namespace eulerflow
