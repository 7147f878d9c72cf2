#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "eulerflow/scenegen.hpp"

namespace eulerflow {
namespace {

SceneSpec spec_of(SceneKind kind, double noise = 0.0) {
  SceneSpec s;
  s.kind = kind;
  s.num_frames = 12;
  s.points_per_object = 40;
  s.background_points = 60;
  s.noise_sigma = noise;
  s.seed = 7;
  return s;
}

int moving_object(const SceneSpec& s) {
  const auto objs = scene_objects(s);
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (!objs[i].background) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

TEST(SceneKind, NamesRoundTrip) {
  for (auto k : {SceneKind::Static, SceneKind::Translate, SceneKind::Orbit, SceneKind::Crossing,
                 SceneKind::Occlusion}) {
    EXPECT_EQ(parse_scene_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_scene_kind("spiral"), Error);
}

TEST(SceneSpec, RejectsInvalid) {
  SceneSpec s;
  s.num_frames = 1;
  EXPECT_THROW(generate(s), Error);
  s = {};
  s.speed = -1.0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.noise_sigma = -0.1;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.kind = SceneKind::Occlusion;
  s.occlusion_window = {0, 3};
  EXPECT_THROW(s.validate(), Error);
}

TEST(Generate, StaticSceneHasZeroFlow) {
  const auto seq = generate(spec_of(SceneKind::Static, 0.01));
  for (const auto& f : seq.frames) {
    EXPECT_TRUE(f.gt_flow->isZero(0.0));
    for (const bool d : *f.is_dynamic) {
      EXPECT_FALSE(d);
    }
  }
}

TEST(Generate, TranslateFlowIsConstant) {
  const auto seq = generate(spec_of(SceneKind::Translate, 0.01));
  EXPECT_NO_THROW(seq.validate());
  ASSERT_EQ(seq.frames.size(), 12u);
  for (const auto& f : seq.frames) {
    ASSERT_EQ(f.size(), 100);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const auto cls = (*f.class_id)[static_cast<std::size_t>(i)];
      const Point3 expect = cls == 1 ? Point3(0.5, 0.0, 0.0) : Point3::Zero();
      EXPECT_LT((f.gt_flow->col(i) - expect).norm(), 1e-12);
      EXPECT_EQ((*f.is_dynamic)[static_cast<std::size_t>(i)], cls == 1);
    }
  }
}

TEST(Generate, TimestampsFollowInterval) {
  auto s = spec_of(SceneKind::Translate);
  s.frame_interval = 0.05;
  const auto seq = generate(s);
  EXPECT_DOUBLE_EQ(seq.frame_interval, 0.05);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    EXPECT_EQ(seq.frames[i].frame_index, static_cast<int>(i));
    EXPECT_DOUBLE_EQ(seq.frames[i].timestamp, 0.05 * static_cast<double>(i));
  }
}

TEST(Generate, OrbitFlowIsRotationIncrement) {
  const auto s = spec_of(SceneKind::Orbit);
  const auto seq = generate(s);
  const double w = s.speed / s.orbit_radius;
  const Point3 c(0.0, 0.0, 1.5);
  int checked = 0;
  for (const auto& f : seq.frames) {
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      if ((*f.class_id)[static_cast<std::size_t>(i)] != 2) {
        continue;
      }
      const Point3 r = f.points.col(i) - c;
      const Point3 rotated(std::cos(w) * r.x() - std::sin(w) * r.y(),
                           std::sin(w) * r.x() + std::cos(w) * r.y(), r.z());
      EXPECT_LT((f.gt_flow->col(i) - (rotated - r)).norm(), 1e-12);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 12 * 40);
}

TEST(Generate, FlowIsAnalyticPositionDifference) {
  for (auto kind : {SceneKind::Translate, SceneKind::Orbit, SceneKind::Crossing}) {
    const auto s = spec_of(kind);
    const int id = moving_object(s);
    const auto seq = generate(s);
    // With zero noise a frame-k point maps back to its canonical position by
    // inverting the object's motion; differentiate the analytic trajectory.
    const auto obj = scene_objects(s)[static_cast<std::size_t>(id)];
    const auto& f = seq.frames[3];
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      if ((*f.class_id)[static_cast<std::size_t>(i)] != obj.class_id) {
        continue;
      }
      Point3 canonical = f.points.col(i);
      if (obj.motion == Motion::Linear) {
        canonical -= 3.0 * obj.velocity;
      } else {
        const Eigen::AngleAxisd back(-3.0 * obj.angular_speed, Point3::UnitZ());
        canonical = obj.orbit_center + back * (canonical - obj.orbit_center);
      }
      const Point3 p3 = analytic_position(s, id, canonical, 3);
      const Point3 p4 = analytic_position(s, id, canonical, 4);
      EXPECT_LT((p3 - f.points.col(i)).norm(), 1e-12);
      if (kind != SceneKind::Crossing) {
        EXPECT_LT((f.gt_flow->col(i) - (p4 - p3)).norm(), 1e-12);
      }
      break;
    }
  }
}

TEST(AnalyticPosition, Examples) {
  const auto s = spec_of(SceneKind::Translate);
  const int id = moving_object(s);
  const Point3 q(0.1, 0.2, 0.3);
  EXPECT_EQ(analytic_position(s, id, q, 0), q);
  EXPECT_TRUE(analytic_position(s, id, q, 5).isApprox(q + Point3(2.5, 0.0, 0.0), 1e-15));
  EXPECT_EQ(analytic_position(s, 0, q, 5), q);  // background
  EXPECT_THROW(analytic_position(s, id, q, 12), Error);
  EXPECT_THROW(analytic_position(s, id, q, -1), Error);
  EXPECT_THROW(analytic_position(s, 99, q, 0), Error);
}

TEST(AnalyticPosition, OrbitMatchesRotationMatrix) {
  const auto s = spec_of(SceneKind::Orbit);
  const int id = moving_object(s);
  const double w = s.speed / s.orbit_radius;
  const Point3 c(0.0, 0.0, 1.5);
  const Point3 q = c + Point3(3.0, 0.2, 0.1);
  for (int k = 0; k < s.num_frames; ++k) {
    Eigen::Matrix3d r;
    r << std::cos(k * w), -std::sin(k * w), 0,
         std::sin(k * w), std::cos(k * w), 0,
         0, 0, 1;
    EXPECT_LT((analytic_position(s, id, q, k) - (c + r * (q - c))).norm(), 1e-12) << k;
  }
}

TEST(Generate, ResamplesEveryFrame) {
  const auto s = spec_of(SceneKind::Translate);
  const auto seq = generate(s);
  for (std::size_t f = 0; f + 1 < seq.frames.size(); ++f) {
    const auto& a = seq.frames[f];
    const auto& b = seq.frames[f + 1];
    // Undo the motion; identical samples would coincide exactly.
    Points3 back = b.points;
    for (Eigen::Index i = 0; i < back.cols(); ++i) {
      if ((*b.class_id)[static_cast<std::size_t>(i)] == 1) {
        back(0, i) -= 0.5;
      }
    }
    EXPECT_FALSE(back.isApprox(a.points, 0.0));
    EXPECT_FALSE(b.points.isApprox(a.points, 0.0));
  }
}

TEST(Generate, DeterministicGivenSeed) {
  const auto s = spec_of(SceneKind::Crossing, 0.005);
  const auto a = generate(s);
  const auto b = generate(s);
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    EXPECT_TRUE((a.frames[f].points.array() == b.frames[f].points.array()).all());
    EXPECT_EQ(*a.frames[f].class_id, *b.frames[f].class_id);
  }
  auto other = s;
  other.seed = 8;
  EXPECT_FALSE(generate(other).frames[0].points.isApprox(a.frames[0].points, 0.0));
}

TEST(Generate, OcclusionHidesObjectInWindow) {
  auto s = spec_of(SceneKind::Occlusion);
  s.occlusion_window = {4, 6};
  const auto seq = generate(s);
  for (const auto& f : seq.frames) {
    const auto vehicles =
        std::count(f.class_id->begin(), f.class_id->end(), 1);
    const bool hidden = f.frame_index >= 4 && f.frame_index <= 6;
    EXPECT_EQ(vehicles, hidden ? 0 : 40) << f.frame_index;
    EXPECT_EQ(f.size(), hidden ? 60 : 100);
  }
}

TEST(Generate, CrossingCarsMoveOppositeWays) {
  const auto seq = generate(spec_of(SceneKind::Crossing));
  const auto& f = seq.frames[0];
  int plus = 0;
  int minus = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double fx = (*f.gt_flow)(0, i);
    plus += fx > 0.4;
    minus += fx < -0.4;
  }
  EXPECT_EQ(plus, 40);
  EXPECT_EQ(minus, 40);
}

}  // namespace
}  // namespace eulerflow
