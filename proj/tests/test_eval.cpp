#include <random>

#include <gtest/gtest.h>

#include "eulerflow/eval.hpp"
#include "eulerflow/scenegen.hpp"
#include "test_support.hpp"

namespace eulerflow {
namespace {

using testing::random_points;

FlowVectors flow(const Points3& r, int source = 0) { return {r, source, source + 1}; }

TEST(EndpointErrors, PerfectPredictionIsZero) {
  std::mt19937_64 rng(1);
  const Points3 gt = random_points(rng, 20, 1.0);
  EXPECT_TRUE(endpoint_errors(flow(gt), flow(gt)).isZero(0.0));
}

TEST(EndpointErrors, ConstantOffset) {
  const Points3 gt = Points3::Zero(3, 7);
  Points3 pred = Points3::Zero(3, 7);
  pred.row(0).setConstant(0.1);
  const auto e = endpoint_errors(flow(pred), flow(gt));
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    EXPECT_DOUBLE_EQ(e[i], 0.1);
  }
}

TEST(EndpointErrors, MatchesDirectNorm) {
  std::mt19937_64 rng(2);
  const Points3 a = random_points(rng, 50, 2.0);
  const Points3 b = random_points(rng, 50, 2.0);
  const auto e = endpoint_errors(flow(a), flow(b));
  for (Eigen::Index i = 0; i < 50; ++i) {
    const double dx = a(0, i) - b(0, i);
    const double dy = a(1, i) - b(1, i);
    const double dz = a(2, i) - b(2, i);
    EXPECT_NEAR(e[i], std::sqrt(dx * dx + dy * dy + dz * dz), 1e-15);
  }
}

TEST(EndpointErrors, MismatchThrows) {
  EXPECT_THROW(endpoint_errors(flow(Points3::Zero(3, 2)), flow(Points3::Zero(3, 3))), Error);
  EXPECT_THROW(endpoint_errors(flow(Points3::Zero(3, 2), 0), flow(Points3::Zero(3, 2), 1)),
               Error);
}

TEST(AverageEpe, Examples) {
  EXPECT_EQ(average_epe(Eigen::Vector3d::Zero()), 0.0);
  EXPECT_DOUBLE_EQ(average_epe(Eigen::Vector2d(1.0, 3.0)), 2.0);
  EXPECT_THROW(average_epe(Eigen::VectorXd(0)), Error);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  Eigen::VectorXd v(101);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = u(rng);
    sum += v[i];
  }
  EXPECT_NEAR(average_epe(v), sum / 101.0, 1e-13);
}

TEST(DynamicNormalizedReport, SplitsStaticAndDynamic) {
  Points3 gt(3, 4);
  gt << 0.0, 0.01, 0.5, 1.0,
        0.0, 0.00, 0.0, 0.0,
        0.0, 0.00, 0.0, 0.0;
  Points3 pred = gt;
  pred(0, 0) += 0.02;  // static error 0.02
  pred(1, 2) += 0.1;   // class 1, speed 0.5, error 0.1
  pred(1, 3) += 0.4;   // class 2, speed 1.0, error 0.4
  const auto r = dynamic_normalized_report(flow(pred), flow(gt), {0, 0, 1, 2});
  EXPECT_EQ(r.static_count, 2u);
  EXPECT_EQ(r.dynamic_count, 2u);
  EXPECT_NEAR(r.static_epe, 0.01, 1e-15);
  EXPECT_NEAR(r.dynamic_epe, 0.25, 1e-15);
  EXPECT_NEAR(r.mean_epe, 0.13, 1e-15);
  EXPECT_NEAR(r.per_class_dynamic_normalized.at(1), 0.2, 1e-15);
  EXPECT_NEAR(r.per_class_dynamic_normalized.at(2), 0.4, 1e-15);
  ASSERT_TRUE(r.mean_dynamic_normalized.has_value());
  EXPECT_NEAR(*r.mean_dynamic_normalized, 0.3, 1e-15);
}

TEST(DynamicNormalizedReport, NoDynamicPointsMeansAbsent) {
  const Points3 gt = Points3::Zero(3, 5);
  const auto r = dynamic_normalized_report(flow(gt), flow(gt), std::vector<int>(5, 0));
  EXPECT_FALSE(r.mean_dynamic_normalized.has_value());
  EXPECT_EQ(r.dynamic_epe, 0.0);
  EXPECT_NE(format_report(r).find("mean_dynamic_normalized=absent"), std::string::npos);
}

TEST(DynamicNormalizedReport, TranslationInvariant) {
  std::mt19937_64 rng(4);
  const Points3 gt = random_points(rng, 40, 1.0);
  const Points3 pred = random_points(rng, 40, 1.0);
  std::vector<int> classes(40);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    classes[i] = static_cast<int>(i % 3);
  }
  const auto a = dynamic_normalized_report(flow(pred), flow(gt), classes);
  // Shifting both by the same vector leaves errors unchanged; speeds change,
  // so only the EPE fields are compared.
  const Point3 shift(5.0, -3.0, 2.0);
  const auto b = dynamic_normalized_report(flow(pred.colwise() + shift),
                                           flow(gt.colwise() + shift), classes);
  EXPECT_NEAR(a.mean_epe, b.mean_epe, 1e-13);
}

TEST(DynamicNormalizedReport, ScaleInvariantNormalizedMetric) {
  std::mt19937_64 rng(5);
  Points3 gt = random_points(rng, 30, 1.0);
  gt.row(0).array() += 2.0;  // every point dynamic
  const Points3 pred = gt + 0.1 * random_points(rng, 30, 1.0);
  const std::vector<int> classes(30, 1);
  const auto a = dynamic_normalized_report(flow(pred), flow(gt), classes);
  const auto b = dynamic_normalized_report(flow(Points3(3.0 * pred)), flow(Points3(3.0 * gt)),
                                           classes);
  EXPECT_NEAR(*a.mean_dynamic_normalized, *b.mean_dynamic_normalized, 1e-13);
  EXPECT_NEAR(3.0 * a.dynamic_epe, b.dynamic_epe, 1e-13);
}

TEST(EvaluateSequence, ZeroParamsOnStaticScene) {
  SceneSpec s;
  s.kind = SceneKind::Static;
  s.num_frames = 4;
  s.points_per_object = 32;
  s.background_points = 32;
  const auto seq = generate(s);
  const auto r = evaluate_sequence(PriorParams(2, 4), seq);
  EXPECT_EQ(r.mean_epe, 0.0);
  EXPECT_EQ(r.point_count, 3u * 64u);
  EXPECT_EQ(r.dynamic_count, 0u);
}

TEST(EvaluateSequence, PerfectFlowsAndDeterministicReport) {
  SceneSpec s;
  s.num_frames = 5;
  s.points_per_object = 32;
  s.background_points = 32;
  const auto seq = generate(s);
  std::vector<FlowVectors> perfect;
  for (int f = 0; f + 1 < 5; ++f) {
    perfect.push_back({*seq.frames[static_cast<std::size_t>(f)].gt_flow, f, f + 1});
  }
  const auto r = evaluate_flows(perfect, seq);
  EXPECT_EQ(r.mean_epe, 0.0);
  EXPECT_GT(r.dynamic_count, 0u);
  EXPECT_EQ(*r.mean_dynamic_normalized, 0.0);

  const auto p = init_params({2, 8, 3});
  EXPECT_EQ(format_report(evaluate_sequence(p, seq)), format_report(evaluate_sequence(p, seq)));

  perfect.pop_back();
  EXPECT_THROW(evaluate_flows(perfect, seq), Error);
}

TEST(EvaluateSequence, MissingGroundTruthThrows) {
  SceneSpec s;
  s.num_frames = 3;
  s.points_per_object = 8;
  s.background_points = 8;
  auto seq = generate(s);
  seq.frames[1].gt_flow.reset();
  EXPECT_THROW(evaluate_sequence(PriorParams(1, 2), seq), Error);
}

}  // namespace
}  // namespace eulerflow
