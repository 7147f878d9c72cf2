#include <random>

#include <gtest/gtest.h>

#include "eulerflow/geom.hpp"

namespace eulerflow {
namespace {

Points3 random_points(std::mt19937_64& rng, Eigen::Index n, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  Points3 p(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.col(i) = Point3(u(rng), u(rng), u(rng));
  }
  return p;
}

FrameSequence empty_sequence(int frames) {
  FrameSequence seq;
  seq.frame_interval = 0.1;
  for (int i = 0; i < frames; ++i) {
    PointCloud c;
    c.points = Points3::Zero(3, 1);
    c.frame_index = i;
    c.timestamp = 0.1 * i;
    seq.frames.push_back(c);
  }
  return seq;
}

TEST(NearestIndex, EmptyCloudIsRejected) {
  PointCloud empty;
  try {
    build_index(empty);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("empty point set"), std::string::npos);
  }
}

TEST(NearestIndex, SinglePointIsOneLeaf) {
  Points3 p = Points3::Zero(3, 1);
  const auto index = build_index(p);
  EXPECT_EQ(index.leaf_count(), 1u);
  const auto r = nearest(index, Point3(1, 2, 3));
  EXPECT_EQ(r.index, 0);
  EXPECT_DOUBLE_EQ(r.squared_distance, 14.0);
}

TEST(NearestIndex, TwoPointExample) {
  Points3 p(3, 2);
  p << 0, 2, 0, 0, 0, 0;
  const auto r = nearest(build_index(p), Point3(0.4, 0, 0));
  EXPECT_EQ(r.index, 0);
  EXPECT_NEAR(r.squared_distance, 0.16, 1e-15);
}

TEST(NearestIndex, QueryOnIndexedPointHasZeroDistance) {
  std::mt19937_64 rng(3);
  const Points3 p = random_points(rng, 50, 5.0);
  const auto index = build_index(p);
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    const auto r = index.nearest(p.col(i));
    EXPECT_EQ(r.squared_distance, 0.0);
    EXPECT_EQ(r.index, i);
  }
}

TEST(NearestIndex, DuplicatesResolveToLowestIndex) {
  Points3 p = Points3::Ones(3, 3);
  EXPECT_EQ(nearest(build_index(p), Point3(1, 1, 1)).index, 0);
  EXPECT_EQ(nearest(build_index(p), Point3(5, -2, 0)).index, 0);

  // Many duplicates spread over several leaves.
  Points3 many = Points3::Constant(3, 100, 2.0);
  EXPECT_EQ(nearest(build_index(many), Point3(0, 0, 0)).index, 0);
}

TEST(NearestIndex, EquidistantTieBreaksLow) {
  Points3 p(3, 4);
  p << 1, -1, 0, 0,
       0, 0, 1, -1,
       0, 0, 0, 0;
  // All four are at distance 1 from the origin.
  EXPECT_EQ(nearest(build_index(p), Point3::Zero()).index, 0);
  EXPECT_EQ(nearest_bruteforce(p, Point3::Zero()).index, 0);
}

TEST(NearestIndex, NonFiniteQueryIsRejected) {
  const auto index = build_index(Points3(Points3::Zero(3, 2)));
  EXPECT_THROW(index.nearest(Point3(std::nan(""), 0, 0)), Error);
  EXPECT_THROW(nearest_bruteforce(Points3(Points3::Zero(3, 2)),
                                  Point3(std::numeric_limits<double>::infinity(), 0, 0)),
               Error);
}

TEST(NearestIndex, MatchesBruteForceOn200Points) {
  std::mt19937_64 rng(11);
  const Points3 p = random_points(rng, 200, 10.0);
  const auto index = build_index(p);
  const Points3 q = random_points(rng, 1000, 12.0);
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const auto a = index.nearest(q.col(i));
    const auto b = nearest_bruteforce(p, q.col(i));
    ASSERT_EQ(a.index, b.index);
    ASSERT_EQ(a.squared_distance, b.squared_distance);
  }
}

// Property: random clouds of size 1-500, including quantized coordinates that
// force exact ties, agree with the brute-force scan on 10^4 queries overall.
TEST(NearestIndex, PropertyAgreesWithBruteForce) {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<Eigen::Index> size(1, 500);
  int queries = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Points3 p = random_points(rng, size(rng), 4.0);
    if (trial % 2 == 1) {
      p = p.array().round();  // lattice points: many exact ties
    }
    const auto index = build_index(p);
    Points3 q = random_points(rng, 200, 5.0);
    if (trial % 2 == 1) {
      q = (2.0 * q.array()).round() / 2.0;
    }
    for (Eigen::Index i = 0; i < q.cols(); ++i, ++queries) {
      const auto a = index.nearest(q.col(i));
      const auto b = nearest_bruteforce(p, q.col(i));
      ASSERT_EQ(a.index, b.index) << "trial " << trial;
      ASSERT_EQ(a.squared_distance, b.squared_distance);
    }
  }
  EXPECT_EQ(queries, 10000);
}

TEST(NearestIndex, ConstructionIsDeterministic) {
  std::mt19937_64 rng(5);
  const Points3 p = random_points(rng, 300, 3.0);
  const auto a = build_index(p);
  const auto b = build_index(p);
  EXPECT_EQ(a.leaf_count(), b.leaf_count());
  const Points3 q = random_points(rng, 100, 3.0);
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    EXPECT_EQ(a.nearest(q.col(i)).index, b.nearest(q.col(i)).index);
  }
}

TEST(NormalizedTime, EndpointsAndMidpoint) {
  const auto seq = empty_sequence(11);  // N = 10
  EXPECT_EQ(normalized_time(seq, 0), -1.0);
  EXPECT_EQ(normalized_time(seq, 10), 1.0);
  EXPECT_EQ(normalized_time(seq, 5), 0.0);
  EXPECT_DOUBLE_EQ(normalized_step(seq), 0.2);
}

TEST(NormalizedTime, OutOfRangeThrows) {
  const auto seq = empty_sequence(11);
  EXPECT_THROW(normalized_time(seq, -1), Error);
  EXPECT_THROW(normalized_time(seq, 11), Error);
}

TEST(NormalizedTime, AffineAndStrictlyIncreasing) {
  for (int frames : {2, 3, 7, 20, 151}) {
    const auto seq = empty_sequence(frames);
    const int last = frames - 1;
    EXPECT_EQ(normalized_time(seq, 0), -1.0);
    EXPECT_EQ(normalized_time(seq, last), 1.0);
    for (int i = 1; i <= last; ++i) {
      const double step = normalized_time(seq, i) - normalized_time(seq, i - 1);
      EXPECT_GT(step, 0.0);
      EXPECT_NEAR(step, 2.0 / last, 1e-12);
    }
  }
}

TEST(FrameSequence, ValidationCatchesBadInput) {
  auto seq = empty_sequence(3);
  EXPECT_NO_THROW(seq.validate());

  auto one = empty_sequence(1);
  EXPECT_THROW(one.validate(), Error);

  auto gap = empty_sequence(3);
  gap.frames[2].timestamp = 0.35;
  EXPECT_THROW(gap.validate(), Error);

  auto order = empty_sequence(3);
  order.frames[1].frame_index = 2;
  EXPECT_THROW(order.validate(), Error);

  auto channels = empty_sequence(3);
  channels.frames[0].class_id = std::vector<int>{1, 2};
  EXPECT_THROW(channels.validate(), Error);

  auto nan = empty_sequence(3);
  nan.frames[1].points(0, 0) = std::nan("");
  EXPECT_THROW(nan.validate(), Error);
}

}  // namespace
}  // namespace eulerflow
