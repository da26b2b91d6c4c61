#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ips/geometry.hpp"
#include "support.hpp"

namespace ips {
namespace {

std::vector<RangeObservation> ranges_to(const Position2D& target, const std::vector<Position2D>& anchors) {
  std::vector<RangeObservation> obs;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    obs.push_back({Anchor{"a" + std::to_string(i), AnchorKind::kUwb, anchors[i]},
                   distance(target, anchors[i])});
  }
  return obs;
}

TEST(Trilaterate, RightTriangleAnchors) {
  const std::vector<RangeObservation> obs{
      {Anchor{"a", AnchorKind::kUwb, {0, 0}}, std::sqrt(2.0)},
      {Anchor{"b", AnchorKind::kUwb, {4, 0}}, std::sqrt(10.0)},
      {Anchor{"c", AnchorKind::kUwb, {0, 3}}, std::sqrt(5.0)}};
  const TrilatResult r = trilaterate(obs);
  EXPECT_NEAR(r.position.x, 1.0, 1e-9);
  EXPECT_NEAR(r.position.y, 1.0, 1e-9);
  EXPECT_EQ(r.used_anchors, 3u);
  EXPECT_LE(r.residual, 1e-9);
}

TEST(Trilaterate, TargetOnFirstAnchor) {
  const std::vector<RangeObservation> obs{{Anchor{"a", AnchorKind::kUwb, {0, 0}}, 0.0},
                                          {Anchor{"b", AnchorKind::kUwb, {1, 0}}, 1.0},
                                          {Anchor{"c", AnchorKind::kUwb, {0, 1}}, 1.0}};
  const TrilatResult r = trilaterate(obs);
  EXPECT_NEAR(r.position.x, 0.0, 1e-12);
  EXPECT_NEAR(r.position.y, 0.0, 1e-12);
}

TEST(Trilaterate, CollinearAnchorsRejected) {
  const auto obs = ranges_to({1, 1}, {{0, 0}, {1, 0}, {2, 0}});
  EXPECT_IPS_ERROR(trilaterate(obs), ErrorCode::kCollinearAnchors);
}

TEST(Trilaterate, TooFewAnchors) {
  const auto obs = ranges_to({1, 1}, {{0, 0}, {1, 0}});
  EXPECT_IPS_ERROR(trilaterate(obs), ErrorCode::kTooFewAnchors);
}

TEST(Trilaterate, InconsistentRangesLeaveResidual) {
  auto obs = ranges_to({2, 1}, {{0, 0}, {5, 0}, {0, 4}});
  obs[1].distance += 0.5;
  const TrilatResult r = trilaterate(obs);
  EXPECT_GT(r.residual, 1e-3);
}

TEST(Trilaterate, OverdeterminedExact) {
  const auto obs = ranges_to({3.2, 1.7}, {{0, 0}, {8, 0}, {8, 6}, {0, 6}, {4, 3}});
  const TrilatResult r = trilaterate(obs);
  EXPECT_NEAR(r.position.x, 3.2, 1e-9);
  EXPECT_NEAR(r.position.y, 1.7, 1e-9);
  EXPECT_EQ(r.used_anchors, 5u);
}

// Random anchor triangles with a minimum area keep the system well posed.
struct Case {
  std::vector<Position2D> anchors;
  Position2D target;
};

Case random_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  while (true) {
    Case c{{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}}, {u(rng), u(rng)}};
    const auto& a = c.anchors;
    const double area = std::abs((a[1].x - a[0].x) * (a[2].y - a[0].y) -
                                 (a[2].x - a[0].x) * (a[1].y - a[0].y)) / 2.0;
    if (area > 1.0) return c;
  }
}

TEST(TrilaterateProperty, ExactRecoveryOnRandomCases) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Case c = random_case(rng);
    const TrilatResult r = trilaterate(ranges_to(c.target, c.anchors));
    EXPECT_LE(distance(r.position, c.target), 1e-7) << "case " << i;
    EXPECT_LE(r.residual, 1e-9) << "case " << i;
  }
}

TEST(TrilaterateProperty, TranslationEquivariance) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int i = 0; i < 100; ++i) {
    const Case c = random_case(rng);
    const Position2D v{shift(rng), shift(rng)};
    std::vector<Position2D> moved;
    for (const Position2D& a : c.anchors) moved.push_back({a.x + v.x, a.y + v.y});
    // The same (noisy) distances against shifted anchors.
    auto obs = ranges_to(c.target, c.anchors);
    for (auto& o : obs) o.distance *= 1.02;
    auto obs_moved = obs;
    for (std::size_t k = 0; k < obs.size(); ++k) obs_moved[k].anchor.position = moved[k];
    const Position2D p = trilaterate(obs).position;
    const Position2D q = trilaterate(obs_moved).position;
    EXPECT_NEAR(q.x, p.x + v.x, 1e-9);
    EXPECT_NEAR(q.y, p.y + v.y, 1e-9);
  }
}

TEST(Degenerate, SingleAnchor) {
  const std::vector<RangeObservation> obs{{Anchor{"a", AnchorKind::kUwb, {2, 2}}, 5.0}};
  const TrilatResult r = degenerate_estimate(obs);
  EXPECT_EQ(r.position, (Position2D{2, 2}));
  EXPECT_EQ(r.used_anchors, 1u);
  EXPECT_DOUBLE_EQ(r.residual, 5.0);
}

TEST(Degenerate, TwoAnchorsMidpoint) {
  const auto obs = ranges_to({2, 1}, {{0, 0}, {4, 0}});
  const TrilatResult r = degenerate_estimate(obs);
  EXPECT_EQ(r.position, (Position2D{2, 0}));
  EXPECT_EQ(r.used_anchors, 2u);
}

TEST(Degenerate, EmptyRejected) {
  EXPECT_IPS_ERROR(degenerate_estimate({}), ErrorCode::kEmptyObservations);
  EXPECT_IPS_ERROR(localize({}), ErrorCode::kEmptyObservations);
}

TEST(Localize, DispatchesOnAnchorCount) {
  EXPECT_EQ(localize(ranges_to({1, 1}, {{0, 0}, {4, 0}})).used_anchors, 2u);
  const TrilatResult full = localize(ranges_to({1, 1}, {{0, 0}, {4, 0}, {0, 3}}));
  EXPECT_EQ(full.used_anchors, 3u);
  EXPECT_NEAR(full.position.x, 1.0, 1e-9);
  // Collinear sets fall back to the centroid.
  const TrilatResult line = localize(ranges_to({1, 1}, {{0, 0}, {1, 0}, {2, 0}}));
  EXPECT_EQ(line.position, (Position2D{1, 0}));
}

TEST(SensorPose, ZeroOffsetIsIdentity) {
  const Position2D p = translate_sensor_pose({1.5, -2.0, 0.7}, {0.0, 0.0, 0.0});
  EXPECT_EQ(p, (Position2D{1.5, -2.0}));
}

TEST(SensorPose, QuarterTurnHeading) {
  const Position2D p = translate_sensor_pose({2.0, 1.0, kPi / 2.0}, {0.1, 0.0, 0.0});
  EXPECT_NEAR(p.x, 2.0, 1e-12);
  EXPECT_NEAR(p.y, 1.1, 1e-12);
}

TEST(SensorPose, MountingBearingAddsToHeading) {
  // r = 0.2 and phi_off = pi/2: the lever arm points along +y for heading 0.
  const SensorOffset off{0.0, 0.2, kPi / 2.0};
  const Position2D a = translate_sensor_pose({0.0, 0.0, 0.0}, off);
  EXPECT_NEAR(a.x, 0.0, 1e-12);
  EXPECT_NEAR(a.y, 0.2, 1e-12);
  // Combined angle pi: heading pi/2 plus bearing pi/2.
  const Position2D b = translate_sensor_pose({0.0, 0.0, kPi / 2.0}, off);
  EXPECT_NEAR(b.x, -0.2, 1e-12);
  EXPECT_NEAR(b.y, 0.0, 1e-12);
}

TEST(SensorPose, FullTurnTracesCircle) {
  const SensorOffset off{0.12, -0.05, 0.3};
  const double r = std::hypot(off.x_off, off.y_off);
  const Pose slam{3.0, 4.0, 0.0};
  double worst = 0.0;
  for (int i = 0; i < 360; ++i) {
    const Pose p{slam.x, slam.y, normalize_angle(2.0 * kPi * i / 360.0)};
    const Position2D s = translate_sensor_pose(p, off);
    worst = std::max(worst, std::abs(distance(s, slam.position()) - r));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(PathLoss, ReferencePoint) {
  EXPECT_DOUBLE_EQ(rssi_to_distance(-40.0, -40.0, 1.0, 2.2, 0.0), 1.0);
}

TEST(PathLoss, ClosedForm) {
  EXPECT_NEAR(rssi_to_distance(-60.0, -40.0, 1.0, 2.0, 0.0), 10.0, 1e-12);
}

TEST(PathLoss, BetaShiftIdentity) {
  EXPECT_NEAR(rssi_to_distance(-80.0, -40.0, 1.0, 2.0, 20.0), 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(rssi_to_distance(-80.0, -40.0, 1.0, 2.0, 20.0),
                   rssi_to_distance(-60.0, -40.0, 1.0, 2.0, 0.0));
}

TEST(PathLoss, MonotoneDecreasing) {
  const PathLossModel m;
  double prev = std::numeric_limits<double>::infinity();
  for (double rssi = -100.0; rssi <= -20.0; rssi += 0.5) {
    const double d = rssi_to_distance(rssi, m);
    EXPECT_LT(d, prev);
    EXPECT_TRUE(std::isfinite(d));
    prev = d;
  }
}

}  // namespace
}  // namespace ips
