#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "ips/ingest.hpp"
#include "ips/simulator.hpp"
#include "support.hpp"

namespace ips {
namespace {

Record gt_at(double t, double x, double y, double phi) {
  return {t, SensorKind::kGt, "robot", GtPayload{x, y, phi}};
}

Record uwb_at(double t, const std::string& anchor, double range) {
  return {t, SensorKind::kUwb, "uwb-tag", UwbPayload{anchor, range, -70.0}};
}

FeatureLayout small_layout() { return FeatureLayout({"u0", "u1", "u2"}, {"w00", "w01"}, 4); }

std::vector<Record> only(const std::vector<Record>& records, SensorKind kind) {
  std::vector<Record> out;
  for (const Record& r : records) {
    if (r.sensor == kind) out.push_back(r);
  }
  return out;
}

TEST(ClockCorrection, IdentityAndShift) {
  const std::vector<Record> in{uwb_at(1.0, "u0", 1.0), uwb_at(2.5, "u1", 2.0)};
  EXPECT_EQ(correct_clock(in, {}), in);
  const auto shifted = correct_clock(in, {1e-3, 0.0});
  EXPECT_DOUBLE_EQ(shifted[0].t, 1.0 - 1e-3);
  EXPECT_DOUBLE_EQ(shifted[1].t, 2.5 - 1e-3);
}

TEST(ClockCorrection, RecoversEmissionTimes) {
  const auto s = test::simulate(21, 30.0);
  const auto uwb = correct_clock(only(s.records, SensorKind::kUwb), s.config.clocks.uwb);
  std::vector<double> stamps;
  for (const Record& r : uwb) {
    if (stamps.empty() || std::abs(stamps.back() - r.t) > 1e-12) stamps.push_back(r.t);
  }
  const auto truth = emission_times(s.config.rates.uwb, s.config.duration_s);
  // Dropout can hide a whole emission, so match each stamp to its grid slot.
  for (double t : stamps) {
    const double k = std::round(t * s.config.rates.uwb);
    EXPECT_NEAR(t, truth.at(static_cast<std::size_t>(k) - 1), 1e-9);
  }
}

std::vector<Record> sensor_stream(double offset, double drift, double rate, double duration) {
  std::vector<Record> out;
  for (double t : emission_times(rate, duration)) {
    out.push_back(uwb_at(t * (1.0 + drift) + offset, "u0", 1.0));
  }
  return out;
}

std::vector<Record> gt_stream(double duration) {
  std::vector<Record> out;
  for (double t : emission_times(5.0, duration)) out.push_back(gt_at(t, 0, 0, 0));
  out.insert(out.begin(), gt_at(0.0, 0, 0, 0));
  return out;
}

TEST(ClockEstimate, FiveMillisecondOffset) {
  const ClockModel c = estimate_clock_offset(sensor_stream(5e-3, 0.0, 9.0, 60.0), gt_stream(60.0), 9.0);
  EXPECT_NEAR(c.offset, 5e-3, 1e-3);
  EXPECT_NEAR(c.drift, 0.0, 1e-6);
}

TEST(ClockEstimate, ZeroOffset) {
  const ClockModel c = estimate_clock_offset(sensor_stream(0.0, 0.0, 9.0, 60.0), gt_stream(60.0), 9.0);
  EXPECT_NEAR(c.offset, 0.0, 1e-3);
}

TEST(ClockEstimate, WithDrift) {
  const ClockModel c =
      estimate_clock_offset(sensor_stream(-2e-3, 5e-5, 7.5, 120.0), gt_stream(120.0), 7.5);
  EXPECT_NEAR(c.offset, -2e-3, 1e-6);
  EXPECT_NEAR(c.drift, 5e-5, 1e-9);
}

TEST(ClockEstimate, ShortOverlapRejected) {
  EXPECT_IPS_ERROR(estimate_clock_offset(sensor_stream(0.0, 0.0, 9.0, 2.0), gt_stream(2.0), 9.0),
                   ErrorCode::kInsufficientOverlap);
}

TEST(ClockEstimate, SurvivesGaps) {
  auto stream = sensor_stream(3e-3, 0.0, 9.0, 60.0);
  // Drop every third emission.
  std::vector<Record> gappy;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (i % 3 != 1) gappy.push_back(stream[i]);
  }
  EXPECT_NEAR(estimate_clock_offset(gappy, gt_stream(60.0), 9.0).offset, 3e-3, 1e-9);
}

TEST(Interpolate, ExactKnotAndMidpoint) {
  const std::vector<TimedPose> gt{{0.0, {0, 0, 0}}, {1.0, {1, 0, 0}}};
  EXPECT_EQ(*interpolate_pose(gt, 0.0), (Pose{0, 0, 0}));
  const Pose mid = *interpolate_pose(gt, 0.5);
  EXPECT_DOUBLE_EQ(mid.x, 0.5);
  EXPECT_DOUBLE_EQ(mid.y, 0.0);
  EXPECT_FALSE(interpolate_pose(gt, 1.5).has_value());
  EXPECT_FALSE(interpolate_pose(gt, -0.1).has_value());
}

TEST(Interpolate, HeadingTakesShortestArc) {
  const std::vector<TimedPose> gt{{0.0, {0, 0, 3.0}}, {1.0, {0, 0, -3.0}}};
  const Pose mid = *interpolate_pose(gt, 0.5);
  EXPECT_NEAR(std::abs(mid.phi), kPi, 1e-12);
}

TEST(Labeling, RecordOnKnotGetsKnotPosition) {
  const std::vector<TimedPose> gt{{0.0, {1, 2, 0}}, {0.2, {1.04, 2, 0}}};
  const std::vector<Record> recs{uwb_at(0.0, "u1", 3.0)};
  const LabelingResult r = label_with_groundtruth(recs, gt, SensorOffset{}, small_layout());
  ASSERT_EQ(r.stream.samples.size(), 1u);
  EXPECT_EQ(r.stream.samples[0].label, (Position2D{1, 2}));
  EXPECT_EQ(r.stream.samples[0].features, (std::vector<double>{0.0, 3.0, 0.0}));
  EXPECT_EQ(r.stream.samples[0].anchors_present, (std::vector<bool>{false, true, false}));
}

TEST(Labeling, GroupsSameTimestampAndCountsDrops) {
  const std::vector<TimedPose> gt{{0.0, {0, 0, 0}}, {1.0, {1, 0, 0}}};
  const std::vector<Record> recs{uwb_at(0.5, "u0", 1.0), uwb_at(0.5, "u2", 2.0),
                                 uwb_at(0.7, "u1", 1.5), uwb_at(1.5, "u0", 1.0),
                                 uwb_at(1.5, "u1", 1.0)};
  const LabelingResult r = label_with_groundtruth(recs, gt, SensorOffset{}, small_layout());
  ASSERT_EQ(r.stream.samples.size(), 2u);
  EXPECT_EQ(r.labeled_records, 3u);
  EXPECT_EQ(r.dropped_records, 2u);
  EXPECT_EQ(r.labeled_records + r.dropped_records, recs.size());
  EXPECT_EQ(r.stream.samples[0].features, (std::vector<double>{1.0, kMissingRange, 2.0}));
  EXPECT_DOUBLE_EQ(r.stream.samples[1].label.x, 0.7);
}

TEST(Labeling, AppliesSensorOffset) {
  const std::vector<TimedPose> gt{{0.0, {2, 1, kPi / 2}}, {1.0, {2, 1, kPi / 2}}};
  const std::vector<Record> recs{uwb_at(0.5, "u0", 1.0)};
  const auto r = label_with_groundtruth(recs, gt, SensorOffset{0.1, 0.0, 0.0}, small_layout());
  EXPECT_NEAR(r.stream.samples[0].label.x, 2.0, 1e-12);
  EXPECT_NEAR(r.stream.samples[0].label.y, 1.1, 1e-12);
}

TEST(Labeling, Errors) {
  const std::vector<TimedPose> gt{{0.0, {0, 0, 0}}, {1.0, {1, 0, 0}}};
  EXPECT_IPS_ERROR(label_with_groundtruth(std::vector<Record>{uwb_at(0.5, "u0", 1.0)}, {},
                                          SensorOffset{}, small_layout()),
                   ErrorCode::kEmptyGroundTruth);
  const std::vector<Record> mixed{uwb_at(0.5, "u0", 1.0),
                                  {0.6, SensorKind::kRssi, "esp-rx", RssiPayload{"w00", -50}}};
  EXPECT_IPS_ERROR(label_with_groundtruth(mixed, gt, SensorOffset{}, small_layout()),
                   ErrorCode::kSchemaViolation);
  const std::vector<Record> stranger{uwb_at(0.5, "u9", 1.0)};
  EXPECT_IPS_ERROR(label_with_groundtruth(stranger, gt, SensorOffset{}, small_layout()),
                   ErrorCode::kSchemaViolation);
}

TEST(Labeling, RssiAndCsiFillValues) {
  const std::vector<TimedPose> gt{{0.0, {0, 0, 0}}, {1.0, {1, 0, 0}}};
  const FeatureLayout layout = small_layout();
  const std::vector<Record> rssi{{0.5, SensorKind::kRssi, "esp-rx", RssiPayload{"w01", -55.0}}};
  const auto r = label_with_groundtruth(rssi, gt, SensorOffset{}, layout);
  EXPECT_EQ(r.stream.samples[0].features, (std::vector<double>{kRssiFloorDbm, -55.0}));
  const std::vector<Record> csi{{0.5, SensorKind::kCsi, "esp-rx",
                                 CsiPayload{"w01", {1, 2, 3, 4}, {0.1, 0.2, 0.3, 0.4}}}};
  const auto c = label_with_groundtruth(csi, gt, SensorOffset{}, layout);
  EXPECT_EQ(c.stream.samples[0].features,
            (std::vector<double>{0, 0, 0, 0, 1, 2, 3, 4, 0, 0, 0, 0, 0.1, 0.2, 0.3, 0.4}));
}

TEST(Labeling, NoiselessClosure) {
  const auto s = test::simulate(17, 60.0, true);
  const auto gt = groundtruth_from_records(s.records);
  const FeatureLayout layout = FeatureLayout::from_scenario(s.scenario);
  const std::pair<SensorKind, std::pair<ClockModel, SensorOffset>> cases[] = {
      {SensorKind::kUwb, {s.config.clocks.uwb, s.scenario.sensor_offsets.uwb}},
      {SensorKind::kCsi, {s.config.clocks.wifi, s.scenario.sensor_offsets.wifi}},
      {SensorKind::kImu, {s.config.clocks.imu, s.scenario.sensor_offsets.imu}}};
  for (const auto& [kind, cfg] : cases) {
    const auto recs = correct_clock(only(s.records, kind), cfg.first);
    const auto r = label_with_groundtruth(recs, gt, cfg.second, layout);
    ASSERT_FALSE(r.stream.samples.empty());
    for (const LabeledSample& sample : r.stream.samples) {
      const Position2D truth = true_sensor_position(s.trajectory, cfg.second, sample.t_ref);
      EXPECT_LE(distance(sample.label, truth), 1e-6);
      EXPECT_TRUE(s.scenario.bounds.contains(sample.label));
    }
  }
}

TEST(Layout, BlocksAndDescribe) {
  const FeatureLayout l = small_layout();
  EXPECT_EQ(l.dimension(), 2u * 2 * 4 + 2 + 3 + 9);
  EXPECT_EQ(l.block_offset(Block::kCsiMagnitude), 0u);
  EXPECT_EQ(l.block_offset(Block::kCsiPhase), 8u);
  EXPECT_EQ(l.block_offset(Block::kRssi), 16u);
  EXPECT_EQ(l.block_offset(Block::kUwb), 18u);
  EXPECT_EQ(l.block_offset(Block::kImu), 21u);
  EXPECT_EQ(l.describe(5), (FeatureLayout::Channel{Block::kCsiMagnitude, 1, 1}));
  EXPECT_EQ(l.describe(17), (FeatureLayout::Channel{Block::kRssi, 1, 0}));
  EXPECT_EQ(l.describe(29), (FeatureLayout::Channel{Block::kImu, 0, 8}));
  EXPECT_IPS_ERROR(l.describe(30), ErrorCode::kDimensionMismatch);
}

TEST(Layout, DescribeIsInjective) {
  const FeatureLayout l = FeatureLayout::from_scenario(build_scenario(42));
  std::set<std::tuple<int, std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < l.dimension(); ++i) {
    const auto c = l.describe(i);
    EXPECT_TRUE(seen.insert({static_cast<int>(c.block), c.anchor, c.channel}).second) << i;
  }
  EXPECT_EQ(seen.size(), 2u * 13 * 52 + 13 + 3 + 9);
}

TEST(Layout, BlockNames) {
  for (Block b : kAllBlocks) EXPECT_EQ(parse_block_name(block_name(b)), b);
  EXPECT_FALSE(parse_block_name("lidar").has_value());
}

LabeledSample sample(double t, std::vector<double> f, Position2D label, SensorKind kind) {
  LabeledSample s;
  s.t_ref = t;
  s.features = std::move(f);
  s.label = label;
  s.modality = kind;
  return s;
}

TEST(Frames, CsiOnlyStream) {
  const FeatureLayout l = small_layout();
  AlignedStream csi{SensorKind::kCsi, {}};
  for (int i = 0; i < 5; ++i) {
    csi.samples.push_back(sample(0.2 * i, std::vector<double>(16, 1.0 + i), {1.0 * i, 0}, SensorKind::kCsi));
  }
  const auto frames = build_fusion_frames(std::vector<AlignedStream>{csi}, l);
  ASSERT_EQ(frames.size(), 5u);
  for (const FusionFrame& f : frames) {
    EXPECT_TRUE(f.has(Block::kCsiMagnitude));
    EXPECT_TRUE(f.has(Block::kCsiPhase));
    EXPECT_FALSE(f.has(Block::kRssi));
    EXPECT_FALSE(f.has(Block::kUwb));
    EXPECT_FALSE(f.has(Block::kImu));
    for (std::size_t i = 16; i < l.dimension(); ++i) EXPECT_EQ(f.features[i], 0.0);
  }
  EXPECT_EQ(frames[3].label, (Position2D{3.0, 0}));
}

TEST(Frames, AlignedStreamsFillEveryBlock) {
  const FeatureLayout l = small_layout();
  std::vector<AlignedStream> streams{{SensorKind::kCsi, {}}, {SensorKind::kRssi, {}},
                                     {SensorKind::kUwb, {}}, {SensorKind::kImu, {}}};
  for (int i = 0; i < 4; ++i) {
    const double t = 0.1 * i;
    streams[0].samples.push_back(sample(t, std::vector<double>(16, i), {}, SensorKind::kCsi));
    streams[1].samples.push_back(sample(t, {-50.0 - i, -60.0}, {}, SensorKind::kRssi));
    streams[2].samples.push_back(sample(t, {1.0, 2.0, 3.0 + i}, {}, SensorKind::kUwb));
    streams[3].samples.push_back(sample(t, std::vector<double>(9, 0.5 * i), {}, SensorKind::kImu));
  }
  const auto frames = build_fusion_frames(streams, l);
  ASSERT_EQ(frames.size(), 4u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (double m : frames[i].mask) EXPECT_EQ(m, 1.0);
    std::vector<double> expected;
    for (const AlignedStream& s : streams) {
      expected.insert(expected.end(), s.samples[i].features.begin(), s.samples[i].features.end());
    }
    EXPECT_EQ(frames[i].features, expected);
  }
}

TEST(Frames, StaleSamplesAreMasked) {
  const FeatureLayout l = small_layout();
  std::vector<AlignedStream> streams{{SensorKind::kCsi, {}}, {SensorKind::kUwb, {}}};
  streams[0].samples.push_back(sample(1.0, std::vector<double>(16, 1.0), {}, SensorKind::kCsi));
  streams[0].samples.push_back(sample(1.5, std::vector<double>(16, 1.0), {}, SensorKind::kCsi));
  streams[1].samples.push_back(sample(0.9, {1, 1, 1}, {}, SensorKind::kUwb));
  streams[1].samples.push_back(sample(1.2, {2, 2, 2}, {}, SensorKind::kUwb));  // future for frame 0
  const auto frames = build_fusion_frames(streams, l, FrameOptions{0.15, SensorKind::kCsi});
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_TRUE(frames[0].has(Block::kUwb));
  EXPECT_EQ(frames[0].features[l.block_offset(Block::kUwb)], 1.0);
  EXPECT_FALSE(frames[1].has(Block::kUwb));  // 0.3 s old
}

TEST(Frames, ImuAgeOnSimulatedStreams) {
  const auto s = test::simulate(23, 60.0);
  const FeatureLayout l = FeatureLayout::from_scenario(s.scenario);
  const auto gt = groundtruth_from_records(s.records);
  const auto csi = label_with_groundtruth(correct_clock(only(s.records, SensorKind::kCsi), s.config.clocks.wifi),
                                          gt, s.scenario.sensor_offsets.wifi, l);
  const auto imu = label_with_groundtruth(correct_clock(only(s.records, SensorKind::kImu), s.config.clocks.imu),
                                          gt, s.scenario.sensor_offsets.imu, l);
  const auto frames = build_fusion_frames(std::vector<AlignedStream>{csi.stream, imu.stream}, l);
  ASSERT_EQ(frames.size(), csi.stream.samples.size());
  std::size_t fresh = 0;
  for (const FusionFrame& f : frames) {
    const auto it = std::upper_bound(imu.stream.samples.begin(), imu.stream.samples.end(), f.t_ref,
                                     [](double t, const LabeledSample& x) { return t < x.t_ref; });
    if (it == imu.stream.samples.begin()) continue;
    const LabeledSample& used = *(it - 1);
    if (f.t_ref - used.t_ref <= 1.0 / 76.93 + 1e-9) ++fresh;
    ASSERT_TRUE(f.has(Block::kImu));
    EXPECT_TRUE(std::equal(used.features.begin(), used.features.end(),
                           f.features.begin() + static_cast<std::ptrdiff_t>(l.block_offset(Block::kImu))));
  }
  EXPECT_GE(static_cast<double>(fresh), 0.99 * static_cast<double>(frames.size()));
}

TEST(Frames, InvalidWindow) {
  EXPECT_IPS_ERROR(build_fusion_frames({}, small_layout(), FrameOptions{0.0, SensorKind::kCsi}),
                   ErrorCode::kInvalidConfig);
  EXPECT_TRUE(build_fusion_frames({}, small_layout()).empty());
}

TEST(Frames, SelectFeaturesAppendsMasks) {
  const FeatureLayout l = small_layout();
  FusionFrame f;
  f.features.resize(l.dimension());
  for (std::size_t i = 0; i < f.features.size(); ++i) f.features[i] = static_cast<double>(i);
  f.mask = {1, 1, 0, 1, 1};
  const std::vector<Block> blocks{Block::kUwb, Block::kRssi};
  EXPECT_EQ(select_features(f, l, blocks), (std::vector<double>{18, 19, 20, 16, 17, 1, 0}));
}

TEST(Frames, SerializeRoundTrip) {
  const FeatureLayout l = small_layout();
  FusionFrame f;
  f.t_ref = 12.345;
  f.features.assign(l.dimension(), 0.1);
  f.mask = {1, 1, 0, 1, 0};
  f.label = {3.25, 1.5};
  const FusionFrame g = parse_frame(serialize_frame(f), l);
  EXPECT_EQ(g.t_ref, f.t_ref);
  EXPECT_EQ(g.features, f.features);
  EXPECT_EQ(g.mask, f.mask);
  EXPECT_EQ(g.label, f.label);
  EXPECT_IPS_ERROR(parse_frame(serialize_frame(f), FeatureLayout({"u0"}, {"w00"}, 4)),
                   ErrorCode::kSchemaViolation);
  test::TempDir dir("frames");
  write_frames_file(dir.file("f.jsonl"), {f, f});
  EXPECT_EQ(read_frames_file(dir.file("f.jsonl"), l).size(), 2u);
}

}  // namespace
}  // namespace ips
