// Randomised invariants, 100+ generated cases each.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ips/eval.hpp"
#include "ips/ingest.hpp"
#include "ips/neural.hpp"
#include "ips/pipeline.hpp"
#include "ips/record_io.hpp"
#include "support.hpp"

namespace ips {
namespace {

constexpr int kCases = 120;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin() { return index(2) == 1; }

  // Finite doubles across many magnitudes, with exact small values mixed in.
  double any_double() {
    switch (index(4)) {
      case 0: return static_cast<double>(static_cast<int>(index(2001)) - 1000);
      case 1: return real(-1.0, 1.0) * std::pow(10.0, real(-300.0, 300.0));
      case 2: return std::nextafter(real(-1e3, 1e3), 0.0);
      default: return real(-100.0, 100.0);
    }
  }
  double time() { return coin() ? real(0.0, 1e5) : static_cast<double>(index(1000)) / 76.93; }

  std::string id() {
    static const std::vector<std::string> glyphs{"a", "b", "x", "z", "0", "9", "-", "_", ".",
                                                 "/", " ", "\"", "\\", "\u00e9", "\u2013"};
    std::string s;
    const std::size_t n = 1 + index(12);
    for (std::size_t i = 0; i < n; ++i) s += glyphs[index(glyphs.size())];
    return s;
  }

  Record record(std::size_t subcarriers) {
    Record r;
    r.t = time();
    r.source_id = id();
    switch (index(5)) {
      case 0:
        r.sensor = SensorKind::kUwb;
        r.payload = UwbPayload{id(), any_double(), any_double()};
        break;
      case 1:
        r.sensor = SensorKind::kRssi;
        r.payload = RssiPayload{id(), any_double()};
        break;
      case 2: {
        r.sensor = SensorKind::kCsi;
        CsiPayload p{id(), {}, {}};
        for (std::size_t k = 0; k < subcarriers; ++k) {
          p.magnitudes.push_back(any_double());
          p.phases.push_back(any_double());
        }
        r.payload = p;
        break;
      }
      case 3: {
        r.sensor = SensorKind::kImu;
        ImuPayload p;
        for (auto* a : {&p.accel, &p.gyro, &p.mag}) {
          for (double& v : *a) v = any_double();
        }
        r.payload = p;
        break;
      }
      default:
        r.sensor = SensorKind::kGt;
        r.payload = GtPayload{any_double(), any_double(), any_double()};
    }
    return r;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

TEST(Property, RecordRoundTrip) {
  Gen g(101);
  for (int c = 0; c < kCases * 5; ++c) {
    const std::size_t s = 1 + g.index(8);
    const Record r = g.record(s);
    const std::string line = serialize_record(r);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(parse_record(line, RecordSchema{s}), r) << line;
  }
}

TEST(Property, RecordStreamRoundTrip) {
  Gen g(102);
  for (int c = 0; c < kCases; ++c) {
    std::vector<Record> records;
    const std::size_t n = g.index(30);
    for (std::size_t i = 0; i < n; ++i) records.push_back(g.record(4));
    std::stringstream buf;
    write_records(buf, records);
    EXPECT_EQ(read_records(buf, RecordSchema{4}), records);
  }
}

TEST(Property, CdfMonotoneAndPercentilesOrdered) {
  Gen g(103);
  for (int c = 0; c < kCases; ++c) {
    std::vector<double> errs(1 + g.index(500));
    for (double& e : errs) e = g.coin() ? g.real(0.0, 10.0) : std::floor(g.real(0.0, 5.0));
    const ErrorReport r = report_from_errors(errs);
    EXPECT_LE(r.errors.front(), r.p50);
    EXPECT_LE(r.p50, r.p95);
    EXPECT_LE(r.p95, r.p99);
    EXPECT_LE(r.p99, r.errors.back());
    EXPECT_EQ(r.cdf.back().second, 1.0);
    for (std::size_t i = 1; i < r.cdf.size(); ++i) {
      EXPECT_LT(r.cdf[i - 1].first, r.cdf[i].first);
      EXPECT_LT(r.cdf[i - 1].second, r.cdf[i].second);
    }
    // Fraction at each error equals the empirical count.
    for (const auto& [e, frac] : r.cdf) {
      const auto below = std::upper_bound(r.errors.begin(), r.errors.end(), e) - r.errors.begin();
      EXPECT_NEAR(frac, static_cast<double>(below) / static_cast<double>(r.count), 1e-12);
    }
  }
}

TEST(Property, FramesNeverUseFutureOrStaleSamples) {
  Gen g(104);
  const FeatureLayout layout({"u0"}, {"w0"}, 1);
  for (int c = 0; c < kCases; ++c) {
    const double window = g.real(0.01, 0.5);
    std::vector<AlignedStream> streams{{SensorKind::kCsi, {}}, {SensorKind::kUwb, {}}, {SensorKind::kImu, {}}};
    for (AlignedStream& s : streams) {
      double t = g.real(0.0, 0.3);
      const std::size_t n = 1 + g.index(60);
      const std::size_t dim = layout.modality_dimension(s.modality);
      for (std::size_t i = 0; i < n; ++i) {
        LabeledSample x;
        x.t_ref = t;
        x.modality = s.modality;
        x.features.assign(dim, t);  // the feature value records its own time
        s.samples.push_back(x);
        t += g.real(0.001, 0.4);
      }
    }
    const auto frames = build_fusion_frames(streams, layout, FrameOptions{window, SensorKind::kCsi});
    ASSERT_EQ(frames.size(), streams[0].samples.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
      if (f > 0) {
        EXPECT_LT(frames[f - 1].t_ref, frames[f].t_ref);
      }
      for (std::size_t s = 1; s < streams.size(); ++s) {
        const Block b = streams[s].modality == SensorKind::kUwb ? Block::kUwb : Block::kImu;
        const auto& samples = streams[s].samples;
        const auto it = std::upper_bound(samples.begin(), samples.end(), frames[f].t_ref,
                                         [](double t, const LabeledSample& x) { return t < x.t_ref; });
        const bool expect = it != samples.begin() && frames[f].t_ref - (it - 1)->t_ref <= window;
        EXPECT_EQ(frames[f].has(b), expect);
        const double used = frames[f].features[layout.block_offset(b)];
        if (expect) {
          EXPECT_EQ(used, (it - 1)->t_ref);
          EXPECT_LE(used, frames[f].t_ref);
        } else {
          EXPECT_EQ(used, 0.0);
        }
      }
    }
  }
}

TEST(Property, LabelsInterpolateWithinSegments) {
  Gen g(105);
  for (int c = 0; c < kCases; ++c) {
    std::vector<TimedPose> gt;
    double t = 0.0;
    for (int i = 0; i < 10; ++i) {
      gt.push_back({t, {g.real(0, 8), g.real(0, 6), g.real(-kPi, kPi)}});
      t += g.real(0.05, 0.5);
    }
    const double q = g.real(0.0, gt.back().t);
    const Pose p = *interpolate_pose(gt, q);
    const auto hi = std::upper_bound(gt.begin(), gt.end(), q,
                                     [](double v, const TimedPose& x) { return v < x.t; });
    const TimedPose& a = *(hi - 1);
    const TimedPose& b = hi == gt.end() ? a : *hi;
    EXPECT_GE(p.x, std::min(a.pose.x, b.pose.x) - 1e-12);
    EXPECT_LE(p.x, std::max(a.pose.x, b.pose.x) + 1e-12);
    EXPECT_GE(p.phi, -kPi);
    EXPECT_LT(p.phi, kPi);
  }
}

TEST(Property, SimulationIsDeterministic) {
  Gen g(106);
  for (int c = 0; c < kCases; ++c) {
    const std::uint64_t seed = g.engine()();
    SimConfig cfg;
    cfg.duration_s = g.real(1.0, 3.0);
    cfg.noise_seed = g.index(5);
    const Scenario s1 = build_scenario(seed);
    const Scenario s2 = build_scenario(seed);
    ASSERT_EQ(s1, s2);
    const Trajectory t = generate_trajectory(s1, cfg.duration_s, cfg.speed_mps);
    const auto a = sample_sensors(s1, cfg, t);
    const auto b = sample_sensors(s2, cfg, generate_trajectory(s2, cfg.duration_s, cfg.speed_mps));
    EXPECT_EQ(a, b) << "seed " << seed;
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](const Record& x, const Record& y) { return x.t < y.t; }));
  }
}

TEST(Property, TrainingIsDeterministic) {
  Gen g(107);
  for (int c = 0; c < kCases; ++c) {
    const std::size_t dim = 1 + g.index(4);
    std::vector<Example> ex(20 + g.index(20));
    for (std::size_t i = 0; i < ex.size(); ++i) {
      ex[i].t = static_cast<double>(i);
      for (std::size_t d = 0; d < dim; ++d) ex[i].features.push_back(g.real(-1, 1));
      ex[i].label = {g.real(0, 8), g.real(0, 6)};
    }
    MlpConfig cfg = MlpConfig::for_input(dim, {1 + g.index(6)});
    cfg.seed = g.index(1000);
    cfg.epochs = 2;
    cfg.batch_size = 1 + g.index(16);
    cfg.activation = g.coin() ? Activation::kRelu : Activation::kTanh;
    const SplitSpec split{0.8, g.index(1000)};
    const TrainResult a = train(ex, cfg, split);
    const TrainResult b = train(ex, cfg, split);
    EXPECT_EQ(a.model.flatten(), b.model.flatten());
    EXPECT_EQ(a.best_epoch, b.best_epoch);
  }
}

TEST(Property, FusionMethodNamesParse) {
  Gen g(108);
  const std::vector<std::string> names{"csi", "csi-phase", "rssi", "uwb", "imu"};
  for (int c = 0; c < kCases; ++c) {
    std::vector<std::string> pick = names;
    std::shuffle(pick.begin(), pick.end(), g.engine());
    pick.resize(1 + g.index(names.size()));
    std::string joined;
    for (const auto& n : pick) joined += (joined.empty() ? "" : "+") + n;
    const auto spec = parse_method("nn-fusion:" + joined);
    ASSERT_EQ(spec.has_value(), pick.size() >= 2) << joined;
    if (spec) {
      ASSERT_EQ(spec->blocks.size(), pick.size());
      for (std::size_t i = 0; i < pick.size(); ++i) EXPECT_EQ(block_name(spec->blocks[i]), pick[i]);
    }
    EXPECT_FALSE(parse_method("nn-fusion:" + joined + "+" + pick[0]).has_value());
  }
}

}  // namespace
}  // namespace ips
