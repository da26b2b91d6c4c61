#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ips/model.hpp"
#include "ips/record_io.hpp"
#include "support.hpp"

namespace ips {
namespace {

TEST(Angles, NormalizeIntoHalfOpenRange) {
  EXPECT_DOUBLE_EQ(normalize_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(normalize_angle(kPi), -kPi);
  EXPECT_DOUBLE_EQ(normalize_angle(-kPi), -kPi);
  EXPECT_NEAR(normalize_angle(3.0 * kPi / 2.0), -kPi / 2.0, 1e-15);
  EXPECT_NEAR(normalize_angle(-5.0 * kPi / 2.0), -kPi / 2.0, 1e-15);
}

TEST(Angles, NormalizeIsIdempotent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double once = normalize_angle(u(rng));
    EXPECT_EQ(normalize_angle(once), once);
    EXPECT_GE(once, -kPi);
    EXPECT_LT(once, kPi);
  }
}

TEST(Angles, ShortestArcCrossesWrap) {
  EXPECT_NEAR(shortest_arc(3.0, -3.0), 2.0 * kPi - 6.0, 1e-12);
  EXPECT_NEAR(shortest_arc(-3.0, 3.0), 6.0 - 2.0 * kPi, 1e-12);
  EXPECT_NEAR(shortest_arc(0.5, 1.0), 0.5, 1e-15);
}

TEST(SensorOffset, MountedAtUsesBearing) {
  const SensorOffset o = SensorOffset::mounted_at(0.0, 0.2);
  EXPECT_DOUBLE_EQ(o.phi_off, kPi / 2.0);
  EXPECT_DOUBLE_EQ(SensorOffset::mounted_at(0.0, 0.0).phi_off, 0.0);
}

Record gt_record(double t, double x, double y, double phi) {
  return {t, SensorKind::kGt, "robot", GtPayload{x, y, phi}};
}

TEST(RecordIo, ZeroGroundTruthLine) {
  const std::string line = serialize_record(gt_record(0.0, 0.0, 0.0, 0.0));
  EXPECT_NE(line.find("\"sensor\":\"gt\""), std::string::npos);
  EXPECT_EQ(line, R"({"t":0.0,"sensor":"gt","id":"robot","payload":{"x":0.0,"y":0.0,"phi":0.0}})");
}

TEST(RecordIo, UwbRoundTrip) {
  const Record r{1.5, SensorKind::kUwb, "tag0", UwbPayload{"u1", 2.0, -80.0}};
  EXPECT_EQ(parse_record(serialize_record(r)), r);
}

TEST(RecordIo, ImuGoldenLine) {
  const Record r{0.5, SensorKind::kImu, "imu0",
                 ImuPayload{{0.0, 0.0, 9.81}, {0.0, 0.0, 0.1}, {20.0, 0.0, -45.0}}};
  EXPECT_EQ(serialize_record(r),
            R"({"t":0.5,"sensor":"imu","id":"imu0","payload":[0.0,0.0,9.81,0.0,0.0,0.1,20.0,0.0,-45.0]})");
}

TEST(RecordIo, KeyOrderIsFixed) {
  const Record r{2.25, SensorKind::kRssi, "esp-rx", RssiPayload{"w03", -61.5}};
  const std::string line = serialize_record(r);
  const auto t = line.find("\"t\"");
  const auto sensor = line.find("\"sensor\"");
  const auto id = line.find("\"id\"");
  const auto payload = line.find("\"payload\"");
  EXPECT_LT(t, sensor);
  EXPECT_LT(sensor, id);
  EXPECT_LT(id, payload);
}

TEST(RecordIo, CsiArityIsChecked) {
  const Record r{1.0, SensorKind::kCsi, "esp-rx",
                 CsiPayload{"w00", std::vector<double>(51, 1.0), std::vector<double>(51, 0.0)}};
  EXPECT_IPS_ERROR(parse_record(serialize_record(r), RecordSchema{52}), ErrorCode::kSchemaViolation);
  EXPECT_NO_THROW(parse_record(serialize_record(r), RecordSchema{51}));
}

TEST(RecordIo, CsiListsMustAgree) {
  const std::string line =
      R"({"t":1.0,"sensor":"csi","id":"esp-rx","payload":{"anchor_id":"w00","magnitudes":[1.0,2.0],"phases":[0.0]}})";
  EXPECT_IPS_ERROR(parse_record(line), ErrorCode::kSchemaViolation);
}

TEST(RecordIo, NegativeTimeRejected) {
  const std::string line =
      R"({"t":-1,"sensor":"gt","id":"robot","payload":{"x":0.0,"y":0.0,"phi":0.0}})";
  EXPECT_IPS_ERROR(parse_record(line), ErrorCode::kNegativeTime);
}

TEST(RecordIo, SchemaViolations) {
  // Extra top-level key.
  EXPECT_IPS_ERROR(
      parse_record(R"({"t":1,"sensor":"gt","id":"r","payload":{"x":0,"y":0,"phi":0},"extra":1})"),
      ErrorCode::kSchemaViolation);
  // Missing payload field.
  EXPECT_IPS_ERROR(parse_record(R"({"t":1,"sensor":"gt","id":"r","payload":{"x":0,"y":0}})"),
                   ErrorCode::kSchemaViolation);
  // Unknown payload key.
  EXPECT_IPS_ERROR(
      parse_record(R"({"t":1,"sensor":"rssi","id":"r","payload":{"anchor_id":"w","rssi_db":-50,"snr":3}})"),
      ErrorCode::kSchemaViolation);
  // IMU arity.
  EXPECT_IPS_ERROR(parse_record(R"({"t":1,"sensor":"imu","id":"i","payload":[1,2,3,4,5,6,7,8]})"),
                   ErrorCode::kSchemaViolation);
  // Unknown sensor.
  EXPECT_IPS_ERROR(parse_record(R"({"t":1,"sensor":"lidar","id":"i","payload":{}})"),
                   ErrorCode::kSchemaViolation);
}

TEST(RecordIo, MalformedJson) {
  EXPECT_IPS_ERROR(parse_record("{\"t\":1,"), ErrorCode::kMalformedLine);
  EXPECT_IPS_ERROR(parse_record("not json"), ErrorCode::kMalformedLine);
}

TEST(RecordIo, StreamRoundTripKeepsOrder) {
  std::vector<Record> records;
  for (int i = 0; i < 20; ++i) {
    records.push_back(gt_record(0.2 * i, 0.1 * i, 0.05 * i, 0.01 * i));
    records.push_back({0.2 * i + 0.01, SensorKind::kUwb, "uwb-tag", UwbPayload{"u0", 1.0 + i, -70.0}});
  }
  std::stringstream buf;
  write_records(buf, records);
  EXPECT_EQ(read_records(buf), records);
}

TEST(RecordIo, ReadReportsLineNumber) {
  std::stringstream buf;
  buf << serialize_record(gt_record(0.0, 0, 0, 0)) << "\n" << "garbage\n";
  try {
    read_records(buf);
    FAIL() << "expected a parse failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLine);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(RecordIo, FileRoundTrip) {
  test::TempDir dir("record");
  const std::vector<Record> records{gt_record(0.0, 1.0, 2.0, 0.5),
                                    {0.1, SensorKind::kImu, "imu0", ImuPayload{}}};
  write_records_file(dir.file("r.jsonl"), records);
  EXPECT_EQ(read_records_file(dir.file("r.jsonl")), records);
  EXPECT_IPS_ERROR(read_records_file(dir.file("missing.jsonl")), ErrorCode::kIoError);
}

TEST(RecordIo, NonFiniteValuesRejected) {
  EXPECT_IPS_ERROR(parse_record(R"({"t":1,"sensor":"gt","id":"r","payload":{"x":null,"y":0,"phi":0}})"),
                   ErrorCode::kSchemaViolation);
}

}  // namespace
}  // namespace ips
