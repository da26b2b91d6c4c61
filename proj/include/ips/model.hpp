#pragma once

// Shared domain types. Units are SI throughout: meters, seconds, radians,
// dBm for received power, m/s^2 / rad/s / uT for the inertial channels.

#include <array>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ips {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into [-pi, pi).
double normalize_angle(double radians) noexcept;

/// Signed shortest rotation taking `from` onto `to`, in [-pi, pi).
double shortest_arc(double from, double to) noexcept;

struct Position2D {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Position2D&, const Position2D&) = default;
};

double distance(const Position2D& a, const Position2D& b) noexcept;

/// Planar pose; heading counter-clockwise from +x.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;

  Position2D position() const noexcept { return {x, y}; }
  Pose normalized() const noexcept { return {x, y, normalize_angle(phi)}; }

  friend bool operator==(const Pose&, const Pose&) = default;
};

struct TimedPose {
  double t = 0.0;
  Pose pose;

  friend bool operator==(const TimedPose&, const TimedPose&) = default;
};

enum class AnchorKind { kUwb, kWifi };

struct Anchor {
  std::string id;
  AnchorKind kind = AnchorKind::kUwb;
  Position2D position;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// Mounting of a sensor on the robot plate. The lever arm length is
/// hypot(x_off, y_off); phi_off is the measured bearing of the sensor
/// relative to the robot heading.
struct SensorOffset {
  double x_off = 0.0;
  double y_off = 0.0;
  double phi_off = 0.0;

  /// Offset whose bearing matches its Cartesian mount point.
  static SensorOffset mounted_at(double x, double y) noexcept;

  friend bool operator==(const SensorOffset&, const SensorOffset&) = default;
};

enum class SensorKind { kUwb, kRssi, kCsi, kImu, kGt };

std::string_view sensor_name(SensorKind kind) noexcept;

struct UwbPayload {
  std::string anchor_id;
  double range_m = 0.0;
  double power_db = 0.0;

  friend bool operator==(const UwbPayload&, const UwbPayload&) = default;
};

struct RssiPayload {
  std::string anchor_id;
  double rssi_db = 0.0;

  friend bool operator==(const RssiPayload&, const RssiPayload&) = default;
};

struct CsiPayload {
  std::string anchor_id;
  std::vector<double> magnitudes;  // |H| per subcarrier
  std::vector<double> phases;      // arg H per subcarrier

  friend bool operator==(const CsiPayload&, const CsiPayload&) = default;
};

struct ImuPayload {
  std::array<double, 3> accel{};
  std::array<double, 3> gyro{};
  std::array<double, 3> mag{};

  friend bool operator==(const ImuPayload&, const ImuPayload&) = default;
};

struct GtPayload {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;

  friend bool operator==(const GtPayload&, const GtPayload&) = default;
};

using Payload = std::variant<UwbPayload, RssiPayload, CsiPayload, ImuPayload, GtPayload>;

/// One timestamped reading as it appears on the wire. `t` is on the
/// sender's clock until corrected by ingest.
struct Record {
  double t = 0.0;
  SensorKind sensor = SensorKind::kGt;
  std::string source_id;
  Payload payload;

  friend bool operator==(const Record&, const Record&) = default;
};

/// Sensor kind implied by a payload alternative.
SensorKind payload_kind(const Payload& payload) noexcept;

struct LabeledSample {
  double t_ref = 0.0;
  std::vector<double> features;
  Position2D label;
  SensorKind modality = SensorKind::kGt;
  // Per-anchor presence for multi-anchor modalities (empty for imu).
  std::vector<bool> anchors_present;
};

struct ClockModel {
  double offset = 0.0;  // seconds
  double drift = 0.0;   // s/s

  friend bool operator==(const ClockModel&, const ClockModel&) = default;
};

}  // namespace ips
