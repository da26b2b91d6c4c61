#include "ips/model.hpp"

#include <cmath>

#include "ips/error.hpp"

namespace ips {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kMalformedLine: return "MalformedLine";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kNegativeTime: return "NegativeTime";
    case ErrorCode::kTooFewAnchors: return "TooFewAnchors";
    case ErrorCode::kCollinearAnchors: return "CollinearAnchors";
    case ErrorCode::kEmptyObservations: return "EmptyObservations";
    case ErrorCode::kInvalidOverride: return "InvalidOverride";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kInsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::kEmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyMap: return "EmptyMap";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kTooFewFrames: return "TooFewFrames";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmpty: return "Empty";
    case ErrorCode::kLayoutMismatch: return "LayoutMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

double normalize_angle(double radians) noexcept {
  constexpr double kTwoPi = 2.0 * kPi;
  if (radians >= -kPi && radians < kPi) return radians;
  double wrapped = std::fmod(radians + kPi, kTwoPi);
  if (wrapped < 0.0) wrapped += kTwoPi;
  // fmod can land exactly on 2*pi after the correction above.
  if (wrapped >= kTwoPi) wrapped -= kTwoPi;
  return wrapped - kPi;
}

double shortest_arc(double from, double to) noexcept { return normalize_angle(to - from); }

double distance(const Position2D& a, const Position2D& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

SensorOffset SensorOffset::mounted_at(double x, double y) noexcept {
  return {x, y, (x == 0.0 && y == 0.0) ? 0.0 : std::atan2(y, x)};
}

std::string_view sensor_name(SensorKind kind) noexcept {
  switch (kind) {
    case SensorKind::kUwb: return "uwb";
    case SensorKind::kRssi: return "rssi";
    case SensorKind::kCsi: return "csi";
    case SensorKind::kImu: return "imu";
    case SensorKind::kGt: return "gt";
  }
  return "gt";
}

SensorKind payload_kind(const Payload& payload) noexcept {
  switch (payload.index()) {
    case 0: return SensorKind::kUwb;
    case 1: return SensorKind::kRssi;
    case 2: return SensorKind::kCsi;
    case 3: return SensorKind::kImu;
    default: return SensorKind::kGt;
  }
}

}  // namespace ips
