#pragma once

// JSON Lines wire format for sensor records.
//
//   {"t":1.5,"sensor":"uwb","id":"tag0","payload":{"anchor_id":"u1","range_m":2.0,"power_db":-80.0}}
//
// Payload shapes by sensor:
//   uwb  {"anchor_id", "range_m", "power_db"}
//   rssi {"anchor_id", "rssi_db"}
//   csi  {"anchor_id", "magnitudes":[S], "phases":[S]}
//   imu  [ax, ay, az, gx, gy, gz, mx, my, mz]
//   gt   {"x", "y", "phi"}
//
// Doubles are written in shortest round-trip form, so parse(serialize(r))
// reproduces every float bit for bit.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ips/model.hpp"

namespace ips {

struct RecordSchema {
  // When set, csi payloads must carry exactly this many subcarriers.
  std::optional<std::size_t> subcarriers;
};

std::string serialize_record(const Record& record);

/// Throws Error{kMalformedLine | kSchemaViolation | kNegativeTime}.
Record parse_record(std::string_view line, const RecordSchema& schema = {});

std::optional<SensorKind> parse_sensor_name(std::string_view name) noexcept;

void write_records(std::ostream& out, const std::vector<Record>& records);

/// Reads a whole stream; blank lines are skipped. Errors carry the 1-based
/// line number in their message.
std::vector<Record> read_records(std::istream& in, const RecordSchema& schema = {});

void write_records_file(const std::string& path, const std::vector<Record>& records);
std::vector<Record> read_records_file(const std::string& path, const RecordSchema& schema = {});

}  // namespace ips
