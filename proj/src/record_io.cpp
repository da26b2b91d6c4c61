#include "ips/record_io.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <type_traits>

#include <json.hpp>

#include "ips/error.hpp"

namespace ips {
namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, what);
}

void expect_keys(const json& object, std::initializer_list<const char*> keys,
                 const char* context) {
  if (!object.is_object()) schema_error(std::string(context) + " must be an object");
  if (object.size() != keys.size()) {
    schema_error(std::string(context) + " has " + std::to_string(object.size()) +
                 " keys, expected " + std::to_string(keys.size()));
  }
  for (const char* key : keys) {
    if (!object.contains(key)) schema_error(std::string(context) + " missing key '" + key + "'");
  }
}

double number_at(const json& object, const char* key) {
  const json& value = object.at(key);
  if (!value.is_number()) schema_error(std::string("field '") + key + "' must be a number");
  const double v = value.get<double>();
  if (!std::isfinite(v)) schema_error(std::string("field '") + key + "' must be finite");
  return v;
}

std::string string_at(const json& object, const char* key) {
  const json& value = object.at(key);
  if (!value.is_string()) schema_error(std::string("field '") + key + "' must be a string");
  return value.get<std::string>();
}

std::vector<double> numbers_of(const json& array, const char* context) {
  if (!array.is_array()) schema_error(std::string(context) + " must be an array");
  std::vector<double> out;
  out.reserve(array.size());
  for (const json& v : array) {
    if (!v.is_number()) schema_error(std::string(context) + " must contain numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

ordered_json payload_to_json(const Payload& payload) {
  return std::visit(
      [](const auto& p) -> ordered_json {
        using T = std::decay_t<decltype(p)>;
        ordered_json j;
        if constexpr (std::is_same_v<T, UwbPayload>) {
          j["anchor_id"] = p.anchor_id;
          j["range_m"] = p.range_m;
          j["power_db"] = p.power_db;
        } else if constexpr (std::is_same_v<T, RssiPayload>) {
          j["anchor_id"] = p.anchor_id;
          j["rssi_db"] = p.rssi_db;
        } else if constexpr (std::is_same_v<T, CsiPayload>) {
          j["anchor_id"] = p.anchor_id;
          j["magnitudes"] = p.magnitudes;
          j["phases"] = p.phases;
        } else if constexpr (std::is_same_v<T, ImuPayload>) {
          j = ordered_json::array();
          for (const auto* block : {&p.accel, &p.gyro, &p.mag}) {
            for (double v : *block) j.push_back(v);
          }
        } else {
          j["x"] = p.x;
          j["y"] = p.y;
          j["phi"] = p.phi;
        }
        return j;
      },
      payload);
}

Payload payload_from_json(SensorKind sensor, const json& j, const RecordSchema& schema) {
  switch (sensor) {
    case SensorKind::kUwb:
      expect_keys(j, {"anchor_id", "range_m", "power_db"}, "uwb payload");
      return UwbPayload{string_at(j, "anchor_id"), number_at(j, "range_m"),
                        number_at(j, "power_db")};
    case SensorKind::kRssi:
      expect_keys(j, {"anchor_id", "rssi_db"}, "rssi payload");
      return RssiPayload{string_at(j, "anchor_id"), number_at(j, "rssi_db")};
    case SensorKind::kCsi: {
      expect_keys(j, {"anchor_id", "magnitudes", "phases"}, "csi payload");
      CsiPayload p{string_at(j, "anchor_id"), numbers_of(j.at("magnitudes"), "magnitudes"),
                   numbers_of(j.at("phases"), "phases")};
      if (p.magnitudes.size() != p.phases.size()) {
        schema_error("csi magnitudes/phases length differ");
      }
      if (schema.subcarriers && p.magnitudes.size() != *schema.subcarriers) {
        schema_error("csi payload has " + std::to_string(p.magnitudes.size()) +
                     " subcarriers, expected " + std::to_string(*schema.subcarriers));
      }
      if (p.magnitudes.empty()) schema_error("csi payload is empty");
      return p;
    }
    case SensorKind::kImu: {
      const std::vector<double> v = numbers_of(j, "imu payload");
      if (v.size() != 9) schema_error("imu payload must have 9 values");
      ImuPayload p;
      for (std::size_t i = 0; i < 3; ++i) {
        p.accel[i] = v[i];
        p.gyro[i] = v[3 + i];
        p.mag[i] = v[6 + i];
      }
      return p;
    }
    case SensorKind::kGt:
      expect_keys(j, {"x", "y", "phi"}, "gt payload");
      return GtPayload{number_at(j, "x"), number_at(j, "y"), number_at(j, "phi")};
  }
  schema_error("unknown sensor");
}

}  // namespace

std::optional<SensorKind> parse_sensor_name(std::string_view name) noexcept {
  for (SensorKind kind : {SensorKind::kUwb, SensorKind::kRssi, SensorKind::kCsi,
                          SensorKind::kImu, SensorKind::kGt}) {
    if (sensor_name(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string serialize_record(const Record& record) {
  ordered_json j;
  j["t"] = record.t;
  j["sensor"] = std::string(sensor_name(record.sensor));
  j["id"] = record.source_id;
  j["payload"] = payload_to_json(record.payload);
  return j.dump();
}

Record parse_record(std::string_view line, const RecordSchema& schema) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedLine, e.what());
  }
  expect_keys(j, {"t", "sensor", "id", "payload"}, "record");

  Record record;
  if (!j.at("t").is_number()) schema_error("field 't' must be a number");
  record.t = j.at("t").get<double>();
  if (!std::isfinite(record.t)) schema_error("field 't' must be finite");
  if (record.t < 0.0) throw Error(ErrorCode::kNegativeTime, "t = " + std::to_string(record.t));

  const auto sensor = parse_sensor_name(string_at(j, "sensor"));
  if (!sensor) schema_error("unknown sensor '" + j.at("sensor").get<std::string>() + "'");
  record.sensor = *sensor;
  record.source_id = string_at(j, "id");
  record.payload = payload_from_json(record.sensor, j.at("payload"), schema);
  return record;
}

void write_records(std::ostream& out, const std::vector<Record>& records) {
  for (const Record& r : records) out << serialize_record(r) << '\n';
}

std::vector<Record> read_records(std::istream& in, const RecordSchema& schema) {
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      records.push_back(parse_record(line, schema));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_records_file(const std::string& path, const std::vector<Record>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  write_records(out, records);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

std::vector<Record> read_records_file(const std::string& path, const RecordSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return read_records(in, schema);
}

}  // namespace ips
