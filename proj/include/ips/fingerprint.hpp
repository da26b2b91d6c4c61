#pragma once

// Radio-map fingerprinting and the RSSI offset calibration sweep.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ips/geometry.hpp"
#include "ips/ingest.hpp"
#include "ips/model.hpp"

namespace ips {

struct CellIndex {
  long ix = 0;
  long iy = 0;

  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct MapCell {
  std::vector<double> mean;
  std::size_t count = 0;
};

struct RadioMap {
  double resolution = 0.25;
  SensorKind modality = SensorKind::kRssi;
  std::size_t dimension = 0;  // N
  std::map<CellIndex, MapCell> cells;

  CellIndex cell_of(const Position2D& p) const noexcept;
  Position2D center_of(const CellIndex& c) const noexcept;
};

/// Bins every sample to its grid cell and keeps a running mean per cell.
/// Throws kDimensionMismatch (non-uniform features), kInsufficientData
/// (no samples) or kInvalidConfig (resolution <= 0).
RadioMap build_map(std::span<const LabeledSample> samples, double resolution);
inline RadioMap build_map(const AlignedStream& stream, double resolution) {
  RadioMap map = build_map(std::span<const LabeledSample>(stream.samples), resolution);
  map.modality = stream.modality;
  return map;
}

/// k nearest cells in feature space, combined with weights 1 / (1e-9 + dist).
/// Ties resolve by cell index. Throws kDimensionMismatch, kEmptyMap.
Position2D locate(std::span<const double> query, const RadioMap& map, std::size_t k = 3);

/// CSI stream reduced to its magnitude block (phases are not comparable
/// across sessions).
AlignedStream csi_magnitudes_only(const AlignedStream& csi, const FeatureLayout& layout);

nlohmann::ordered_json radio_map_to_json(const RadioMap& map);
RadioMap radio_map_from_json(const nlohmann::json& j);

struct SweepSpec {
  double from_db = -30.0;
  double to_db = 30.0;
  double step_db = 1.0;
};

struct RssiCalibration {
  double beta = 0.0;
  std::vector<std::pair<double, double>> sweep_errors;  // (beta, median error m)
};

/// Trilateration from the three strongest anchors of one RSSI snapshot.
/// The strongest readings are picked before the offset is applied.
TrilatResult rssi_trilaterate(const LabeledSample& snapshot, std::span<const Anchor> wifi_anchors,
                              const PathLossModel& model, double beta_db);

inline constexpr std::size_t kMinCalibrationSnapshots = 50;

/// Sweeps the RSSI offset and keeps the value with the smallest median
/// trilateration error against the labels. Throws kInsufficientData.
RssiCalibration calibrate_rssi_offset(std::span<const LabeledSample> snapshots,
                                      std::span<const Anchor> wifi_anchors,
                                      const PathLossModel& model, const SweepSpec& sweep = {});

}  // namespace ips
