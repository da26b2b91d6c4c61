#include "ips/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ips/error.hpp"
#include "ips/record_io.hpp"

namespace ips {
namespace {

double nearest_rank_median(std::vector<double> values) {
  const std::size_t rank = (values.size() + 1) / 2;  // ceil(n / 2)
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

}  // namespace

CellIndex RadioMap::cell_of(const Position2D& p) const noexcept {
  return {static_cast<long>(std::floor(p.x / resolution)),
          static_cast<long>(std::floor(p.y / resolution))};
}

Position2D RadioMap::center_of(const CellIndex& c) const noexcept {
  return {(static_cast<double>(c.ix) + 0.5) * resolution,
          (static_cast<double>(c.iy) + 0.5) * resolution};
}

RadioMap build_map(std::span<const LabeledSample> samples, double resolution) {
  if (!(resolution > 0.0)) throw Error(ErrorCode::kInvalidConfig, "grid resolution must be > 0");
  if (samples.empty()) throw Error(ErrorCode::kInsufficientData, "no samples for the radio map");
  RadioMap map;
  map.resolution = resolution;
  map.modality = samples.front().modality;
  map.dimension = samples.front().features.size();
  for (const LabeledSample& s : samples) {
    if (s.features.size() != map.dimension) {
      throw Error(ErrorCode::kDimensionMismatch, "sample dimension " +
                                                     std::to_string(s.features.size()) +
                                                     " != " + std::to_string(map.dimension));
    }
    MapCell& cell = map.cells[map.cell_of(s.label)];
    if (cell.count == 0) cell.mean.assign(map.dimension, 0.0);
    ++cell.count;
    const double inv = 1.0 / static_cast<double>(cell.count);
    for (std::size_t i = 0; i < map.dimension; ++i) {
      cell.mean[i] += (s.features[i] - cell.mean[i]) * inv;
    }
  }
  return map;
}

Position2D locate(std::span<const double> query, const RadioMap& map, std::size_t k) {
  if (map.cells.empty()) throw Error(ErrorCode::kEmptyMap, "radio map has no cells");
  if (query.size() != map.dimension) {
    throw Error(ErrorCode::kDimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                   " != " + std::to_string(map.dimension));
  }
  if (k == 0) throw Error(ErrorCode::kInvalidConfig, "k must be >= 1");

  struct Candidate {
    double dist;
    const CellIndex* cell;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(map.cells.size());
  for (const auto& [index, cell] : map.cells) {
    double sq = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
      const double d = query[i] - cell.mean[i];
      sq += d * d;
    }
    candidates.push_back({std::sqrt(sq), &index});
  }
  k = std::min(k, candidates.size());
  // Cells are visited in index order, so a stable selection breaks ties by index.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.dist < b.dist; });

  Position2D estimate;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = 1.0 / (1e-9 + candidates[i].dist);
    const Position2D c = map.center_of(*candidates[i].cell);
    estimate.x += w * c.x;
    estimate.y += w * c.y;
    total += w;
  }
  estimate.x /= total;
  estimate.y /= total;
  return estimate;
}

AlignedStream csi_magnitudes_only(const AlignedStream& csi, const FeatureLayout& layout) {
  const std::size_t n = layout.block_size(Block::kCsiMagnitude);
  AlignedStream out;
  out.modality = csi.modality;
  out.samples.reserve(csi.samples.size());
  for (const LabeledSample& s : csi.samples) {
    LabeledSample m = s;
    m.features.resize(std::min(n, m.features.size()));
    out.samples.push_back(std::move(m));
  }
  return out;
}

nlohmann::ordered_json radio_map_to_json(const RadioMap& map) {
  nlohmann::ordered_json j;
  j["resolution"] = map.resolution;
  j["modality"] = std::string(sensor_name(map.modality));
  j["N"] = map.dimension;
  nlohmann::ordered_json cells = nlohmann::ordered_json::object();
  for (const auto& [index, cell] : map.cells) {
    cells[std::to_string(index.ix) + "," + std::to_string(index.iy)] =
        nlohmann::ordered_json{{"mean", cell.mean}, {"count", cell.count}};
  }
  j["cells"] = cells;
  return j;
}

RadioMap radio_map_from_json(const nlohmann::json& j) {
  try {
    RadioMap map;
    map.resolution = j.at("resolution").get<double>();
    const auto modality = parse_sensor_name(j.at("modality").get<std::string>());
    if (!modality) throw Error(ErrorCode::kSchemaViolation, "unknown map modality");
    map.modality = *modality;
    map.dimension = j.at("N").get<std::size_t>();
    for (const auto& [key, value] : j.at("cells").items()) {
      const auto comma = key.find(',');
      if (comma == std::string::npos) throw Error(ErrorCode::kSchemaViolation, "bad cell key " + key);
      const CellIndex index{std::stol(key.substr(0, comma)), std::stol(key.substr(comma + 1))};
      MapCell cell{value.at("mean").get<std::vector<double>>(), value.at("count").get<std::size_t>()};
      if (cell.mean.size() != map.dimension || cell.count == 0) {
        throw Error(ErrorCode::kSchemaViolation, "cell " + key + " is inconsistent");
      }
      map.cells.emplace(index, std::move(cell));
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what());
  } catch (const std::logic_error& e) {  // stol
    throw Error(ErrorCode::kSchemaViolation, e.what());
  }
}

TrilatResult rssi_trilaterate(const LabeledSample& snapshot, std::span<const Anchor> wifi_anchors,
                              const PathLossModel& model, double beta_db) {
  if (snapshot.features.size() != wifi_anchors.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "snapshot does not match the anchor list");
  }
  std::vector<std::size_t> heard;
  for (std::size_t i = 0; i < wifi_anchors.size(); ++i) {
    if (snapshot.anchors_present.empty() || snapshot.anchors_present[i]) heard.push_back(i);
  }
  std::stable_sort(heard.begin(), heard.end(), [&](std::size_t a, std::size_t b) {
    return snapshot.features[a] > snapshot.features[b];
  });
  heard.resize(std::min<std::size_t>(3, heard.size()));
  std::vector<RangeObservation> obs;
  for (std::size_t i : heard) {
    obs.push_back({wifi_anchors[i], rssi_to_distance(snapshot.features[i], model, beta_db)});
  }
  return localize(obs);
}

RssiCalibration calibrate_rssi_offset(std::span<const LabeledSample> snapshots,
                                      std::span<const Anchor> wifi_anchors,
                                      const PathLossModel& model, const SweepSpec& sweep) {
  if (snapshots.size() < kMinCalibrationSnapshots) {
    throw Error(ErrorCode::kInsufficientData, std::to_string(snapshots.size()) +
                                                  " snapshots, need " +
                                                  std::to_string(kMinCalibrationSnapshots));
  }
  if (!(sweep.step_db > 0.0) || sweep.to_db < sweep.from_db) {
    throw Error(ErrorCode::kInvalidConfig, "invalid sweep range");
  }
  const auto steps =
      static_cast<std::size_t>(std::floor((sweep.to_db - sweep.from_db) / sweep.step_db + 1e-9));

  RssiCalibration cal;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> errors(snapshots.size());
  for (std::size_t s = 0; s <= steps; ++s) {
    const double beta = sweep.from_db + static_cast<double>(s) * sweep.step_db;
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
      const TrilatResult r = rssi_trilaterate(snapshots[i], wifi_anchors, model, beta);
      errors[i] = distance(r.position, snapshots[i].label);
    }
    const double median = nearest_rank_median(errors);
    cal.sweep_errors.emplace_back(beta, median);
    if (median < best) {
      best = median;
      cal.beta = beta;
    }
  }
  return cal;
}

}  // namespace ips
