#include "ips/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ips/error.hpp"
#include "ips/geometry.hpp"
#include "ips/simulator.hpp"

namespace ips {
namespace {

constexpr std::size_t kImuChannels = 9;
constexpr double kMinOverlapSeconds = 10.0;

std::optional<std::size_t> index_of(const std::vector<std::string>& ids, std::string_view id) {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

// Writes one record's payload into a per-modality feature vector.
void scatter(const Record& r, const FeatureLayout& layout, std::vector<double>& features,
             std::vector<bool>& present) {
  auto require = [&](std::optional<std::size_t> idx, const std::string& id) {
    if (!idx) throw Error(ErrorCode::kSchemaViolation, "anchor '" + id + "' not in layout");
    return *idx;
  };
  const std::size_t S = layout.subcarriers();
  const std::size_t W = layout.wifi_ids().size();
  if (const auto* p = std::get_if<UwbPayload>(&r.payload)) {
    const std::size_t a = require(layout.uwb_index(p->anchor_id), p->anchor_id);
    features[a] = p->range_m;
    present[a] = true;
  } else if (const auto* p = std::get_if<RssiPayload>(&r.payload)) {
    const std::size_t a = require(layout.wifi_index(p->anchor_id), p->anchor_id);
    features[a] = p->rssi_db;
    present[a] = true;
  } else if (const auto* p = std::get_if<CsiPayload>(&r.payload)) {
    const std::size_t a = require(layout.wifi_index(p->anchor_id), p->anchor_id);
    if (p->magnitudes.size() != S || p->phases.size() != S) {
      throw Error(ErrorCode::kSchemaViolation, "csi payload does not have S subcarriers");
    }
    std::copy(p->magnitudes.begin(), p->magnitudes.end(), features.begin() + static_cast<std::ptrdiff_t>(a * S));
    std::copy(p->phases.begin(), p->phases.end(), features.begin() + static_cast<std::ptrdiff_t>((W + a) * S));
    present[a] = true;
  } else if (const auto* p = std::get_if<ImuPayload>(&r.payload)) {
    std::copy(p->accel.begin(), p->accel.end(), features.begin());
    std::copy(p->gyro.begin(), p->gyro.end(), features.begin() + 3);
    std::copy(p->mag.begin(), p->mag.end(), features.begin() + 6);
  }
}

double fill_value(SensorKind kind) {
  switch (kind) {
    case SensorKind::kRssi: return kRssiFloorDbm;
    case SensorKind::kUwb: return kMissingRange;
    default: return 0.0;
  }
}

}  // namespace

std::string_view block_name(Block block) noexcept {
  switch (block) {
    case Block::kCsiMagnitude: return "csi";
    case Block::kCsiPhase: return "csi-phase";
    case Block::kRssi: return "rssi";
    case Block::kUwb: return "uwb";
    case Block::kImu: return "imu";
  }
  return "csi";
}

std::optional<Block> parse_block_name(std::string_view name) noexcept {
  for (Block b : kAllBlocks) {
    if (block_name(b) == name) return b;
  }
  return std::nullopt;
}

FeatureLayout::FeatureLayout(std::vector<std::string> uwb_ids, std::vector<std::string> wifi_ids,
                             std::size_t subcarriers)
    : uwb_ids_(std::move(uwb_ids)), wifi_ids_(std::move(wifi_ids)), subcarriers_(subcarriers) {}

FeatureLayout FeatureLayout::from_scenario(const Scenario& scenario) {
  std::vector<std::string> uwb;
  std::vector<std::string> wifi;
  for (const Anchor& a : scenario.uwb_anchors) uwb.push_back(a.id);
  for (const Anchor& a : scenario.wifi_anchors) wifi.push_back(a.id);
  return FeatureLayout(std::move(uwb), std::move(wifi), scenario.subcarriers);
}

std::size_t FeatureLayout::block_size(Block block) const noexcept {
  switch (block) {
    case Block::kCsiMagnitude:
    case Block::kCsiPhase: return wifi_ids_.size() * subcarriers_;
    case Block::kRssi: return wifi_ids_.size();
    case Block::kUwb: return uwb_ids_.size();
    case Block::kImu: return kImuChannels;
  }
  return 0;
}

std::size_t FeatureLayout::block_offset(Block block) const noexcept {
  std::size_t offset = 0;
  for (Block b : kAllBlocks) {
    if (b == block) break;
    offset += block_size(b);
  }
  return offset;
}

std::size_t FeatureLayout::dimension() const noexcept {
  return block_offset(Block::kImu) + block_size(Block::kImu);
}

std::size_t FeatureLayout::modality_dimension(SensorKind kind) const {
  switch (kind) {
    case SensorKind::kCsi: return 2 * block_size(Block::kCsiMagnitude);
    case SensorKind::kRssi: return block_size(Block::kRssi);
    case SensorKind::kUwb: return block_size(Block::kUwb);
    case SensorKind::kImu: return block_size(Block::kImu);
    case SensorKind::kGt: break;
  }
  throw Error(ErrorCode::kSchemaViolation, "gt records carry no features");
}

std::optional<std::size_t> FeatureLayout::uwb_index(std::string_view id) const noexcept {
  return index_of(uwb_ids_, id);
}

std::optional<std::size_t> FeatureLayout::wifi_index(std::string_view id) const noexcept {
  return index_of(wifi_ids_, id);
}

FeatureLayout::Channel FeatureLayout::describe(std::size_t index) const {
  std::size_t offset = 0;
  for (Block b : kAllBlocks) {
    const std::size_t size = block_size(b);
    if (index < offset + size) {
      const std::size_t local = index - offset;
      switch (b) {
        case Block::kCsiMagnitude:
        case Block::kCsiPhase: return {b, local / subcarriers_, local % subcarriers_};
        case Block::kRssi:
        case Block::kUwb: return {b, local, 0};
        case Block::kImu: return {b, 0, local};
      }
    }
    offset += size;
  }
  throw Error(ErrorCode::kDimensionMismatch,
              "feature index " + std::to_string(index) + " >= " + std::to_string(dimension()));
}

std::vector<Record> correct_clock(std::span<const Record> records, const ClockModel& clock) {
  std::vector<Record> out(records.begin(), records.end());
  for (Record& r : out) r.t = (r.t - clock.offset) / (1.0 + clock.drift);
  return out;
}

ClockModel estimate_clock_offset(std::span<const Record> sensor_records,
                                 std::span<const Record> gt_records, double nominal_rate_hz) {
  if (!(nominal_rate_hz > 0.0)) throw Error(ErrorCode::kInvalidConfig, "rate must be > 0");
  std::vector<double> gt_times;
  for (const Record& r : gt_records) {
    if (r.sensor == SensorKind::kGt) gt_times.push_back(r.t);
  }
  std::vector<double> stamps;
  for (const Record& r : sensor_records) {
    if (r.sensor != SensorKind::kGt) stamps.push_back(r.t);
  }
  if (gt_times.empty() || stamps.empty()) {
    throw Error(ErrorCode::kInsufficientOverlap, "no ground truth or no sensor records");
  }
  std::sort(gt_times.begin(), gt_times.end());
  std::sort(stamps.begin(), stamps.end());
  // Records sharing one emission (one per anchor) collapse to a single stamp.
  stamps.erase(std::unique(stamps.begin(), stamps.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-9; }),
               stamps.end());

  const double overlap = std::min(stamps.back(), gt_times.back()) -
                         std::max(stamps.front(), gt_times.front());
  if (overlap < kMinOverlapSeconds || stamps.size() < 3) {
    throw Error(ErrorCode::kInsufficientOverlap,
                "only " + std::to_string(std::max(0.0, overlap)) + " s of overlap");
  }

  const double epoch = gt_times.front();
  std::vector<double> grid(stamps.size());
  double k = std::round((stamps[0] - epoch) * nominal_rate_hz);
  grid[0] = k / nominal_rate_hz;
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    k += std::round((stamps[i] - stamps[i - 1]) * nominal_rate_hz);
    grid[i] = k / nominal_rate_hz;
  }

  // stamp = alpha + beta * grid, fitted about the means.
  const double n = static_cast<double>(stamps.size());
  const double mean_g = std::accumulate(grid.begin(), grid.end(), 0.0) / n;
  const double mean_s = std::accumulate(stamps.begin(), stamps.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    sxy += (grid[i] - mean_g) * (stamps[i] - mean_s);
    sxx += (grid[i] - mean_g) * (grid[i] - mean_g);
  }
  const double beta = sxy / sxx;
  const double alpha = mean_s - beta * mean_g;
  // stamp = (epoch + grid)(1 + drift) + offset
  return {alpha - beta * epoch, beta - 1.0};
}

std::vector<TimedPose> groundtruth_from_records(std::span<const Record> records) {
  std::vector<TimedPose> gt;
  for (const Record& r : records) {
    if (const auto* p = std::get_if<GtPayload>(&r.payload)) {
      gt.push_back({r.t, Pose{p->x, p->y, p->phi}});
    }
  }
  std::stable_sort(gt.begin(), gt.end(),
                   [](const TimedPose& a, const TimedPose& b) { return a.t < b.t; });
  return gt;
}

std::optional<Pose> interpolate_pose(std::span<const TimedPose> gt, double t) {
  if (gt.empty() || t < gt.front().t || t > gt.back().t) return std::nullopt;
  auto hi = std::upper_bound(gt.begin(), gt.end(), t,
                             [](double value, const TimedPose& p) { return value < p.t; });
  if (hi == gt.end()) return gt.back().pose;
  const TimedPose& b = *hi;
  const TimedPose& a = *(hi - 1);
  const double w = (t - a.t) / (b.t - a.t);
  return Pose{a.pose.x + w * (b.pose.x - a.pose.x), a.pose.y + w * (b.pose.y - a.pose.y),
              a.pose.phi + w * shortest_arc(a.pose.phi, b.pose.phi)}
      .normalized();
}

LabelingResult label_with_groundtruth(std::span<const Record> records,
                                      std::span<const TimedPose> gt, const SensorOffset& offset,
                                      const FeatureLayout& layout) {
  if (gt.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "no ground-truth poses");
  LabelingResult result;
  if (records.empty()) return result;

  const SensorKind kind = records.front().sensor;
  for (const Record& r : records) {
    if (r.sensor != kind || payload_kind(r.payload) != kind || kind == SensorKind::kGt) {
      throw Error(ErrorCode::kSchemaViolation, "labelling expects records of one sensor modality");
    }
  }
  result.stream.modality = kind;

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].t < records[b].t; });

  const std::size_t dim = layout.modality_dimension(kind);
  const std::size_t anchors = kind == SensorKind::kUwb   ? layout.uwb_ids().size()
                              : kind == SensorKind::kImu ? 0
                                                         : layout.wifi_ids().size();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    const double t = records[order[i]].t;
    while (j < order.size() && records[order[j]].t == t) ++j;
    const std::size_t group = j - i;

    const std::optional<Pose> pose = interpolate_pose(gt, t);
    if (!pose) {
      result.dropped_records += group;
      i = j;
      continue;
    }
    LabeledSample sample;
    sample.t_ref = t;
    sample.modality = kind;
    sample.features.assign(dim, fill_value(kind));
    if (kind == SensorKind::kCsi) std::fill(sample.features.begin(), sample.features.end(), 0.0);
    sample.anchors_present.assign(anchors, false);
    for (std::size_t g = i; g < j; ++g) {
      scatter(records[order[g]], layout, sample.features, sample.anchors_present);
    }
    sample.label = translate_sensor_pose(*pose, offset);
    result.stream.samples.push_back(std::move(sample));
    result.labeled_records += group;
    i = j;
  }
  return result;
}

std::vector<FusionFrame> build_fusion_frames(std::span<const AlignedStream> streams,
                                             const FeatureLayout& layout,
                                             const FrameOptions& options) {
  if (!(options.window_s > 0.0)) throw Error(ErrorCode::kInvalidConfig, "window must be > 0");
  const AlignedStream* anchor = nullptr;
  for (const AlignedStream& s : streams) {
    if (s.modality == options.anchor) anchor = &s;
  }
  std::vector<FusionFrame> frames;
  if (anchor == nullptr) return frames;

  std::vector<std::size_t> cursor(streams.size(), 0);
  const std::size_t W = layout.wifi_ids().size();
  const std::size_t S = layout.subcarriers();
  frames.reserve(anchor->samples.size());
  for (const LabeledSample& a : anchor->samples) {
    FusionFrame frame;
    frame.t_ref = a.t_ref;
    frame.label = a.label;
    frame.features.assign(layout.dimension(), 0.0);
    for (std::size_t si = 0; si < streams.size(); ++si) {
      const auto& samples = streams[si].samples;
      std::size_t& c = cursor[si];
      // Advance to the last sample with t <= t_ref.
      while (c < samples.size() && samples[c].t_ref <= a.t_ref) ++c;
      if (c == 0) continue;
      const LabeledSample& latest = samples[c - 1];
      if (a.t_ref - latest.t_ref > options.window_s) continue;
      const auto& f = latest.features;
      auto put = [&](Block b, std::size_t from) {
        std::copy_n(f.begin() + static_cast<std::ptrdiff_t>(from), layout.block_size(b),
                    frame.features.begin() + static_cast<std::ptrdiff_t>(layout.block_offset(b)));
        frame.mask[static_cast<std::size_t>(b)] = 1.0;
      };
      switch (streams[si].modality) {
        case SensorKind::kCsi:
          put(Block::kCsiMagnitude, 0);
          put(Block::kCsiPhase, W * S);
          break;
        case SensorKind::kRssi: put(Block::kRssi, 0); break;
        case SensorKind::kUwb: put(Block::kUwb, 0); break;
        case SensorKind::kImu: put(Block::kImu, 0); break;
        case SensorKind::kGt: break;
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<double> select_features(const FusionFrame& frame, const FeatureLayout& layout,
                                    std::span<const Block> blocks) {
  std::vector<double> out;
  for (Block b : blocks) {
    const auto begin = frame.features.begin() + static_cast<std::ptrdiff_t>(layout.block_offset(b));
    out.insert(out.end(), begin, begin + static_cast<std::ptrdiff_t>(layout.block_size(b)));
  }
  for (Block b : blocks) out.push_back(frame.mask[static_cast<std::size_t>(b)]);
  return out;
}

std::string serialize_frame(const FusionFrame& frame) {
  nlohmann::ordered_json j;
  j["t"] = frame.t_ref;
  j["features"] = frame.features;
  j["mask"] = frame.mask;
  j["label"] = {frame.label.x, frame.label.y};
  return j.dump();
}

FusionFrame parse_frame(std::string_view line, const FeatureLayout& layout) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedLine, e.what());
  }
  try {
    FusionFrame frame;
    frame.t_ref = j.at("t").get<double>();
    frame.features = j.at("features").get<std::vector<double>>();
    frame.mask = j.at("mask").get<std::array<double, 5>>();
    const auto label = j.at("label").get<std::array<double, 2>>();
    frame.label = {label[0], label[1]};
    if (frame.features.size() != layout.dimension() || j.size() != 4) {
      throw Error(ErrorCode::kSchemaViolation, "frame does not match the feature layout");
    }
    return frame;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what());
  }
}

void write_frames_file(const std::string& path, const std::vector<FusionFrame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  for (const FusionFrame& f : frames) out << serialize_frame(f) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

std::vector<FusionFrame> read_frames_file(const std::string& path, const FeatureLayout& layout) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<FusionFrame> frames;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) frames.push_back(parse_frame(line, layout));
  }
  return frames;
}

}  // namespace ips
