#pragma once

// Clock correction, ground-truth labelling and fusion-frame assembly.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ips/model.hpp"

namespace ips {

struct Scenario;

/// Feature blocks of a fusion frame, in storage order.
enum class Block : std::uint8_t { kCsiMagnitude, kCsiPhase, kRssi, kUwb, kImu };

inline constexpr std::array<Block, 5> kAllBlocks{Block::kCsiMagnitude, Block::kCsiPhase,
                                                 Block::kRssi, Block::kUwb, Block::kImu};

std::string_view block_name(Block block) noexcept;
std::optional<Block> parse_block_name(std::string_view name) noexcept;

/// Fill values for channels whose anchor did not report in a snapshot.
inline constexpr double kRssiFloorDbm = -100.0;
inline constexpr double kMissingRange = 0.0;

/// Maps feature indices to (block, anchor, channel).
///
/// Frame layout, for U ranging anchors, W wifi anchors and S subcarriers:
///
///   [0, W*S)            csi magnitude, anchor-major: index = a*S + k
///   [W*S, 2*W*S)        csi phase, same ordering
///   next W              rssi per wifi anchor
///   next U              uwb range per ranging anchor
///   last 9              imu: accel xyz, gyro xyz, mag xyz
///
/// Per-modality samples use the same ordering restricted to their blocks:
/// csi samples carry [magnitudes | phases].
class FeatureLayout {
 public:
  struct Channel {
    Block block;
    std::size_t anchor;
    std::size_t channel;

    friend bool operator==(const Channel&, const Channel&) = default;
  };

  FeatureLayout() = default;
  FeatureLayout(std::vector<std::string> uwb_ids, std::vector<std::string> wifi_ids,
                std::size_t subcarriers);
  static FeatureLayout from_scenario(const Scenario& scenario);

  std::size_t block_size(Block block) const noexcept;
  std::size_t block_offset(Block block) const noexcept;
  std::size_t dimension() const noexcept;
  /// Length of a per-modality LabeledSample feature vector.
  std::size_t modality_dimension(SensorKind kind) const;

  std::optional<std::size_t> uwb_index(std::string_view id) const noexcept;
  std::optional<std::size_t> wifi_index(std::string_view id) const noexcept;

  /// Throws kDimensionMismatch when `index` >= dimension().
  Channel describe(std::size_t index) const;

  const std::vector<std::string>& uwb_ids() const noexcept { return uwb_ids_; }
  const std::vector<std::string>& wifi_ids() const noexcept { return wifi_ids_; }
  std::size_t subcarriers() const noexcept { return subcarriers_; }

  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;

 private:
  std::vector<std::string> uwb_ids_;
  std::vector<std::string> wifi_ids_;
  std::size_t subcarriers_ = 0;
};

struct AlignedStream {
  SensorKind modality = SensorKind::kGt;
  std::vector<LabeledSample> samples;  // strictly increasing t_ref
};

struct FusionFrame {
  double t_ref = 0.0;
  std::vector<double> features;      // FeatureLayout::dimension() values
  std::array<double, 5> mask{};      // 1 = block present, indexed like kAllBlocks
  Position2D label;

  bool has(Block b) const noexcept { return mask[static_cast<std::size_t>(b)] != 0.0; }
};

/// t_ref = (t - offset) / (1 + drift). Order is preserved.
std::vector<Record> correct_clock(std::span<const Record> records, const ClockModel& clock);

/// Fits the sender clock against the nominal emission grid k / rate, whose
/// origin is the first ground-truth timestamp. Grid indices are recovered
/// from the timestamps, so |offset| must stay below half a sample period.
/// Throws kInsufficientOverlap for < 10 s of common coverage.
ClockModel estimate_clock_offset(std::span<const Record> sensor_records,
                                 std::span<const Record> gt_records, double nominal_rate_hz);

/// Ground-truth poses from the gt records of a stream, sorted by t.
std::vector<TimedPose> groundtruth_from_records(std::span<const Record> records);

/// Linear position / shortest-arc heading interpolation; nullopt outside
/// the covered span.
std::optional<Pose> interpolate_pose(std::span<const TimedPose> gt, double t);

struct LabelingResult {
  AlignedStream stream;
  std::size_t labeled_records = 0;
  std::size_t dropped_records = 0;
};

/// Groups clock-corrected records of one modality that share a timestamp
/// into one LabeledSample and labels it with the sensor position at that
/// instant. Groups outside the ground-truth span are dropped and counted.
///
/// Throws kEmptyGroundTruth, or kSchemaViolation for mixed modalities and
/// anchors unknown to the layout.
LabelingResult label_with_groundtruth(std::span<const Record> records,
                                      std::span<const TimedPose> gt, const SensorOffset& offset,
                                      const FeatureLayout& layout);

struct FrameOptions {
  double window_s = 0.15;
  SensorKind anchor = SensorKind::kCsi;
};

/// One frame per sample of the anchor stream; every other block holds the
/// most recent sample no older than `window_s` (never a future one).
std::vector<FusionFrame> build_fusion_frames(std::span<const AlignedStream> streams,
                                             const FeatureLayout& layout,
                                             const FrameOptions& options = {});

/// Network input: the chosen blocks' features followed by their masks.
std::vector<double> select_features(const FusionFrame& frame, const FeatureLayout& layout,
                                    std::span<const Block> blocks);

std::string serialize_frame(const FusionFrame& frame);
FusionFrame parse_frame(std::string_view line, const FeatureLayout& layout);
void write_frames_file(const std::string& path, const std::vector<FusionFrame>& frames);
std::vector<FusionFrame> read_frames_file(const std::string& path, const FeatureLayout& layout);

}  // namespace ips
