#pragma once

// End-to-end orchestration shared by the command-line tool: dataset
// preparation, the method registry and method execution.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ips/eval.hpp"
#include "ips/fingerprint.hpp"
#include "ips/ingest.hpp"
#include "ips/neural.hpp"
#include "ips/simulator.hpp"

namespace ips {

struct PrepareOptions {
  bool estimate_clocks = true;
  FrameOptions frames;
};

struct PreparedDataset {
  Scenario scenario;
  FeatureLayout layout;
  std::vector<TimedPose> groundtruth;
  AlignedStream uwb;
  AlignedStream rssi;
  AlignedStream csi;
  AlignedStream imu;
  std::vector<FusionFrame> frames;
  ClockModel uwb_clock;
  ClockModel wifi_clock;
  ClockModel imu_clock;
  std::size_t dropped_records = 0;

  const AlignedStream& stream(SensorKind kind) const;
};

/// Clock-corrects each sensor board, labels every modality and builds the
/// fusion frames. Throws kEmptyGroundTruth or kInsufficientOverlap.
PreparedDataset prepare_dataset(std::span<const Record> records, const Scenario& scenario,
                                const SensorRates& rates, const PrepareOptions& options = {});

enum class MethodKind { kUwbTrilat, kRssiTrilat, kRssiFingerprint, kCsiFingerprint, kNeural };

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::kNeural;
  std::vector<Block> blocks;  // neural input
};

/// uwb-trilat, rssi-trilat, rssi-fp, csi-fp, nn:<block>, nn-fusion:<block>+<block>...
std::optional<MethodSpec> parse_method(std::string_view name);
std::string valid_methods_help();

/// Methods run when none are requested.
std::vector<std::string> default_methods();

struct RunOptions {
  SplitSpec split;
  MlpConfig mlp;  // layer_sizes is derived per method
  std::vector<std::size_t> hidden = MlpConfig::default_hidden();
  double grid_m = 0.25;
  std::size_t k = 3;
  SweepSpec sweep;
  bool transfer = false;
  std::size_t threads = 1;
};

struct MethodResult {
  std::string name;
  std::optional<ErrorReport> self;
  std::optional<ErrorReport> transfer;
  std::optional<GeneralizationReport> generalization;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
  std::string error;  // set when the method failed
};

/// Runs one method on `a` (and `b` when transfer is requested). Failures
/// are captured in MethodResult::error.
MethodResult run_method(const MethodSpec& spec, const PreparedDataset& a, const PreparedDataset* b,
                        const RunOptions& options);

/// Runs every method with up to options.threads workers; results are ordered by name.
std::vector<MethodResult> run_methods(std::span<const MethodSpec> specs, const PreparedDataset& a,
                                      const PreparedDataset* b, const RunOptions& options);

nlohmann::ordered_json method_result_to_json(const MethodResult& result);

/// Worker cap from INDOOR_FUSION_THREADS, else the hardware concurrency.
std::size_t thread_limit_from_env();

/// Flat key=value text; '#' starts a comment. Throws kInvalidConfig.
std::map<std::string, std::string> parse_config_text(std::string_view text);

}  // namespace ips
