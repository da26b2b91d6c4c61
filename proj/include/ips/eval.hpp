#pragma once

// Distance-error CDFs, percentile reports, the cross-session
// generalisation run and CDF plot output.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ips/ingest.hpp"
#include "ips/model.hpp"
#include "ips/neural.hpp"

namespace ips {

using TimedPosition = std::pair<double, Position2D>;

struct ErrorReport {
  std::vector<double> errors;                    // ascending, metres
  std::vector<std::pair<double, double>> cdf;    // (error, fraction <= error) at distinct errors
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

/// Value at rank ceil(p * n) of an ascending sample. Throws kEmpty.
double nearest_rank(std::span<const double> sorted, double p);

/// Report over raw errors (any order). Throws kEmpty.
ErrorReport report_from_errors(std::vector<double> errors);

/// Pairs estimates with labels by position in the lists. Throws
/// kLengthMismatch for different lengths or timestamps, kEmpty.
ErrorReport error_report(std::span<const TimedPosition> estimates,
                         std::span<const TimedPosition> labels);

/// p99 <= threshold under the nearest-rank definition (fraction selects the rank).
bool meets_requirement(const ErrorReport& report, double threshold_m = 1.0,
                       double fraction = 0.99) noexcept;

/// Read-only view of a frame list that counts element accesses.
class InstrumentedFrames {
 public:
  explicit InstrumentedFrames(std::span<const FusionFrame> frames) : frames_(frames) {}

  std::size_t size() const noexcept { return frames_.size(); }
  const FusionFrame& operator[](std::size_t i) const {
    ++accesses_;
    return frames_[i];
  }
  std::size_t accesses() const noexcept { return accesses_; }

 private:
  std::span<const FusionFrame> frames_;
  mutable std::size_t accesses_ = 0;
};

struct GeneralizationConfig {
  std::vector<Block> blocks;                                   // network input
  std::vector<std::size_t> hidden = MlpConfig::default_hidden();
  MlpConfig mlp;                                               // layer_sizes is derived
  bool per_block = false;                                      // also train one net per block
};

struct BlockReport {
  std::string name;
  ErrorReport self;
  ErrorReport transfer;
};

struct GeneralizationReport {
  ErrorReport self;       // test split of A
  ErrorReport transfer;   // all of B
  std::vector<BlockReport> per_block;
  std::size_t b_accesses_before_evaluation = 0;
};

/// Trains on `train_a` only (including normalisation), reports on
/// `test_a` and on every frame of `frames_b`. Throws kLayoutMismatch when
/// the layouts differ, kTooFewFrames for an empty training split.
GeneralizationReport run_generalization(std::span<const FusionFrame> train_a,
                                        std::span<const FusionFrame> test_a,
                                        const InstrumentedFrames& frames_b,
                                        const FeatureLayout& layout_a,
                                        const FeatureLayout& layout_b,
                                        const GeneralizationConfig& config);

/// Network examples from frames restricted to `blocks`.
std::vector<Example> frames_to_examples(std::span<const FusionFrame> frames,
                                        const FeatureLayout& layout, std::span<const Block> blocks);

struct PlotOptions {
  bool log_x = false;
  std::string title = "CDF of the distance error";
};

using NamedReport = std::pair<std::string, ErrorReport>;

/// Writes `csv_path` (series,error_m,fraction) and a standalone SVG.
/// Throws kEmpty without reports, kIoError on write failure.
void emit_plot(std::span<const NamedReport> reports, const std::string& csv_path,
               const std::string& svg_path, const PlotOptions& options = {});

std::string cdf_csv(std::span<const NamedReport> reports);
std::string cdf_svg(std::span<const NamedReport> reports, const PlotOptions& options = {});

/// Inverse of cdf_csv(): series in first-appearance order.
std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> parse_cdf_csv(
    const std::string& text);

nlohmann::ordered_json report_to_json(const ErrorReport& report, bool include_errors = false);
nlohmann::ordered_json generalization_to_json(const GeneralizationReport& report);

}  // namespace ips
