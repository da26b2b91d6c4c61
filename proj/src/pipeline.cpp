#include "ips/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>

#include "ips/error.hpp"
#include "ips/geometry.hpp"

namespace ips {
namespace {

std::vector<Record> select_sensor(std::span<const Record> records, SensorKind kind) {
  std::vector<Record> out;
  for (const Record& r : records) {
    if (r.sensor == kind) out.push_back(r);
  }
  return out;
}

std::vector<Record> select_sensors(std::span<const Record> records, SensorKind a, SensorKind b) {
  std::vector<Record> out;
  for (const Record& r : records) {
    if (r.sensor == a || r.sensor == b) out.push_back(r);
  }
  return out;
}

std::vector<TimedPosition> labels_of(std::span<const LabeledSample> samples) {
  std::vector<TimedPosition> out;
  out.reserve(samples.size());
  for (const LabeledSample& s : samples) out.emplace_back(s.t_ref, s.label);
  return out;
}

std::string_view strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

TrilatResult uwb_fix(const LabeledSample& s, std::span<const Anchor> anchors) {
  std::vector<RangeObservation> obs;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (s.anchors_present.empty() || s.anchors_present[i]) obs.push_back({anchors[i], s.features[i]});
  }
  return localize(obs);
}

ErrorReport evaluate_uwb(const AlignedStream& stream, std::span<const Anchor> anchors,
                         std::size_t* degenerate) {
  std::vector<TimedPosition> estimates;
  estimates.reserve(stream.samples.size());
  for (const LabeledSample& s : stream.samples) {
    const TrilatResult r = uwb_fix(s, anchors);
    if (degenerate != nullptr && r.used_anchors < 3) ++*degenerate;
    estimates.emplace_back(s.t_ref, r.position);
  }
  return error_report(estimates, labels_of(stream.samples));
}

ErrorReport evaluate_rssi_trilat(std::span<const LabeledSample> samples,
                                 std::span<const Anchor> anchors, const PathLossModel& model,
                                 double beta) {
  std::vector<TimedPosition> estimates;
  estimates.reserve(samples.size());
  for (const LabeledSample& s : samples) {
    estimates.emplace_back(s.t_ref, rssi_trilaterate(s, anchors, model, beta).position);
  }
  return error_report(estimates, labels_of(samples));
}

ErrorReport evaluate_fingerprint(const RadioMap& map, std::span<const LabeledSample> samples,
                                 std::size_t k) {
  std::vector<TimedPosition> estimates;
  estimates.reserve(samples.size());
  for (const LabeledSample& s : samples) estimates.emplace_back(s.t_ref, locate(s.features, map, k));
  return error_report(estimates, labels_of(samples));
}

void run_classical(const MethodSpec& spec, const PreparedDataset& a, const PreparedDataset* b,
                   const RunOptions& options, MethodResult& result) {
  switch (spec.kind) {
    case MethodKind::kUwbTrilat: {
      std::size_t degenerate = 0;
      result.self = evaluate_uwb(a.uwb, a.scenario.uwb_anchors, &degenerate);
      result.details["degenerate_fraction"] =
          static_cast<double>(degenerate) / static_cast<double>(a.uwb.samples.size());
      // The anchor survey of the first session is reused for the second.
      if (b != nullptr) result.transfer = evaluate_uwb(b->uwb, a.scenario.uwb_anchors, nullptr);
      return;
    }
    case MethodKind::kRssiTrilat: {
      const auto [train_set, test_set] = split_dataset(a.rssi.samples, options.split);
      const RssiCalibration cal = calibrate_rssi_offset(train_set, a.scenario.wifi_anchors,
                                                        a.scenario.path_loss, options.sweep);
      result.details["beta_db"] = cal.beta;
      nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
      for (const auto& [beta, median] : cal.sweep_errors) sweep.push_back({beta, median});
      result.details["sweep"] = sweep;
      result.self = evaluate_rssi_trilat(test_set, a.scenario.wifi_anchors, a.scenario.path_loss, cal.beta);
      if (b != nullptr) {
        result.transfer = evaluate_rssi_trilat(b->rssi.samples, a.scenario.wifi_anchors,
                                               a.scenario.path_loss, cal.beta);
      }
      return;
    }
    case MethodKind::kRssiFingerprint:
    case MethodKind::kCsiFingerprint: {
      const bool csi = spec.kind == MethodKind::kCsiFingerprint;
      const AlignedStream source = csi ? csi_magnitudes_only(a.csi, a.layout) : a.rssi;
      const auto [train_set, test_set] = split_dataset(source.samples, options.split);
      const RadioMap map = build_map(std::span<const LabeledSample>(train_set), options.grid_m);
      result.details["cells"] = map.cells.size();
      result.self = evaluate_fingerprint(map, test_set, options.k);
      if (b != nullptr) {
        const AlignedStream target = csi ? csi_magnitudes_only(b->csi, b->layout) : b->rssi;
        result.transfer = evaluate_fingerprint(map, target.samples, options.k);
      }
      return;
    }
    case MethodKind::kNeural: break;
  }
}

void run_neural(const MethodSpec& spec, const PreparedDataset& a, const PreparedDataset* b,
                const RunOptions& options, MethodResult& result) {
  const auto [train_frames, test_frames] = split_dataset(a.frames, options.split);
  GeneralizationConfig config;
  config.blocks = spec.blocks;
  config.hidden = options.hidden;
  config.mlp = options.mlp;
  if (b != nullptr) {
    const InstrumentedFrames frames_b(b->frames);
    GeneralizationReport g = run_generalization(train_frames, test_frames, frames_b, a.layout,
                                                b->layout, config);
    result.self = g.self;
    result.transfer = g.transfer;
    result.generalization = std::move(g);
    return;
  }
  const auto train_set = frames_to_examples(train_frames, a.layout, spec.blocks);
  const auto test_set = frames_to_examples(test_frames, a.layout, spec.blocks);
  MlpConfig mlp = options.mlp;
  mlp.layer_sizes = MlpConfig::for_input(train_set.front().features.size(), options.hidden).layer_sizes;
  const TrainResult trained = train(std::span<const Example>(train_set),
                                    std::span<const Example>(test_set), mlp);
  std::vector<TimedPosition> labels;
  for (const Example& e : test_set) labels.emplace_back(e.t, e.label);
  result.self = error_report(predict_stream(trained.model, test_set), labels);
  result.details["best_epoch"] = trained.best_epoch;
  result.details["input_dim"] = train_set.front().features.size();
}

}  // namespace

const AlignedStream& PreparedDataset::stream(SensorKind kind) const {
  switch (kind) {
    case SensorKind::kUwb: return uwb;
    case SensorKind::kRssi: return rssi;
    case SensorKind::kCsi: return csi;
    case SensorKind::kImu: return imu;
    case SensorKind::kGt: break;
  }
  throw Error(ErrorCode::kInvalidConfig, "ground truth has no aligned stream");
}

PreparedDataset prepare_dataset(std::span<const Record> records, const Scenario& scenario,
                                const SensorRates& rates, const PrepareOptions& options) {
  PreparedDataset d;
  d.scenario = scenario;
  d.layout = FeatureLayout::from_scenario(scenario);
  d.groundtruth = groundtruth_from_records(records);
  if (d.groundtruth.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "stream has no gt records");
  const std::vector<Record> gt = select_sensor(records, SensorKind::kGt);

  std::vector<Record> uwb = select_sensor(records, SensorKind::kUwb);
  std::vector<Record> wifi = select_sensors(records, SensorKind::kRssi, SensorKind::kCsi);
  std::vector<Record> imu = select_sensor(records, SensorKind::kImu);
  if (options.estimate_clocks) {
    if (!uwb.empty()) d.uwb_clock = estimate_clock_offset(uwb, gt, rates.uwb);
    if (!wifi.empty()) d.wifi_clock = estimate_clock_offset(wifi, gt, rates.csi);
    if (!imu.empty()) d.imu_clock = estimate_clock_offset(imu, gt, rates.imu);
    uwb = correct_clock(uwb, d.uwb_clock);
    wifi = correct_clock(wifi, d.wifi_clock);
    imu = correct_clock(imu, d.imu_clock);
  }

  const SensorOffsets& off = scenario.sensor_offsets;
  auto label = [&](const std::vector<Record>& recs, const SensorOffset& offset) {
    LabelingResult r = label_with_groundtruth(recs, d.groundtruth, offset, d.layout);
    d.dropped_records += r.dropped_records;
    return std::move(r.stream);
  };
  d.uwb = label(uwb, off.uwb);
  d.rssi = label(select_sensor(wifi, SensorKind::kRssi), off.wifi);
  d.csi = label(select_sensor(wifi, SensorKind::kCsi), off.wifi);
  d.imu = label(imu, off.imu);
  d.uwb.modality = SensorKind::kUwb;
  d.rssi.modality = SensorKind::kRssi;
  d.csi.modality = SensorKind::kCsi;
  d.imu.modality = SensorKind::kImu;

  const std::vector<AlignedStream> streams{d.csi, d.rssi, d.uwb, d.imu};
  d.frames = build_fusion_frames(streams, d.layout, options.frames);
  return d;
}

std::optional<MethodSpec> parse_method(std::string_view name) {
  MethodSpec spec;
  spec.name = std::string(name);
  if (name == "uwb-trilat") {
    spec.kind = MethodKind::kUwbTrilat;
  } else if (name == "rssi-trilat") {
    spec.kind = MethodKind::kRssiTrilat;
  } else if (name == "rssi-fp") {
    spec.kind = MethodKind::kRssiFingerprint;
  } else if (name == "csi-fp") {
    spec.kind = MethodKind::kCsiFingerprint;
  } else if (name.starts_with("nn:")) {
    const auto block = parse_block_name(name.substr(3));
    if (!block) return std::nullopt;
    spec.blocks = {*block};
  } else if (name.starts_with("nn-fusion:")) {
    std::string_view rest = name.substr(10);
    while (true) {
      const auto plus = rest.find('+');
      const auto block = parse_block_name(rest.substr(0, plus));
      if (!block || std::find(spec.blocks.begin(), spec.blocks.end(), *block) != spec.blocks.end()) {
        return std::nullopt;
      }
      spec.blocks.push_back(*block);
      if (plus == std::string_view::npos) break;
      rest = rest.substr(plus + 1);
    }
    if (spec.blocks.size() < 2) return std::nullopt;
  } else {
    return std::nullopt;
  }
  return spec;
}

std::string valid_methods_help() {
  return "uwb-trilat, rssi-trilat, rssi-fp, csi-fp, nn:<block>, nn-fusion:<block>+<block>[+...] "
         "where <block> is one of csi, csi-phase, rssi, uwb, imu";
}

std::vector<std::string> default_methods() {
  return {"uwb-trilat", "rssi-trilat", "rssi-fp", "csi-fp", "nn:csi",
          "nn:rssi",    "nn:uwb",      "nn:imu",  "nn-fusion:csi+imu"};
}

MethodResult run_method(const MethodSpec& spec, const PreparedDataset& a, const PreparedDataset* b,
                        const RunOptions& options) {
  MethodResult result;
  result.name = spec.name;
  try {
    if (spec.kind == MethodKind::kNeural) {
      run_neural(spec, a, options.transfer ? b : nullptr, options, result);
    } else {
      run_classical(spec, a, options.transfer ? b : nullptr, options, result);
    }
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  return result;
}

std::vector<MethodResult> run_methods(std::span<const MethodSpec> specs, const PreparedDataset& a,
                                      const PreparedDataset* b, const RunOptions& options) {
  std::vector<MethodResult> results(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      results[i] = run_method(specs[i], a, b, options);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(1, specs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  std::stable_sort(results.begin(), results.end(),
                   [](const MethodResult& x, const MethodResult& y) { return x.name < y.name; });
  return results;
}

nlohmann::ordered_json method_result_to_json(const MethodResult& result) {
  nlohmann::ordered_json j;
  j["method"] = result.name;
  j["status"] = result.error.empty() ? "ok" : "failed";
  if (!result.error.empty()) j["error"] = result.error;
  if (result.self) j["self"] = report_to_json(*result.self);
  if (result.transfer) j["transfer"] = report_to_json(*result.transfer);
  if (result.generalization) j["generalization"] = generalization_to_json(*result.generalization);
  if (!result.details.empty()) j["details"] = result.details;
  return j;
}

std::size_t thread_limit_from_env() {
  if (const char* env = std::getenv("INDOOR_FUSION_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    throw Error(ErrorCode::kInvalidConfig, "INDOOR_FUSION_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || strip(line.substr(0, eq)).empty()) {
      throw Error(ErrorCode::kInvalidConfig, "config line " + std::to_string(line_no) +
                                                 ": expected key=value");
    }
    out[std::string(strip(line.substr(0, eq)))] = std::string(strip(line.substr(eq + 1)));
  }
  return out;
}

}  // namespace ips
