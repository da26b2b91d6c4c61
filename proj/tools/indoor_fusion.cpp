// indoor-fusion: simulate, ingest, calibrate, run and plot.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ips/error.hpp"
#include "ips/eval.hpp"
#include "ips/fingerprint.hpp"
#include "ips/pipeline.hpp"
#include "ips/record_io.hpp"
#include "ips/scenario_io.hpp"
#include "ips/simulator.hpp"

namespace fs = std::filesystem;
using namespace ips;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError:
    case ErrorCode::kMalformedLine:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kNegativeTime:
      return kExitIo;
    case ErrorCode::kDivergence:
    case ErrorCode::kCollinearAnchors:
    case ErrorCode::kTooFewAnchors:
      return kExitNumerical;
    default:
      return kExitUsage;
  }
}

struct Settings {
  std::uint64_t seed = 42;
  double duration = 600.0;
  std::string out = ".";
  std::string data;
  std::string config;
  std::string methods;
  bool transfer = false;
  bool noiseless = false;
  double rssi_attenuation = 20.0;
  double window = 0.15;
  double grid = 0.25;
  std::size_t k = 3;
  std::size_t epochs = 60;
  double lr = 1e-3;
  std::size_t batch = 64;
  std::string hidden = "256,128,64";
  std::uint64_t split_seed = 7;
  bool log_x = false;
  std::string csv;
};

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_hidden(const std::string& s) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(s, ',')) {
    try {
      std::size_t pos = 0;
      const unsigned long v = std::stoul(item, &pos);
      if (pos != item.size() || v == 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidConfig, "bad hidden layer size '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidConfig, "need at least one hidden layer");
  return out;
}

/// Config-file values fill every option that was not given on the command line.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config file " + path);
  std::stringstream text;
  text << in.rdbuf();
  for (const auto& [key, value] : parse_config_text(text.str())) {
    CLI::Option* opt = nullptr;
    try {
      opt = cmd.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") {
        opt->add_result(std::string("true"));
      } else if (value != "false" && value != "0") {
        throw Error(ErrorCode::kInvalidConfig, "config key '" + key + "' expects true/false");
      }
    } else {
      opt->add_result(value);
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw Error(ErrorCode::kInvalidConfig, "config key '" + key + "': " + e.what());
    }
  }
}

std::string data_dir(const Settings& s) { return s.data.empty() ? s.out : s.data; }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::kIoError, "cannot create directory " + dir);
}

DatasetManifest load_manifest(const std::string& dir) {
  return manifest_from_json(read_json_file((fs::path(dir) / "scenario.json").string()));
}

PreparedDataset load_prepared(const std::string& dir, const std::string& file,
                              const Scenario& scenario, const SimConfig& config,
                              const Settings& s) {
  const auto records =
      read_records_file((fs::path(dir) / file).string(), RecordSchema{scenario.subcarriers});
  PrepareOptions options;
  options.frames.window_s = s.window;
  return prepare_dataset(records, scenario, config.rates, options);
}

int cmd_simulate(const Settings& s) {
  if (!(s.duration > 0.0)) throw Error(ErrorCode::kInvalidConfig, "--duration must be > 0");
  ensure_dir(s.out);
  DatasetManifest m;
  m.seed = s.seed;
  m.dataset1 = build_scenario(s.seed);
  m.perturbation = Perturbation::second_session();
  m.dataset2 = perturb_scenario(m.dataset1, m.perturbation, s.seed);
  m.config1.duration_s = s.duration;
  m.config1.rssi_attenuation_db = s.rssi_attenuation;
  if (s.noiseless) m.config1.noise = NoiseConfig::none();
  m.config1.validate();
  m.config2 = m.config1;
  m.config2.noise_seed = 1;

  const Trajectory traj1 = generate_trajectory(m.dataset1, m.config1.duration_s, m.config1.speed_mps,
                                               m.config1.rates.gt, m.config1.trajectory);
  const Trajectory traj2 = generate_trajectory(m.dataset2, m.config2.duration_s, m.config2.speed_mps,
                                               m.config2.rates.gt, m.config2.trajectory);
  const auto rec1 = sample_sensors(m.dataset1, m.config1, traj1);
  const auto rec2 = sample_sensors(m.dataset2, m.config2, traj2);
  write_records_file((fs::path(s.out) / "dataset1.jsonl").string(), rec1);
  write_records_file((fs::path(s.out) / "dataset2.jsonl").string(), rec2);
  write_json_file((fs::path(s.out) / "scenario.json").string(), manifest_to_json(m));
  std::printf("wrote %zu + %zu records to %s\n", rec1.size(), rec2.size(), s.out.c_str());
  return kExitOk;
}

int cmd_ingest(const Settings& s) {
  const std::string dir = data_dir(s);
  const DatasetManifest m = load_manifest(dir);
  ensure_dir(s.out);
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  const std::pair<const char*, const char*> files[] = {{"dataset1.jsonl", "frames1.jsonl"},
                                                       {"dataset2.jsonl", "frames2.jsonl"}};
  for (std::size_t i = 0; i < 2; ++i) {
    const Scenario& sc = i == 0 ? m.dataset1 : m.dataset2;
    const SimConfig& cfg = i == 0 ? m.config1 : m.config2;
    const PreparedDataset d = load_prepared(dir, files[i].first, sc, cfg, s);
    write_frames_file((fs::path(s.out) / files[i].second).string(), d.frames);
    summary.push_back({{"dataset", files[i].first},
                       {"frames", d.frames.size()},
                       {"dropped_records", d.dropped_records},
                       {"clock_uwb", {{"offset_s", d.uwb_clock.offset}, {"drift", d.uwb_clock.drift}}},
                       {"clock_wifi", {{"offset_s", d.wifi_clock.offset}, {"drift", d.wifi_clock.drift}}},
                       {"clock_imu", {{"offset_s", d.imu_clock.offset}, {"drift", d.imu_clock.drift}}}});
    std::printf("%s: %zu frames, %zu records outside ground truth\n", files[i].first,
                d.frames.size(), d.dropped_records);
  }
  write_json_file((fs::path(s.out) / "ingest.json").string(), summary);
  return kExitOk;
}

int cmd_calibrate(const Settings& s) {
  const std::string dir = data_dir(s);
  const DatasetManifest m = load_manifest(dir);
  const PreparedDataset d = load_prepared(dir, "dataset1.jsonl", m.dataset1, m.config1, s);
  const RssiCalibration cal = calibrate_rssi_offset(d.rssi.samples, m.dataset1.wifi_anchors,
                                                    m.dataset1.path_loss);
  nlohmann::ordered_json j{{"beta_db", cal.beta}};
  nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
  for (const auto& [beta, median] : cal.sweep_errors) {
    sweep.push_back({{"beta_db", beta}, {"median_error_m", median}});
  }
  j["sweep"] = sweep;
  ensure_dir(s.out);
  write_json_file((fs::path(s.out) / "calibration.json").string(), j);
  std::printf("beta = %g dB\n", cal.beta);
  return kExitOk;
}

int cmd_run(const Settings& s) {
  std::vector<MethodSpec> specs;
  const std::vector<std::string> names =
      s.methods.empty() ? default_methods() : split_list(s.methods, ',');
  for (const std::string& name : names) {
    const auto spec = parse_method(name);
    if (!spec) {
      throw Error(ErrorCode::kInvalidConfig,
                  "unknown method '" + name + "'; valid methods: " + valid_methods_help());
    }
    specs.push_back(*spec);
  }
  if (specs.empty()) throw Error(ErrorCode::kInvalidConfig, "no methods selected");

  RunOptions options;
  options.grid_m = s.grid;
  options.k = s.k;
  options.transfer = s.transfer;
  options.hidden = parse_hidden(s.hidden);
  options.mlp.epochs = s.epochs;
  options.mlp.learning_rate = s.lr;
  options.mlp.batch_size = s.batch;
  options.mlp.seed = s.seed;
  options.split.shuffle_seed = s.split_seed;
  options.threads = thread_limit_from_env();
  if (!(s.grid > 0.0) || s.k == 0) throw Error(ErrorCode::kInvalidConfig, "--grid and --k must be > 0");
  MlpConfig probe = MlpConfig::for_input(1, options.hidden);
  probe.learning_rate = s.lr;
  probe.batch_size = s.batch;
  probe.validate();

  const std::string dir = data_dir(s);
  const DatasetManifest m = load_manifest(dir);
  const PreparedDataset a = load_prepared(dir, "dataset1.jsonl", m.dataset1, m.config1, s);
  std::optional<PreparedDataset> b;
  if (s.transfer) b = load_prepared(dir, "dataset2.jsonl", m.dataset2, m.config2, s);

  const auto results = run_methods(specs, a, b ? &*b : nullptr, options);

  nlohmann::ordered_json report;
  report["config"] = {{"seed", s.seed},
                      {"data", dir},
                      {"methods", names},
                      {"transfer", s.transfer},
                      {"window", s.window},
                      {"grid", s.grid},
                      {"k", s.k},
                      {"epochs", s.epochs},
                      {"lr", s.lr},
                      {"batch", s.batch},
                      {"hidden", options.hidden},
                      {"split_seed", s.split_seed},
                      {"train_fraction", options.split.train_fraction},
                      {"threads", options.threads},
                      {"scenario_seed", m.seed}};
  report["frames"] = a.frames.size();
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  std::vector<NamedReport> series;
  for (const MethodResult& r : results) {
    list.push_back(method_result_to_json(r));
    if (!r.error.empty()) {
      std::fprintf(stderr, "method %s failed: %s\n", r.name.c_str(), r.error.c_str());
      continue;
    }
    if (r.self) series.emplace_back(r.name, *r.self);
    if (r.transfer) series.emplace_back(r.name + " (transfer)", *r.transfer);
    std::printf("%-22s p50 %.3f m  p95 %.3f m  p99 %.3f m", r.name.c_str(), r.self->p50,
                r.self->p95, r.self->p99);
    if (r.transfer) std::printf("  | transfer p50 %.3f m", r.transfer->p50);
    std::printf("\n");
  }
  report["methods"] = list;

  ensure_dir(s.out);
  write_json_file((fs::path(s.out) / "report.json").string(), report);
  if (!series.empty()) {
    PlotOptions plot;
    plot.log_x = s.log_x;
    emit_plot(series, (fs::path(s.out) / "cdf.csv").string(), (fs::path(s.out) / "cdf.svg").string(),
              plot);
  }
  return kExitOk;
}

int cmd_plot(const Settings& s) {
  const std::string csv = s.csv.empty() ? (fs::path(data_dir(s)) / "cdf.csv").string() : s.csv;
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + csv);
  std::stringstream text;
  text << in.rdbuf();
  std::vector<NamedReport> reports;
  for (auto& [name, cdf] : parse_cdf_csv(text.str())) {
    ErrorReport r;
    r.cdf = std::move(cdf);
    reports.emplace_back(name, std::move(r));
  }
  if (reports.empty()) throw Error(ErrorCode::kEmpty, "no series in " + csv);
  PlotOptions plot;
  plot.log_x = s.log_x;
  ensure_dir(s.out);
  const std::string svg = (fs::path(s.out) / "cdf.svg").string();
  std::ofstream out(svg);
  out << cdf_svg(reports, plot);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + svg);
  std::printf("wrote %s\n", svg.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indoor positioning toolkit: multi-sensor simulation, alignment, localization and fusion"};
  app.require_subcommand(1);
  Settings s;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--out", s.out, "Output directory");
    cmd->add_option("--config", s.config, "key=value file; flags take precedence");
  };
  auto data_opts = [&](CLI::App* cmd) {
    cmd->add_option("--data", s.data, "Directory holding the simulated datasets (default: --out)");
    cmd->add_option("--window", s.window, "Frame alignment window [s]");
  };

  CLI::App* sim = app.add_subcommand("simulate", "Generate dataset1/dataset2 and scenario.json");
  common(sim);
  sim->add_option("--seed", s.seed, "Scenario seed");
  sim->add_option("--duration", s.duration, "Session length [s]");
  sim->add_flag("--noiseless", s.noiseless, "Disable all measurement noise");
  sim->add_option("--rssi-attenuation", s.rssi_attenuation, "RSSI miscalibration [dB]");

  CLI::App* ing = app.add_subcommand("ingest", "Clock-correct, label and write fusion frames");
  common(ing);
  data_opts(ing);

  CLI::App* cal = app.add_subcommand("calibrate", "Sweep the RSSI offset on dataset1");
  common(cal);
  data_opts(cal);

  CLI::App* run = app.add_subcommand("run", "Run localization methods and write reports");
  common(run);
  data_opts(run);
  run->add_option("--seed", s.seed, "Network seed");
  run->add_option("--methods", s.methods, "Comma-separated methods: " + valid_methods_help());
  run->add_flag("--transfer", s.transfer, "Also evaluate on dataset2");
  run->add_option("--grid", s.grid, "Fingerprint grid resolution [m]");
  run->add_option("--k", s.k, "Fingerprint neighbours");
  run->add_option("--epochs", s.epochs, "Training epochs");
  run->add_option("--lr", s.lr, "Learning rate");
  run->add_option("--batch", s.batch, "Mini-batch size");
  run->add_option("--hidden", s.hidden, "Hidden layer sizes, comma-separated");
  run->add_option("--split-seed", s.split_seed, "Train/test shuffle seed");
  run->add_flag("--log-x", s.log_x, "Logarithmic error axis");

  CLI::App* plot = app.add_subcommand("plot", "Render cdf.csv as SVG");
  common(plot);
  plot->add_option("--data", s.data, "Directory holding cdf.csv (default: --out)");
  plot->add_option("--csv", s.csv, "CDF file to render");
  plot->add_flag("--log-x", s.log_x, "Logarithmic error axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    if (!s.config.empty()) apply_config_file(*cmd, s.config);
    if (cmd == sim) return cmd_simulate(s);
    if (cmd == ing) return cmd_ingest(s);
    if (cmd == cal) return cmd_calibrate(s);
    if (cmd == run) return cmd_run(s);
    return cmd_plot(s);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
}
