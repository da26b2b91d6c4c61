// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
//
//   ips-acceptance [path/to/test_properties]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ips/error.hpp"
#include "ips/eval.hpp"
#include "ips/fingerprint.hpp"
#include "ips/geometry.hpp"
#include "ips/ingest.hpp"
#include "ips/neural.hpp"
#include "ips/pipeline.hpp"
#include "ips/simulator.hpp"

namespace {

using namespace ips;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kBenchmarkSeed = 42;
constexpr double kBenchmarkDuration = 600.0;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Session {
  Scenario scenario;
  SimConfig config;
  Trajectory trajectory;
  std::vector<Record> records;
};

Session simulate(const Scenario& scenario, SimConfig config) {
  Session s{scenario, config, {}, {}};
  s.trajectory = generate_trajectory(scenario, config.duration_s, config.speed_mps, config.rates.gt,
                                     config.trajectory);
  s.records = sample_sensors(scenario, config, s.trajectory);
  return s;
}

PreparedDataset prepare(const Session& s) { return prepare_dataset(s.records, s.scenario, s.config.rates); }

// 1. Trilateration exactness.
Outcome trilateration() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  const auto start = Clock::now();
  double worst = 0.0;
  int cases = 0;
  while (cases < 100) {
    const std::vector<Position2D> a{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}};
    const double area2 = std::abs((a[1].x - a[0].x) * (a[2].y - a[0].y) - (a[2].x - a[0].x) * (a[1].y - a[0].y));
    if (area2 < 2.0) continue;
    const Position2D target{u(rng), u(rng)};
    std::vector<RangeObservation> obs;
    for (std::size_t i = 0; i < a.size(); ++i) {
      obs.push_back({Anchor{"a" + std::to_string(i), AnchorKind::kUwb, a[i]}, distance(target, a[i])});
    }
    worst = std::max(worst, distance(trilaterate(obs).position, target));
    ++cases;
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-7 && elapsed < 1.0,
          fmt("100 cases, max error %.3g m (<= 1e-7), %.3f s (< 1 s)", worst, elapsed)};
}

// 2. Sensor-translation closure on a noiseless 600 s run.
Outcome translation_closure() {
  SimConfig cfg;
  cfg.duration_s = kBenchmarkDuration;
  cfg.noise = NoiseConfig::none();
  const Session s = simulate(build_scenario(kBenchmarkSeed), cfg);
  const PreparedDataset d = prepare(s);
  const SensorOffsets& off = s.scenario.sensor_offsets;
  const std::pair<const AlignedStream*, SensorOffset> streams[] = {
      {&d.uwb, off.uwb}, {&d.rssi, off.wifi}, {&d.csi, off.wifi}, {&d.imu, off.imu}};
  double worst = 0.0;
  std::size_t n = 0;
  for (const auto& [stream, offset] : streams) {
    for (const LabeledSample& x : stream->samples) {
      worst = std::max(worst, distance(x.label, true_sensor_position(s.trajectory, offset, x.t_ref)));
      ++n;
    }
  }
  // Independent check: noiseless ranges measured at emission must match the labels.
  double worst_range = 0.0;
  for (const LabeledSample& x : d.uwb.samples) {
    for (std::size_t i = 0; i < s.scenario.uwb_anchors.size(); ++i) {
      if (!x.anchors_present[i]) continue;
      worst_range = std::max(worst_range,
                             std::abs(distance(x.label, s.scenario.uwb_anchors[i].position) - x.features[i]));
    }
  }
  return {n > 0 && worst <= 1e-6 && worst_range <= 1e-6,
          fmt("%zu labelled samples, max error %.3g m vs trajectory, %.3g m vs measured uwb ranges "
              "(<= 1e-6)",
              n, worst, worst_range)};
}

// 3. Backpropagation against central differences.
Outcome gradient_check() {
  const auto start = Clock::now();
  const std::vector<std::vector<std::size_t>> archs{{5, 8, 8, 2}, {3, 12, 2}, {6, 10, 7, 5, 2}, {9, 4, 2}};
  double worst = 0.0;
  std::size_t checked = 0;
  std::uint64_t seed = 1;
  for (const auto& sizes : archs) {
    MlpConfig cfg;
    cfg.layer_sizes = sizes;
    cfg.activation = Activation::kTanh;
    cfg.seed = seed++;
    Mlp mlp = Mlp::initialize(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Example> batch(8);
    for (Example& e : batch) {
      for (std::size_t i = 0; i < sizes.front(); ++i) e.features.push_back(g(rng));
      e.label = {3.0 * g(rng), 3.0 * g(rng)};
    }
    const LossAndGrad lg = loss_and_grad(mlp, batch);
    std::vector<double> analytic;
    for (const DenseLayer& l : lg.gradients.layers) {
      analytic.insert(analytic.end(), l.weights.data(), l.weights.data() + l.weights.size());
      analytic.insert(analytic.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    const std::vector<double> base = mlp.flatten();
    std::uniform_int_distribution<std::size_t> pick(0, base.size() - 1);
    const double eps = 1e-5;
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = pick(rng);
      std::vector<double> p = base;
      p[i] = base[i] + eps;
      mlp.unflatten(p);
      const double up = loss_and_grad(mlp, batch).mse;
      p[i] = base[i] - eps;
      mlp.unflatten(p);
      const double down = loss_and_grad(mlp, batch).mse;
      mlp.unflatten(base);
      const double numeric = (up - down) / (2.0 * eps);
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
      ++checked;
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-6 && elapsed < 10.0,
          fmt("%zu architectures, %zu parameters, max relative error %.3g (<= 1e-6), %.2f s (< 10 s)",
              archs.size(), checked, worst, elapsed)};
}

// 4. RSSI offset calibration sweep.
Outcome rssi_calibration() {
  bool ok = true;
  std::string detail;
  for (double injected : {10.0, 20.0}) {
    SimConfig cfg;
    cfg.duration_s = 120.0;
    cfg.rssi_attenuation_db = injected;
    const Scenario scenario = build_scenario(kBenchmarkSeed);
    const PreparedDataset d = prepare(simulate(scenario, cfg));
    const RssiCalibration c =
        calibrate_rssi_offset(d.rssi.samples, scenario.wifi_anchors, scenario.path_loss);
    const auto best = std::min_element(c.sweep_errors.begin(), c.sweep_errors.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    const bool here = std::abs(c.beta - injected) <= 1.0 && best->first == c.beta;
    ok = ok && here;
    detail += fmt("%sinjected +%.0f dB -> beta %.1f dB (sweep argmin %.1f)", detail.empty() ? "" : "; ",
                  injected, c.beta, best->first);
  }
  return {ok, detail + " (+-1 dB, exact argmin)"};
}

// 5. Clock offset estimation.
Outcome clock_estimation() {
  const Scenario scenario = build_scenario(kBenchmarkSeed);
  double worst_radio = 0.0;
  double worst_imu = 0.0;
  int runs = 0;
  for (double ms : {-10.0, -7.5, -5.0, -2.5, 0.0, 2.5, 5.0, 7.5, 10.0}) {
    SimConfig cfg;
    cfg.duration_s = 60.0;
    const double imu_ms = ms * 0.6;  // +-6 ms: the IMU grid is unambiguous only within half a period
    cfg.clocks = {ClockModel{ms * 1e-3, 0.0}, ClockModel{ms * 1e-3, 0.0}, ClockModel{imu_ms * 1e-3, 0.0}};
    const Session s = simulate(scenario, cfg);
    std::vector<Record> gt, uwb, wifi, imu;
    for (const Record& r : s.records) {
      switch (r.sensor) {
        case SensorKind::kGt: gt.push_back(r); break;
        case SensorKind::kUwb: uwb.push_back(r); break;
        case SensorKind::kCsi: wifi.push_back(r); break;
        case SensorKind::kImu: imu.push_back(r); break;
        default: break;
      }
    }
    worst_radio = std::max(worst_radio, std::abs(estimate_clock_offset(uwb, gt, cfg.rates.uwb).offset - ms * 1e-3));
    worst_radio = std::max(worst_radio, std::abs(estimate_clock_offset(wifi, gt, cfg.rates.csi).offset - ms * 1e-3));
    worst_imu = std::max(worst_imu, std::abs(estimate_clock_offset(imu, gt, cfg.rates.imu).offset - imu_ms * 1e-3));
    ++runs;
  }
  return {worst_radio <= 1e-3 && worst_imu <= 1e-3,
          fmt("%d offsets over 60 s: uwb/wifi in [-10, 10] ms max error %.3g ms, imu in [-6, 6] ms "
              "max error %.3g ms (<= 1 ms)",
              runs, worst_radio * 1e3, worst_imu * 1e3)};
}

struct Benchmark {
  PreparedDataset a;
  Session session_a;
  Scenario scenario_a;
};

RunOptions benchmark_options() {
  RunOptions o;
  o.threads = thread_limit_from_env();
  return o;
}

std::vector<MethodResult> run_named(const std::vector<std::string>& names, const PreparedDataset& a,
                                    const PreparedDataset* b) {
  std::vector<MethodSpec> specs;
  for (const std::string& n : names) specs.push_back(*parse_method(n));
  RunOptions o = benchmark_options();
  o.transfer = b != nullptr;
  return run_methods(specs, a, b, o);
}

const MethodResult& find(const std::vector<MethodResult>& results, const std::string& name) {
  for (const MethodResult& r : results) {
    if (r.name == name) {
      if (!r.error.empty()) throw Error(ErrorCode::kInvalidConfig, name + " failed: " + r.error);
      return r;
    }
  }
  throw Error(ErrorCode::kInvalidConfig, "missing result " + name);
}

// 6. End-to-end synthetic benchmark.
Outcome benchmark(const PreparedDataset& a) {
  const auto start = Clock::now();
  const std::vector<std::string> singles{"nn:csi", "nn:rssi", "nn:uwb", "nn:imu"};
  std::vector<std::string> names = singles;
  names.push_back("nn-fusion:csi+imu");
  names.push_back("uwb-trilat");
  const auto results = run_named(names, a, nullptr);
  double best_single = 1e300;
  std::string best_name;
  std::string medians;
  for (const std::string& n : singles) {
    const double m = find(results, n).self->p50;
    medians += fmt("%s %.3f, ", n.c_str(), m);
    if (m < best_single) {
      best_single = m;
      best_name = n;
    }
  }
  const double fusion = find(results, "nn-fusion:csi+imu").self->p50;
  const ErrorReport& uwb = *find(results, "uwb-trilat").self;
  const double within = static_cast<double>(std::upper_bound(uwb.errors.begin(), uwb.errors.end(), 0.3) -
                                            uwb.errors.begin()) /
                        static_cast<double>(uwb.count);
  const double elapsed = seconds_since(start);
  const bool a_ok = fusion <= best_single;
  const bool b_ok = within >= 0.2;
  return {a_ok && b_ok && elapsed <= 600.0,
          fmt("%zu frames; (a) fusion csi+imu median %.3f m <= best single %s %.3f m [%s]; "
              "(b) uwb-trilat fraction <= 0.3 m = %.3f (>= 0.2); %.0f s (<= 600 s)",
              a.frames.size(), fusion, best_name.c_str(), best_single,
              medians.substr(0, medians.size() - 2).c_str(), within, elapsed)};
}

// 7. Generalisation harness.
Outcome generalization(const Session& sa, const PreparedDataset& a) {
  SimConfig cfg_b = sa.config;
  cfg_b.noise_seed = 1;

  const Scenario same = perturb_scenario(sa.scenario, Perturbation{}, kBenchmarkSeed);
  const PreparedDataset b_same = prepare(simulate(same, cfg_b));
  const auto identity = run_named({"nn:csi"}, a, &b_same);
  const MethodResult& id = find(identity, "nn:csi");
  const double id_ratio = id.transfer->p50 / id.self->p50;

  const Scenario second = perturb_scenario(sa.scenario, Perturbation::second_session(), kBenchmarkSeed);
  const PreparedDataset b_second = prepare(simulate(second, cfg_b));
  const auto reseed = run_named({"nn:csi", "nn:csi-phase"}, a, &b_second);
  const MethodResult& mag = find(reseed, "nn:csi");
  const MethodResult& phase = find(reseed, "nn:csi-phase");
  const double mag_ratio = mag.transfer->p50 / mag.self->p50;
  const double phase_ratio = phase.transfer->p50 / phase.self->p50;

  const bool ok = std::abs(id_ratio - 1.0) <= 0.2 && mag_ratio <= 2.0 && phase_ratio > 2.0;
  return {ok, fmt("identity transfer/self %.3f/%.3f = %.2f (within 20%%); reseed csi magnitude "
                  "%.3f/%.3f = %.2f (<= 2); csi phase %.3f/%.3f = %.2f (> 2)",
                  id.transfer->p50, id.self->p50, id_ratio, mag.transfer->p50, mag.self->p50, mag_ratio,
                  phase.transfer->p50, phase.self->p50, phase_ratio)};
}

// 8. Invariant suites, run as a separate executable.
Outcome invariants(const char* properties_binary) {
  if (properties_binary == nullptr) return {false, "property test binary not given"};
  const auto start = Clock::now();
  const std::string cmd = std::string(properties_binary) + " --gtest_brief=1 > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const double elapsed = seconds_since(start);
  const bool ran = status != -1 && WIFEXITED(status);
  const int code = ran ? WEXITSTATUS(status) : -1;
  return {code == 0 && elapsed < 60.0,
          fmt("property suites exit %d, %.2f s (< 60 s)", code, elapsed)};
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("error: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  const char* properties = argc > 1 ? argv[1] : nullptr;
  int failed = 0;
  auto report = [&](int n, const char* name, const Outcome& o) {
    std::printf("criterion %d %s %s: %s\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };

  report(1, "trilateration exactness", guarded(trilateration));
  report(2, "sensor translation closure", guarded(translation_closure));
  report(3, "gradient check", guarded(gradient_check));
  report(4, "rssi calibration recovery", guarded(rssi_calibration));
  report(5, "clock estimation", guarded(clock_estimation));

  std::optional<Session> sa;
  std::optional<PreparedDataset> a;
  const Outcome setup = guarded([&] {
    SimConfig cfg;
    cfg.duration_s = kBenchmarkDuration;
    cfg.rssi_attenuation_db = 20.0;
    sa = simulate(build_scenario(kBenchmarkSeed), cfg);
    a = prepare(*sa);
    return Outcome{true, ""};
  });
  if (setup.pass) {
    report(6, "end-to-end benchmark", guarded([&] { return benchmark(*a); }));
    report(7, "generalization harness", guarded([&] { return generalization(*sa, *a); }));
  } else {
    report(6, "end-to-end benchmark", setup);
    report(7, "generalization harness", setup);
  }
  report(8, "invariant suites", guarded([&] { return invariants(properties); }));
  std::printf("%d of 8 criteria failed\n", failed);
  return failed;
}
