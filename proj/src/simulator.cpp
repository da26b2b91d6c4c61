#include "ips/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <set>
#include <tuple>

#include "ips/error.hpp"

namespace ips {
namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kMinPathLength = 0.1;

// Independent, reproducible RNG streams keyed by purpose.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t salt, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

enum Stream : std::uint64_t {
  kLayoutStream = 1,
  kUwbStream,
  kRssiStream,
  kCsiStream,
  kImuStream,
  kJitterStream,
  kPhaseStream,
};

void check_anchors(const std::vector<Anchor>& anchors, const Bounds& bounds,
                   std::set<std::string>& ids) {
  for (const Anchor& a : anchors) {
    if (!std::isfinite(a.position.x) || !std::isfinite(a.position.y) ||
        !bounds.contains(a.position)) {
      throw Error(ErrorCode::kInvalidOverride,
                  "anchor '" + a.id + "' lies outside the " + std::to_string(bounds.width) +
                      " x " + std::to_string(bounds.height) + " m bounds");
    }
    if (!ids.insert(a.id).second) {
      throw Error(ErrorCode::kInvalidOverride, "duplicate anchor id '" + a.id + "'");
    }
  }
}

Position2D clamp_to(const Bounds& b, Position2D p) {
  return {std::clamp(p.x, 0.0, b.width), std::clamp(p.y, 0.0, b.height)};
}

Position2D image_of(const Position2D& a, Wall wall, const Bounds& b) {
  switch (wall) {
    case Wall::kLeft: return {-a.x, a.y};
    case Wall::kRight: return {2.0 * b.width - a.x, a.y};
    case Wall::kBottom: return {a.x, -a.y};
    case Wall::kTop: return {a.x, 2.0 * b.height - a.y};
    case Wall::kDirect: break;
  }
  return a;
}

Position2D lever_arm(const Pose& pose, const SensorOffset& offset) {
  const double r = std::hypot(offset.x_off, offset.y_off);
  const double bearing = pose.phi + offset.phi_off;
  return {pose.x + r * std::cos(bearing), pose.y + r * std::sin(bearing)};
}

// Lawnmower path, parametrised by arc length over one up-and-down cycle.
class SweepPath {
 public:
  SweepPath(const Bounds& bounds, const TrajectoryOptions& options)
      : radius_(options.lane_spacing_m / 2.0) {
    const double usable_h = bounds.height - 2.0 * options.margin_m;
    const std::size_t lanes =
        usable_h >= 0.0 ? static_cast<std::size_t>(std::floor(usable_h / options.lane_spacing_m + 1e-9)) + 1
                        : 0;
    x_lo_ = options.margin_m + radius_;
    x_hi_ = bounds.width - options.margin_m - radius_;
    if (lanes < 2 || x_hi_ <= x_lo_) {
      throw Error(ErrorCode::kInvalidConfig, "bounds too small for the sweep pattern");
    }
    for (std::size_t i = 0; i < lanes; ++i) {
      lane_y_.push_back(options.margin_m + static_cast<double>(i) * options.lane_spacing_m);
    }
    for (std::size_t i = 0; i < lanes; ++i) order_.push_back(i);
    for (std::size_t i = lanes - 2; i >= 1; --i) order_.push_back(i);
    step_length_ = (x_hi_ - x_lo_) + kPi * radius_;
  }

  double cycle_length() const { return step_length_ * static_cast<double>(order_.size()); }

  bool on_turn(double s) const {
    const double within = std::fmod(s, step_length_);
    return within >= (x_hi_ - x_lo_);
  }

  Pose at(double s) const {
    s = std::fmod(s, cycle_length());
    const auto step = static_cast<std::size_t>(std::floor(s / step_length_)) % order_.size();
    const double within = s - static_cast<double>(step) * step_length_;
    const double dir = (step % 2 == 0) ? 1.0 : -1.0;
    const double y = lane_y_[order_[step]];
    const double lane_len = x_hi_ - x_lo_;
    const double x_start = dir > 0 ? x_lo_ : x_hi_;
    if (within < lane_len) {
      return {x_start + dir * within, y, dir > 0 ? 0.0 : -kPi};
    }
    const double y_next = lane_y_[order_[(step + 1) % order_.size()]];
    const bool up = y_next > y;
    const double x_end = dir > 0 ? x_hi_ : x_lo_;
    const Position2D center{x_end, 0.5 * (y + y_next)};
    const double sign = dir * (up ? 1.0 : -1.0);
    const double theta0 = up ? -kPi / 2.0 : kPi / 2.0;
    const double theta = theta0 + sign * (within - lane_len) / radius_;
    return Pose{center.x + radius_ * std::cos(theta), center.y + radius_ * std::sin(theta),
                theta + sign * kPi / 2.0}
        .normalized();
  }

 private:
  double radius_;
  double x_lo_ = 0.0;
  double x_hi_ = 0.0;
  double step_length_ = 0.0;
  std::vector<double> lane_y_;
  std::vector<std::size_t> order_;
};

// Bracketing knot interval for t (clamped to the valid range).
std::size_t interval_index(const Trajectory& traj, double t) {
  const auto& s = traj.samples;
  if (s.size() < 2) return 0;
  const double rel = (t - s.front().t) * traj.rate_hz;
  std::size_t j = rel <= 0.0 ? 0 : std::min(static_cast<std::size_t>(rel), s.size() - 2);
  while (j + 2 < s.size() && s[j + 1].t <= t) ++j;
  while (j > 0 && s[j].t > t) --j;
  return j;
}

Position2D interval_velocity(const Trajectory& traj, std::size_t j) {
  const auto& s = traj.samples;
  const double dt = s[j + 1].t - s[j].t;
  return {(s[j + 1].pose.x - s[j].pose.x) / dt, (s[j + 1].pose.y - s[j].pose.y) / dt};
}

double quantize(double v, double step) { return std::round(v / step) * step; }

}  // namespace

std::array<double, 3> MagneticField::at(const Position2D& p) const noexcept {
  std::array<double, 3> b = earth_ut;
  for (const MagneticBump& bump : bumps) {
    const double dx = p.x - bump.center.x;
    const double dy = p.y - bump.center.y;
    const double w = bump_scale * std::exp(-(dx * dx + dy * dy) / (2.0 * bump.sigma_m * bump.sigma_m));
    for (std::size_t i = 0; i < 3; ++i) b[i] += w * bump.amplitude_ut[i];
  }
  return b;
}

Scenario build_scenario(std::uint64_t seed, const ScenarioOverrides& overrides) {
  Scenario sc;
  sc.seed = seed;
  if (overrides.bounds) {
    if (!(overrides.bounds->width > 0.0) || !(overrides.bounds->height > 0.0)) {
      throw Error(ErrorCode::kInvalidOverride, "bounds must be positive");
    }
    sc.bounds = *overrides.bounds;
  }
  const Bounds& b = sc.bounds;
  auto rng = make_rng(seed, 0, kLayoutStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Three ranging anchors roughly on a wide triangle, each nudged by the seed.
  constexpr std::array<std::array<double, 2>, kDefaultUwbAnchors> kUwbLayout{
      {{0.06, 0.08}, {0.94, 0.12}, {0.45, 0.92}}};
  for (std::size_t i = 0; i < kUwbLayout.size(); ++i) {
    const Position2D p{kUwbLayout[i][0] * b.width + 0.4 * (unit(rng) - 0.5),
                       kUwbLayout[i][1] * b.height + 0.4 * (unit(rng) - 0.5)};
    sc.uwb_anchors.push_back({"u" + std::to_string(i), AnchorKind::kUwb, clamp_to(b, p)});
  }
  const double m = std::min({0.3, b.width / 4.0, b.height / 4.0});
  for (std::size_t i = 0; i < kDefaultWifiAnchors; ++i) {
    const Position2D p{m + (b.width - 2.0 * m) * unit(rng), m + (b.height - 2.0 * m) * unit(rng)};
    sc.wifi_anchors.push_back(
        {(i < 10 ? "w0" : "w") + std::to_string(i), AnchorKind::kWifi, p});
  }

  for (std::size_t i = 0; i < kDefaultWifiAnchors; ++i) {
    std::vector<Ray> rays{{Wall::kDirect, 1.0, 0.0}};
    const auto skipped = static_cast<int>(unit(rng) * 4.0) % 4;
    for (int w = 0; w < 4; ++w) {
      const double gain = 0.3 + 0.4 * unit(rng);
      const double extra = 1.0 * unit(rng);
      if (w != skipped) rays.push_back({static_cast<Wall>(w), gain, extra});
    }
    sc.multipath.push_back(std::move(rays));
    sc.session_phase.push_back(2.0 * kPi * unit(rng));
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < kMagneticBumps; ++i) {
    MagneticBump bump;
    bump.center = {b.width * unit(rng), b.height * unit(rng)};
    bump.sigma_m = 0.6 + 0.9 * unit(rng);
    std::array<double, 3> dir{gauss(rng), gauss(rng), gauss(rng)};
    const double norm = std::max(1e-9, std::hypot(dir[0], dir[1], dir[2]));
    for (std::size_t k = 0; k < 3; ++k) bump.amplitude_ut[k] = 20.0 * dir[k] / norm;
    sc.magnetic_field.bumps.push_back(bump);
  }

  if (overrides.uwb_anchors) sc.uwb_anchors = *overrides.uwb_anchors;
  if (overrides.wifi_anchors) {
    sc.wifi_anchors = *overrides.wifi_anchors;
    // Ray lists and session phases are per wifi anchor; resize deterministically.
    sc.multipath.resize(sc.wifi_anchors.size(), std::vector<Ray>{{Wall::kDirect, 1.0, 0.0}});
    sc.session_phase.resize(sc.wifi_anchors.size(), 0.0);
  }
  if (overrides.subcarriers) sc.subcarriers = *overrides.subcarriers;
  if (overrides.path_loss) sc.path_loss = *overrides.path_loss;
  if (overrides.sensor_offsets) sc.sensor_offsets = *overrides.sensor_offsets;

  if (sc.subcarriers == 0) throw Error(ErrorCode::kInvalidOverride, "subcarriers must be >= 1");
  if (!(sc.path_loss.exponent > 0.0) || !(sc.path_loss.d0_m > 0.0)) {
    throw Error(ErrorCode::kInvalidOverride, "path loss needs n > 0 and d0 > 0");
  }
  std::set<std::string> ids;
  check_anchors(sc.uwb_anchors, b, ids);
  check_anchors(sc.wifi_anchors, b, ids);
  return sc;
}

Pose Trajectory::pose_at(double t) const {
  if (samples.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "trajectory has no samples");
  if (t <= samples.front().t) return samples.front().pose;
  if (t >= samples.back().t) return samples.back().pose;
  const std::size_t j = interval_index(*this, t);
  const TimedPose& a = samples[j];
  const TimedPose& b = samples[j + 1];
  const double alpha = (t - a.t) / (b.t - a.t);
  return Pose{a.pose.x + alpha * (b.pose.x - a.pose.x), a.pose.y + alpha * (b.pose.y - a.pose.y),
              a.pose.phi + alpha * shortest_arc(a.pose.phi, b.pose.phi)}
      .normalized();
}

Trajectory generate_trajectory(const Scenario& scenario, double duration_s, double speed_mps,
                               double rate_hz, const TrajectoryOptions& options) {
  if (!(duration_s > 0.0) || !(speed_mps > 0.0) || !(rate_hz > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "duration, speed and rate must be positive");
  }
  const SweepPath path(scenario.bounds, options);
  const auto count = static_cast<std::size_t>(std::ceil(duration_s * rate_hz - 1e-9));
  Trajectory traj;
  traj.rate_hz = rate_hz;
  traj.samples.reserve(count);
  double s = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    traj.samples.push_back({static_cast<double>(k) / rate_hz, path.at(s)});
    const double factor = path.on_turn(s) ? options.turn_speed_factor : 1.0;
    s += speed_mps * factor / rate_hz;
  }
  return traj;
}

NoiseConfig NoiseConfig::none() noexcept {
  NoiseConfig n;
  n.uwb_sigma_m = 0.0;
  n.uwb_nlos_prob = 0.0;
  n.uwb_nlos_bias_m = 0.0;
  n.uwb_dropout_prob = 0.0;
  n.uwb_power_sigma_db = 0.0;
  n.rssi_sigma_db = 0.0;
  n.csi_magnitude_sigma = 0.0;
  n.csi_phase_sigma_rad = 0.0;
  n.csi_gain_sigma_db = 0.0;
  n.imu_accel_sigma = 0.0;
  n.imu_gyro_sigma = 0.0;
  n.mag_sigma_ut = 0.0;
  return n;
}

void SimConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) fail("duration must be > 0");
  if (!(speed_mps > 0.0) || !std::isfinite(speed_mps)) fail("speed must be > 0");
  for (double r : {rates.gt, rates.csi, rates.uwb, rates.imu}) {
    if (!(r > 0.0) || !std::isfinite(r)) fail("rates must be > 0");
  }
  for (double p : {noise.uwb_nlos_prob, noise.uwb_dropout_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must lie in [0, 1]");
  }
  for (double s : {noise.uwb_sigma_m, noise.uwb_power_sigma_db, noise.rssi_sigma_db,
                   noise.csi_magnitude_sigma, noise.csi_phase_sigma_rad, noise.csi_gain_sigma_db,
                   noise.imu_accel_sigma,
                   noise.imu_gyro_sigma, noise.mag_sigma_ut}) {
    if (!(s >= 0.0) || !std::isfinite(s)) fail("noise sigmas must be >= 0");
  }
  for (const ClockModel& c : {clocks.uwb, clocks.wifi, clocks.imu}) {
    if (!std::isfinite(c.offset) || std::abs(c.drift) > 1e-4) fail("clock drift must be <= 1e-4");
  }
  if (!(trajectory.lane_spacing_m > 0.0) || !(trajectory.margin_m >= 0.0) ||
      !(trajectory.turn_speed_factor > 0.0)) {
    fail("invalid trajectory options");
  }
}

Position2D true_sensor_position(const Trajectory& trajectory, const SensorOffset& offset,
                                double t) {
  return lever_arm(trajectory.pose_at(t), offset);
}

CsiSnapshot csi_channel(const Scenario& scenario, std::size_t wifi_index,
                        const Position2D& receiver) {
  const std::size_t S = scenario.subcarriers;
  const Position2D& anchor = scenario.wifi_anchors.at(wifi_index).position;
  const auto& rays = scenario.multipath.at(wifi_index);
  std::vector<std::complex<double>> h(S, {0.0, 0.0});
  for (const Ray& ray : rays) {
    const double len = std::max(
        kMinPathLength, distance(receiver, image_of(anchor, ray.wall, scenario.bounds)) + ray.path_offset_m);
    for (std::size_t k = 0; k < S; ++k) {
      const double df = (static_cast<double>(k) - 0.5 * static_cast<double>(S - 1)) *
                        scenario.subcarrier_spacing_hz;
      h[k] += (ray.gain / len) * std::polar(1.0, -2.0 * kPi * df * len / kSpeedOfLight);
    }
  }
  CsiSnapshot snap;
  snap.magnitudes.reserve(S);
  snap.phases.reserve(S);
  for (const auto& v : h) {
    snap.magnitudes.push_back(std::abs(v));
    snap.phases.push_back(normalize_angle(std::arg(v) + scenario.session_phase.at(wifi_index)));
  }
  return snap;
}

std::vector<double> emission_times(double rate_hz, double duration_s) {
  std::vector<double> times;
  for (std::size_t k = 1;; ++k) {
    const double t = static_cast<double>(k) / rate_hz;
    if (t >= duration_s) break;
    times.push_back(t);
  }
  return times;
}

std::vector<Record> sample_sensors(const Scenario& scenario, const SimConfig& config,
                                   const Trajectory& trajectory) {
  config.validate();
  if (trajectory.samples.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "trajectory has no samples");
  }
  const NoiseConfig& noise = config.noise;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Record> out;

  auto stamp = [](const ClockModel& clock, double t_true) {
    const double t = t_true * (1.0 + clock.drift) + clock.offset;
    if (t < 0.0) throw Error(ErrorCode::kInvalidConfig, "clock offset yields negative timestamps");
    return t;
  };

  for (const TimedPose& knot : trajectory.samples) {
    out.push_back({knot.t, SensorKind::kGt, kGtSourceId,
                   GtPayload{knot.pose.x, knot.pose.y, knot.pose.phi}});
  }

  {
    auto rng = make_rng(scenario.seed, config.noise_seed, kUwbStream);
    for (double t : emission_times(config.rates.uwb, config.duration_s)) {
      const Position2D tag = true_sensor_position(trajectory, scenario.sensor_offsets.uwb, t);
      const double t_rec = stamp(config.clocks.uwb, t);
      for (const Anchor& anchor : scenario.uwb_anchors) {
        // Draws happen unconditionally so streams stay aligned across configs.
        const double u_drop = unit(rng);
        const double u_nlos = unit(rng);
        const double n_range = gauss(rng);
        const double n_power = gauss(rng);
        if (u_drop < noise.uwb_dropout_prob) continue;
        const bool nlos = u_nlos < noise.uwb_nlos_prob;
        const double d = distance(tag, anchor.position);
        const double range =
            std::max(0.0, d + noise.uwb_sigma_m * n_range + (nlos ? noise.uwb_nlos_bias_m : 0.0));
        const double power = -60.0 - 20.0 * std::log10(std::max(d, kMinPathLength)) -
                             (nlos ? 6.0 : 0.0) + noise.uwb_power_sigma_db * n_power;
        out.push_back({t_rec, SensorKind::kUwb, kUwbSourceId, UwbPayload{anchor.id, range, power}});
      }
    }
  }

  {
    auto rssi_rng = make_rng(scenario.seed, config.noise_seed, kRssiStream);
    auto csi_rng = make_rng(scenario.seed, config.noise_seed, kCsiStream);
    const PathLossModel& pl = scenario.path_loss;
    for (double t : emission_times(config.rates.csi, config.duration_s)) {
      const Position2D rx = true_sensor_position(trajectory, scenario.sensor_offsets.wifi, t);
      const double t_rec = stamp(config.clocks.wifi, t);
      for (std::size_t i = 0; i < scenario.wifi_anchors.size(); ++i) {
        const Anchor& anchor = scenario.wifi_anchors[i];
        const double d = std::max(distance(rx, anchor.position), kMinPathLength);
        const double rssi = pl.p0_dbm - 10.0 * pl.exponent * std::log10(d / pl.d0_m) -
                            config.rssi_attenuation_db + noise.rssi_sigma_db * gauss(rssi_rng);
        out.push_back({t_rec, SensorKind::kRssi, kWifiSourceId, RssiPayload{anchor.id, rssi}});

        CsiSnapshot snap = csi_channel(scenario, i, rx);
        const double gain = std::pow(10.0, noise.csi_gain_sigma_db * gauss(csi_rng) / 20.0);
        for (std::size_t k = 0; k < snap.magnitudes.size(); ++k) {
          const double gm = gauss(csi_rng);
          const double gp = gauss(csi_rng);
          // 1e-6 quantisation models the receiver's fixed-point CSI report.
          snap.magnitudes[k] =
              quantize(std::max(0.0, gain * snap.magnitudes[k] * (1.0 + noise.csi_magnitude_sigma * gm)), 1e-6);
          snap.phases[k] =
              quantize(normalize_angle(snap.phases[k] + noise.csi_phase_sigma_rad * gp), 1e-6);
        }
        out.push_back({t_rec, SensorKind::kCsi, kWifiSourceId,
                       CsiPayload{anchor.id, std::move(snap.magnitudes), std::move(snap.phases)}});
      }
    }
  }

  {
    auto rng = make_rng(scenario.seed, config.noise_seed, kImuStream);
    const auto& knots = trajectory.samples;
    for (double t : emission_times(config.rates.imu, config.duration_s)) {
      const Pose pose = trajectory.pose_at(t);
      ImuPayload imu;
      imu.accel = {0.0, 0.0, kGravity};
      if (knots.size() >= 2) {
        const std::size_t last = knots.size() - 2;
        const std::size_t j = t >= knots.back().t ? last : interval_index(trajectory, t);
        const double mid = 0.5 * (knots[j].t + knots[j + 1].t);
        // Acceleration is the finite difference of the interval velocities
        // adjacent to t, evaluated between interval midpoints.
        const std::size_t lo = t < mid ? (j == 0 ? 0 : j - 1) : j;
        const std::size_t hi = t < mid ? j : std::min(j + 1, last);
        const Position2D v_lo = interval_velocity(trajectory, lo);
        const Position2D v_hi = interval_velocity(trajectory, hi);
        const double dt = hi == lo ? 1.0 : 0.5 * (knots[hi + 1].t - knots[lo].t);
        const double ax = hi == lo ? 0.0 : (v_hi.x - v_lo.x) / dt;
        const double ay = hi == lo ? 0.0 : (v_hi.y - v_lo.y) / dt;
        const double c = std::cos(pose.phi);
        const double s = std::sin(pose.phi);
        imu.accel[0] = c * ax + s * ay;
        imu.accel[1] = -s * ax + c * ay;
        if (t < knots.back().t) {
          imu.gyro[2] = shortest_arc(knots[j].pose.phi, knots[j + 1].pose.phi) /
                        (knots[j + 1].t - knots[j].t);
        }
      }
      const Position2D where = lever_arm(pose, scenario.sensor_offsets.imu);
      imu.mag = scenario.magnetic_field.at(where);
      for (std::size_t k = 0; k < 3; ++k) {
        imu.accel[k] += noise.imu_accel_sigma * gauss(rng);
        imu.gyro[k] += noise.imu_gyro_sigma * gauss(rng);
        imu.mag[k] += noise.mag_sigma_ut * gauss(rng);
      }
      out.push_back({stamp(config.clocks.imu, t), SensorKind::kImu, kImuSourceId, imu});
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const Record& a, const Record& b) {
    return std::tie(a.t, a.sensor, a.source_id) < std::tie(b.t, b.sensor, b.source_id);
  });
  return out;
}

Perturbation Perturbation::second_session() noexcept {
  Perturbation p;
  p.sensor_offset_delta = {0.03, 0.02, 0.1};
  p.anchor_jitter_sigma_m = 0.05;
  p.session_phase_reseed = true;
  p.magnetic_drift = 0.05;
  return p;
}

Scenario perturb_scenario(const Scenario& scenario, const Perturbation& perturbation,
                          std::uint64_t seed) {
  Scenario out = scenario;
  const SensorOffset& d = perturbation.sensor_offset_delta;
  for (SensorOffset* o : {&out.sensor_offsets.uwb, &out.sensor_offsets.wifi, &out.sensor_offsets.imu}) {
    o->x_off += d.x_off;
    o->y_off += d.y_off;
    o->phi_off += d.phi_off;
  }
  if (perturbation.anchor_jitter_sigma_m > 0.0) {
    auto rng = make_rng(seed, scenario.seed, kJitterStream);
    std::normal_distribution<double> gauss(0.0, perturbation.anchor_jitter_sigma_m);
    for (auto* anchors : {&out.uwb_anchors, &out.wifi_anchors}) {
      for (Anchor& a : *anchors) {
        a.position = clamp_to(out.bounds, {a.position.x + gauss(rng), a.position.y + gauss(rng)});
      }
    }
  }
  if (perturbation.session_phase_reseed) {
    auto rng = make_rng(seed, scenario.seed, kPhaseStream);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    for (double& p : out.session_phase) p = phase(rng);
  }
  out.magnetic_field.bump_scale *= 1.0 + perturbation.magnetic_drift;
  return out;
}

}  // namespace ips
