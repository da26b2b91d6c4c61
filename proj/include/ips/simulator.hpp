#pragma once

// Synthetic measurement campaign: a rectangular floor with UWB and WiFi
// anchors, a robot sweeping it in a lawnmower pattern, and multi-rate,
// clock-skewed sensor streams sampled along the way.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ips/geometry.hpp"
#include "ips/model.hpp"

namespace ips {

struct Bounds {
  double width = 8.0;
  double height = 6.0;

  bool contains(const Position2D& p) const noexcept {
    return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
  }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct MagneticBump {
  Position2D center;
  double sigma_m = 1.0;
  std::array<double, 3> amplitude_ut{};

  friend bool operator==(const MagneticBump&, const MagneticBump&) = default;
};

/// Constant earth field plus a sum of Gaussian anomalies.
struct MagneticField {
  std::array<double, 3> earth_ut{20.0, 0.0, -45.0};
  std::vector<MagneticBump> bumps;
  double bump_scale = 1.0;

  std::array<double, 3> at(const Position2D& p) const noexcept;
  friend bool operator==(const MagneticField&, const MagneticField&) = default;
};

enum class Wall { kDirect = -1, kLeft = 0, kRight = 1, kBottom = 2, kTop = 3 };

/// One propagation path of a WiFi link. Reflections use the image of the
/// anchor across `wall`; `path_offset_m` adds scatter delay.
struct Ray {
  Wall wall = Wall::kDirect;
  double gain = 1.0;
  double path_offset_m = 0.0;

  friend bool operator==(const Ray&, const Ray&) = default;
};

struct SensorOffsets {
  SensorOffset uwb = SensorOffset::mounted_at(0.10, 0.05);
  SensorOffset wifi = SensorOffset::mounted_at(-0.08, 0.06);
  SensorOffset imu = SensorOffset::mounted_at(0.0, -0.05);

  friend bool operator==(const SensorOffsets&, const SensorOffsets&) = default;
};

struct Scenario {
  Bounds bounds;
  std::vector<Anchor> uwb_anchors;
  std::vector<Anchor> wifi_anchors;
  std::size_t subcarriers = 52;
  double subcarrier_spacing_hz = 312.5e3;
  MagneticField magnetic_field;
  std::vector<std::vector<Ray>> multipath;  // one ray list per wifi anchor
  std::vector<double> session_phase;        // one value per wifi anchor, [0, 2pi)
  PathLossModel path_loss;
  SensorOffsets sensor_offsets;
  std::uint64_t seed = 0;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct ScenarioOverrides {
  std::optional<Bounds> bounds;
  std::optional<std::vector<Anchor>> uwb_anchors;
  std::optional<std::vector<Anchor>> wifi_anchors;
  std::optional<std::size_t> subcarriers;
  std::optional<PathLossModel> path_loss;
  std::optional<SensorOffsets> sensor_offsets;
};

inline constexpr std::size_t kDefaultUwbAnchors = 3;
inline constexpr std::size_t kDefaultWifiAnchors = 13;
inline constexpr std::size_t kRaysPerAnchor = 4;
inline constexpr std::size_t kMagneticBumps = 12;

/// Deterministic in `seed`. Throws kInvalidOverride for anchors outside the
/// bounds, duplicate ids, or zero subcarriers.
Scenario build_scenario(std::uint64_t seed, const ScenarioOverrides& overrides = {});

struct TrajectoryOptions {
  double lane_spacing_m = 0.5;
  double margin_m = 0.4;
  double turn_speed_factor = 0.8;

  friend bool operator==(const TrajectoryOptions&, const TrajectoryOptions&) = default;
};

/// Ground-truth knots at a fixed rate. Between knots the robot moves with
/// constant velocity and turns along the shortest arc, so pose_at() is the
/// exact pose at any instant.
struct Trajectory {
  double rate_hz = 5.0;
  std::vector<TimedPose> samples;

  /// Clamped to the first/last knot outside the covered span.
  Pose pose_at(double t) const;
};

/// Boustrophedon sweep with semicircular turns, slowed on turns, ping-ponging
/// between the first and last lane. Heading follows the direction of motion.
Trajectory generate_trajectory(const Scenario& scenario, double duration_s, double speed_mps,
                               double rate_hz = 5.0, const TrajectoryOptions& options = {});

struct SensorRates {
  double gt = 5.0;
  double csi = 7.5;  // rssi shares the csi packet
  double uwb = 9.0;
  double imu = 76.93;

  friend bool operator==(const SensorRates&, const SensorRates&) = default;
};

struct NoiseConfig {
  double uwb_sigma_m = 0.1;
  double uwb_nlos_prob = 0.05;
  double uwb_nlos_bias_m = 0.5;
  double uwb_dropout_prob = 0.1;
  double uwb_power_sigma_db = 1.0;
  double rssi_sigma_db = 2.0;
  double csi_magnitude_sigma = 0.05;  // relative
  double csi_phase_sigma_rad = 0.05;
  double csi_gain_sigma_db = 1.0;     // per-packet receiver gain, common to all subcarriers
  double imu_accel_sigma = 0.05;
  double imu_gyro_sigma = 0.01;
  double mag_sigma_ut = 0.5;

  static NoiseConfig none() noexcept;
  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

/// Clocks of the three sensor boards; the robot clock is the reference.
struct SensorClocks {
  ClockModel uwb{0.4e-3, 2e-6};
  ClockModel wifi{-0.7e-3, -3e-6};
  ClockModel imu{0.25e-3, 1e-6};

  friend bool operator==(const SensorClocks&, const SensorClocks&) = default;
};

struct SimConfig {
  double duration_s = 600.0;
  double speed_mps = 0.2;
  SensorRates rates;
  NoiseConfig noise;
  SensorClocks clocks;
  // Received power is reported this many dB below the path-loss model.
  double rssi_attenuation_db = 0.0;
  std::uint64_t noise_seed = 0;
  TrajectoryOptions trajectory;

  /// Throws kInvalidConfig.
  void validate() const;
  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

inline constexpr const char* kUwbSourceId = "uwb-tag";
inline constexpr const char* kWifiSourceId = "esp-rx";
inline constexpr const char* kImuSourceId = "imu0";
inline constexpr const char* kGtSourceId = "robot";
inline constexpr double kGravity = 9.81;

/// World position of a sensor riding on the robot at `t`.
Position2D true_sensor_position(const Trajectory& trajectory, const SensorOffset& offset,
                                double t);

/// Noiseless channel of one WiFi link seen from `receiver`.
struct CsiSnapshot {
  std::vector<double> magnitudes;
  std::vector<double> phases;
};
CsiSnapshot csi_channel(const Scenario& scenario, std::size_t wifi_index,
                        const Position2D& receiver);

/// Emission times on a sensor's grid: k / rate for k >= 1 while < duration.
std::vector<double> emission_times(double rate_hz, double duration_s);

/// All sensor and ground-truth records, stable-sorted by (t, sensor, id).
/// Deterministic given (scenario.seed, config).
std::vector<Record> sample_sensors(const Scenario& scenario, const SimConfig& config,
                                   const Trajectory& trajectory);

struct Perturbation {
  SensorOffset sensor_offset_delta{0.0, 0.0, 0.0};
  double anchor_jitter_sigma_m = 0.0;
  bool session_phase_reseed = false;
  double magnetic_drift = 0.0;  // fractional change of anomaly strength

  /// The plate change used for the second dataset.
  static Perturbation second_session() noexcept;
  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

Scenario perturb_scenario(const Scenario& scenario, const Perturbation& perturbation,
                          std::uint64_t seed);

}  // namespace ips
