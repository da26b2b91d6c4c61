#pragma once

#include <cstddef>
#include <span>

#include "ips/model.hpp"

namespace ips {

struct RangeObservation {
  Anchor anchor;
  double distance = 0.0;
};

struct TrilatResult {
  Position2D position;
  double residual = 0.0;  // RMS of | |p - a_i| - d_i |
  std::size_t used_anchors = 0;
};

/// Least-squares trilateration on the radical lines of the range circles.
///
/// Coordinates are shifted so the first anchor sits at the origin. Each
/// further circle minus the first gives a line
///   2 x x_i + 2 y y_i = d_0^2 - d_i^2 + x_i^2 + y_i^2,
/// and the stacked lines are solved in the least-squares sense, which also
/// handles circles that fail to meet in a single point.
///
/// Throws kTooFewAnchors (< 3 observations) or kCollinearAnchors when the
/// normal matrix is rank deficient (sigma_min < 1e-10 sigma_max).
TrilatResult trilaterate(std::span<const RangeObservation> observations);

/// Fallback for one or two connected anchors: the centroid of the anchors.
/// Throws kEmptyObservations when nothing is connected.
TrilatResult degenerate_estimate(std::span<const RangeObservation> observations);

/// trilaterate() when possible, degenerate_estimate() otherwise (fewer than
/// three anchors or a collinear set).
TrilatResult localize(std::span<const RangeObservation> observations);

/// Moves a SLAM pose to the position of a sensor mounted on the robot:
///   p = slam.xy + r * (cos(phi + phi_off), sin(phi + phi_off)),
///   r = hypot(x_off, y_off).
Position2D translate_sensor_pose(const Pose& slam, const SensorOffset& offset) noexcept;

/// Log-distance path loss, RSSI(d) = p0 - 10 n log10(d / d0).
struct PathLossModel {
  double p0_dbm = -40.0;
  double d0_m = 1.0;
  double exponent = 2.2;

  friend bool operator==(const PathLossModel&, const PathLossModel&) = default;
};

/// Inverts the path-loss model after adding a calibration offset `beta`
/// to the reading: d = d0 * 10^((p0 - (rssi + beta)) / (10 n)).
double rssi_to_distance(double rssi_dbm, double p0_dbm, double d0_m, double exponent,
                        double beta_db) noexcept;

inline double rssi_to_distance(double rssi_dbm, const PathLossModel& model,
                               double beta_db = 0.0) noexcept {
  return rssi_to_distance(rssi_dbm, model.p0_dbm, model.d0_m, model.exponent, beta_db);
}

}  // namespace ips
