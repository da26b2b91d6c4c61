#include "ips/geometry.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "ips/error.hpp"

namespace ips {
namespace {

double rms_residual(const Position2D& p, std::span<const RangeObservation> observations) {
  double sum = 0.0;
  for (const RangeObservation& o : observations) {
    const double r = distance(p, o.anchor.position) - o.distance;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(observations.size()));
}

}  // namespace

TrilatResult trilaterate(std::span<const RangeObservation> observations) {
  const std::size_t n = observations.size();
  if (n < 3) {
    throw Error(ErrorCode::kTooFewAnchors, std::to_string(n) + " observations, need 3");
  }

  const Position2D origin = observations[0].anchor.position;
  const double d0 = observations[0].distance;

  Eigen::MatrixX2d lines(n - 1, 2);
  Eigen::VectorXd rhs(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    const double xi = observations[i].anchor.position.x - origin.x;
    const double yi = observations[i].anchor.position.y - origin.y;
    const double di = observations[i].distance;
    lines(i - 1, 0) = 2.0 * xi;
    lines(i - 1, 1) = 2.0 * yi;
    rhs(i - 1) = d0 * d0 - di * di + xi * xi + yi * yi;
  }

  const Eigen::Matrix2d normal = lines.transpose() * lines;
  const Eigen::Vector2d eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(
                                  normal, Eigen::EigenvaluesOnly)
                                  .eigenvalues();
  // Normal matrix is PSD, so its eigenvalues are its singular values.
  if (!(eig(1) > 0.0) || eig(0) < 1e-10 * eig(1)) {
    throw Error(ErrorCode::kCollinearAnchors, "anchor geometry has rank < 2");
  }

  const Eigen::Vector2d shifted = lines.colPivHouseholderQr().solve(rhs);
  TrilatResult result;
  result.position = {shifted(0) + origin.x, shifted(1) + origin.y};
  result.residual = rms_residual(result.position, observations);
  result.used_anchors = n;
  return result;
}

TrilatResult degenerate_estimate(std::span<const RangeObservation> observations) {
  if (observations.empty()) {
    throw Error(ErrorCode::kEmptyObservations, "no connected anchors");
  }
  Position2D centroid;
  for (const RangeObservation& o : observations) {
    centroid.x += o.anchor.position.x;
    centroid.y += o.anchor.position.y;
  }
  const double n = static_cast<double>(observations.size());
  centroid.x /= n;
  centroid.y /= n;
  return {centroid, rms_residual(centroid, observations), observations.size()};
}

TrilatResult localize(std::span<const RangeObservation> observations) {
  if (observations.size() >= 3) {
    try {
      return trilaterate(observations);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kCollinearAnchors) throw;
    }
  }
  return degenerate_estimate(observations);
}

Position2D translate_sensor_pose(const Pose& slam, const SensorOffset& offset) noexcept {
  const double lever = std::hypot(offset.x_off, offset.y_off);
  const double angle = slam.phi + offset.phi_off;
  return {slam.x + lever * std::cos(angle), slam.y + lever * std::sin(angle)};
}

double rssi_to_distance(double rssi_dbm, double p0_dbm, double d0_m, double exponent,
                        double beta_db) noexcept {
  return d0_m * std::pow(10.0, (p0_dbm - (rssi_dbm + beta_db)) / (10.0 * exponent));
}

}  // namespace ips
