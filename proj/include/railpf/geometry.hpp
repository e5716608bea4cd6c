#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace railpf {

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// One sample of a plane curve parameterized by along-track distance.
struct CurveSample {
  double d = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// Natural cubic spline through (d, x(d), y(d)) samples.
///
/// Immutable after construction. Evaluation outside [front_d, back_d] throws
/// Error{OutOfRange}.
class PlaneCurve {
 public:
  Eigen::Vector2d position(double d) const;
  Eigen::Vector2d first_derivative(double d) const;
  Eigen::Vector2d second_derivative(double d) const;

  double front_d() const { return d_.front(); }
  double back_d() const { return d_.back(); }
  std::size_t size() const { return d_.size(); }
  std::span<const double> knots() const { return d_; }

 private:
  friend PlaneCurve fit_spline(std::span<const CurveSample> points);

  std::size_t interval(double d) const;

  std::vector<double> d_;
  std::vector<double> x_;
  std::vector<double> y_;
  // Second derivatives at the knots, zero at both ends.
  std::vector<double> mx_;
  std::vector<double> my_;
};

/// Fits a natural cubic spline per coordinate. Needs at least 4 samples
/// with strictly increasing d.
PlaneCurve fit_spline(std::span<const CurveSample> points);

/// Signed curvature (x'y'' - y'x'') / (x'^2 + y'^2)^(3/2); positive turns
/// counter-clockwise.
double curvature_at(const PlaneCurve& curve, double d);

/// Heading of the curve tangent, atan2(y', x').
double heading_at(const PlaneCurve& curve, double d);

/// Ramer-Douglas-Peucker simplification. Returns the indices of retained
/// points in ascending order; first and last are always kept. A
/// non-positive epsilon keeps every point.
std::vector<std::size_t> simplify_rdp_indices(std::span<const Eigen::Vector2d> points,
                                              double epsilon);

std::vector<Eigen::Vector2d> simplify_rdp(std::span<const Eigen::Vector2d> points,
                                          double epsilon);

/// Cumulative chord length; d[0] = 0.
std::vector<double> arc_length(std::span<const Eigen::Vector2d> points);

/// Distance from p to the segment [a, b].
double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b);

/// Track-frame orientation. Angles are wrapped into (-pi, pi] on
/// construction.
///
/// Axes are x forward, y left, z up. Yaw is measured counter-clockwise from
/// the map x axis and pitch is positive when the forward axis climbs.
struct Orientation {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Orientation() = default;
  Orientation(double roll_rad, double pitch_rad, double yaw_rad);
};

/// Intrinsic yaw-pitch-roll composition mapping sensor-frame vectors into the
/// map frame: R = Rz(yaw) * Ry(-pitch) * Rx(roll).
Eigen::Matrix3d rotation_matrix(const Orientation& o);

/// R(o) * v
Eigen::Vector3d rotate(const Orientation& o, const Eigen::Vector3d& v);

/// R(o)^-1 * v
Eigen::Vector3d rotate_inverse(const Orientation& o, const Eigen::Vector3d& v);

}  // namespace railpf
