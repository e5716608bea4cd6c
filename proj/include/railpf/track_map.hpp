#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "railpf/geometry.hpp"

namespace railpf {

/// Geometric features stored per map point; also the result of a lookup.
struct MapFeatures {
  double p_x = 0.0;
  double p_y = 0.0;
  double p_z = 0.0;
  double kappa = 0.0;
  double theta_x = 0.0;
  double theta_y = 0.0;
  double theta_z = 0.0;

  Eigen::Vector2d position() const { return {p_x, p_y}; }
  Orientation orientation() const { return {theta_x, theta_y, theta_z}; }
};

struct TrackPoint {
  double d = 0.0;
  MapFeatures mu;
};

/// Orthogonal projection of a plane point onto the map polyline.
struct TrackProjection {
  double d = 0.0;
  // Signed offset, positive to the left of the direction of increasing d.
  double across = 0.0;
  double distance = 0.0;
  std::size_t segment = 0;
  Eigen::Vector2d foot = Eigen::Vector2d::Zero();
  Eigen::Vector2d tangent = Eigen::Vector2d::UnitX();
};

/// Discrete track map used as a look-up table indexed by along-track
/// distance. Immutable once constructed; safe for concurrent reads.
class TrackMap {
 public:
  /// Validates ordering, finiteness and the chord inequality
  /// |p_{i+1} - p_i| <= |d_{i+1} - d_i| (1e-6 m slack).
  TrackMap(std::string id, std::vector<TrackPoint> points);

  const std::string& id() const { return id_; }
  std::span<const TrackPoint> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double front_d() const { return points_.front().d; }
  double back_d() const { return points_.back().d; }
  double length() const { return back_d() - front_d(); }

  bool contains(double d) const { return d >= front_d() && d <= back_d(); }

  /// Linear interpolation between the bracketing points. Angles blend along
  /// the shorter arc. Throws OutOfMapRangeError outside [front_d, back_d].
  MapFeatures lookup(double d) const;

  /// Same bracketing as lookup, restricted to the fields the particle
  /// weighting needs. Caller guarantees contains(d).
  void lookup_plane(double d, double& p_x, double& p_y, double& kappa) const;

  Orientation orientation_at(double d) const;

  /// Nearest point on the polyline over all segments.
  TrackProjection project(const Eigen::Vector2d& p) const;
  /// Nearest point restricted to segments within `window` of `hint`.
  TrackProjection project_near(const Eigen::Vector2d& p, std::size_t hint,
                               std::size_t window) const;

 private:
  std::size_t bracket(double d) const;
  TrackProjection project_range(const Eigen::Vector2d& p, std::size_t first,
                                std::size_t last) const;

  std::string id_;
  std::vector<TrackPoint> points_;
  std::vector<double> d_;
};

struct RawTrackPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  // Cant angle, passed through to theta_x.
  double roll = 0.0;
};

struct BuildOptions {
  std::string id = "track";
  double rdp_epsilon = 0.05;
  // Half-width, in samples, of the central difference used for pitch.
  std::size_t orientation_smoothing_window = 1;
  // Largest along-track gap allowed between spline knots after simplification.
  double max_knot_spacing = 50.0;
};

/// Builds the map from a surveyed polyline: chord-length distances, spline
/// curvature on the simplified knot set evaluated at every original point,
/// tangent heading, and pitch from height differences. Plane coordinates are
/// copied through unchanged.
TrackMap build_map(std::span<const RawTrackPoint> raw, const BuildOptions& options = {});

}  // namespace railpf
